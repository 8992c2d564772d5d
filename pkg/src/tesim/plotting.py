"""Matplotlib figures written next to the CSV/JSON outputs (Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
    "savefig.dpi": 130,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_ledger(rows, path, bound=None):
    """Energy budget, residuals and temperature range over time."""
    t = np.array([r.t for r in rows])
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(11.0, 3.4))
        ax = axes[0]
        for name in ("kinetic", "elastic", "thermal"):
            ax.plot(t, [getattr(r, name) for r in rows], label=name)
        ax.plot(t, [r.dissipation_cum for r in rows], "--", label="dissipation")
        ax.set_xlabel("t")
        ax.set_title("energy budget")
        ax.legend()

        ax = axes[1]
        for name in ("energy_residual", "dissipation_residual"):
            vals = np.abs([getattr(r, name) for r in rows])
            ax.semilogy(t[1:], np.maximum(vals[1:], 1e-300), label=name.replace("_", " "))
        ax.set_xlabel("t")
        ax.set_title("|residual|")
        ax.legend()

        ax = axes[2]
        ax.plot(t, [r.min_theta for r in rows], label="min theta")
        ax.plot(t, [r.max_theta for r in rows], label="max theta")
        if bound is not None:
            ax.plot(t, bound, ":", color="k", label="lower bound")
        ax.set_xlabel("t")
        ax.set_title("temperature range")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_relent(report, path):
    t = report.times
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(t, np.maximum(report.total, 1e-300), "k", lw=2, label="total")
        ax.semilogy(t, np.maximum(report.rel_entropy, 1e-300), label="thermal")
        ax.semilogy(t, np.maximum(report.velocity_gap, 1e-300), label="velocity")
        ax.semilogy(t, np.maximum(report.strain_gap, 1e-300), label="strain")
        if report.total[0] > 0:
            ax.semilogy(t, report.total[0] * np.exp(report.reference_C * t), ":", color="gray",
                        label=f"exp({report.reference_C:.3g} t)")
        ax.set_xlabel("t")
        ax.set_ylabel("relative entropy")
        ax.set_title(f"fitted C = {report.fitted_C:.3g}  ({report.regime})")
        ax.legend()
        return _save(fig, path)


def plot_convergence(tables, path):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(tables), figsize=(5.0 * len(tables), 3.6), squeeze=False)
        for ax, tab in zip(axes[0], tables):
            x = np.array(tab.dts if tab.study == "time" else [1.0 / (n - 1) for n in tab.nodes])
            ax.loglog(x, tab.err_u, "o-", label="u")
            ax.loglog(x, tab.err_theta, "s-", label="theta")
            p = 1 if tab.study == "time" else 2
            ax.loglog(x, tab.err_theta[-1] * (x / x[-1]) ** p, ":", color="gray",
                      label=f"slope {p}")
            ax.set_xlabel("dt" if tab.study == "time" else "h")
            ax.set_ylabel("max error")
            ax.set_title(f"{tab.study} convergence")
            ax.legend()
        fig.tight_layout()
        return _save(fig, path)
