"""Named invariant suites for ``tesim verify``.

Each check is a small, independent function returning ``(passed, value)``.
Checks within a suite run on a thread pool whose size is capped by the
``TESIM_THREADS`` environment variable.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import constitutive as C
from .balance import (comparison_bracket, entropy_production_field, min_temperature_bound_series)
from .constitutive import ConstitutiveParams, Model
from .grid import (Grid, divergence, gradient, integrate, laplacian_neumann,
                   variable_coefficient_diffusion)
from .relent import (quadratic_limit_ratio, rel_entropy_density_linear,
                     rel_entropy_density_nonlinear, weak_strong_compare)
from .solver import InitialData, SolverConfig, run

MODELS = {
    "LinearCV": ConstitutiveParams(),
    "PowerLaw(2,2)": ConstitutiveParams(model=Model.PowerLaw, alpha=2, beta=2),
    "PowerLaw(3,2)": ConstitutiveParams(model=Model.PowerLaw, alpha=3, beta=2),
}


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    value: str


def max_threads() -> int:
    raw = os.environ.get("TESIM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


# -- constitutive -----------------------------------------------------------------

def _constitutive_checks():
    out = {}
    thetas = np.geomspace(1e-6, 1e6, 2001)
    for label, p in MODELS.items():
        def gibbs(p=p):
            r = C.check_gibbs(p, (0.5, 2.0), 1e-6)
            return r.passed, f"{r.max_violation:.2e}"

        def stability(p=p):
            r = C.check_stability(p)
            return r.passed, f"c2={r.c2:.3g}"

        def monotone(p=p):
            ok = all(np.all(np.diff(np.asarray(f(p, thetas))) > 0)
                     for f in (C.internal_energy, C.entropy, C.conductivity_primitive))
            return ok, "e1, s1, K increasing"

        def fd(p=p):
            th = np.geomspace(1e-2, 1e2, 41)
            worst = 0.0
            for f, df in ((C.internal_energy, C.heat_capacity),
                          (C.conductivity_primitive, C.conductivity)):
                h = 1e-5 * th
                num = (np.asarray(f(p, th + h)) - np.asarray(f(p, th - h))) / (2 * h)
                worst = max(worst, float(np.max(np.abs(num / np.asarray(df(p, th)) - 1))))
            return worst <= 1e-6, f"{worst:.2e}"

        def argmin(p=p):
            worst = 0.0
            for tb in (0.3, 1.0, 4.0):
                am, cell = C.helmholtz_argmin(p, tb)
                worst = max(worst, abs(np.log(am / tb)) / np.log(cell))
            return worst <= 1.0, f"{worst:.2f} cells"

        for name, fn in (("gibbs", gibbs), ("stability", stability), ("monotone", monotone),
                         ("derivatives", fd), ("helmholtz_argmin", argmin)):
            out[f"{label}: {name}"] = fn

    def mollifier_bounds():
        x = np.linspace(-50, 50, 20001)
        ok = True
        for w in (1e-1, 1e-2, 1e-3):
            f = np.asarray(C.mollifier(w, x))
            slope = np.diff(f) / np.diff(x)
            ok &= bool(np.all(f >= w / (1 + w * w) - 1e-15) and np.all(f < 1 / w)
                       and np.all(np.abs(slope) < 1))
        return ok, "omega/(1+omega^2) <= f < 1/omega, |f'| < 1"

    def rejects_alpha():
        try:
            ConstitutiveParams(model=Model.PowerLaw, alpha=0.5, beta=2)
        except ValueError:
            return True, "alpha=0.5 rejected"
        return False, "alpha=0.5 accepted"

    out["mollifier bounds"] = mollifier_bounds
    out["parameter validation"] = rejects_alpha
    return out


# -- operators ----------------------------------------------------------------------

def _smooth_fields(grid: Grid):
    X = grid.coords()
    f = np.ones(grid.shape)
    g = grid.zeros_vector()
    for a, x in enumerate(X):
        f = f * (1.3 + np.cos(1.7 * x + 0.2 * a))
    for a in range(grid.dim):
        comp = np.ones(grid.shape)
        for b, x in enumerate(X):
            comp = comp * np.sin(np.pi * x / grid.extents[b])
        g[a] = comp * (1 + 0.5 * X[a])
    return f, g


def _operator_checks():
    out = {}
    for dim, n in ((1, 65), (2, 33)):
        grid = Grid.uniform(n, dim=dim)

        def adjoint(grid=grid):
            f, g = _smooth_fields(grid)
            lhs = integrate(grid, f * divergence(grid, g))
            rhs = -sum(integrate(grid, a * b) for a, b in zip(gradient(grid, f), g))
            err = abs(lhs - rhs)
            return err <= 1e-12 * max(1.0, abs(lhs)), f"{err:.1e}"

        def conservative(grid=grid):
            f, _ = _smooth_fields(grid)
            kappa = 1.0 + f**2
            m = integrate(grid, variable_coefficient_diffusion(grid, kappa, f))
            return abs(m) <= 1e-10, f"{m:.1e}"

        def nsd(grid=grid):
            rng = np.random.default_rng(1)
            worst = -np.inf
            for _ in range(5):
                f = rng.standard_normal(grid.shape)
                worst = max(worst, integrate(grid, f * laplacian_neumann(grid, f)))
            return worst <= 1e-12, f"max <f, Lf> = {worst:.2e}"

        out[f"{dim}D: div/grad adjoint"] = adjoint
        out[f"{dim}D: diffusion conservative"] = conservative
        out[f"{dim}D: Neumann Laplacian NSD"] = nsd

    def order():
        errs = []
        for n in (17, 33, 65, 129):
            grid = Grid.uniform(n)
            x = grid.coords()[0]
            err = laplacian_neumann(grid, np.cos(np.pi * x)) + np.pi**2 * np.cos(np.pi * x)
            errs.append(float(np.max(np.abs(err))))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        return bool(np.all(orders >= 1.9)), f"min order {orders.min():.2f}"

    out["Neumann Laplacian order"] = order
    return out


# -- balances -----------------------------------------------------------------------

def _hotspot(grid, base=1.0, amp=1.0):
    x = grid.coords()[0]
    theta = base + amp * np.exp(-((x - 0.5) ** 2) / (2 * 0.1**2))
    return InitialData(grid, grid.zeros_vector(), grid.zeros_vector(), theta)


def _balance_checks():
    cache = {}

    def traj():
        if "t" not in cache:
            grid = Grid.uniform(65)
            cache["t"] = (run(_hotspot(grid, 0.1), SolverConfig(dt=1e-3, t_end=0.25)), grid)
        return cache["t"]

    def energy():
        tr, _ = traj()
        e0 = tr.ledger[0].aux["energy0"]
        r = max(abs(row.energy_residual) for row in tr.ledger) / e0
        return r <= 1e-3, f"{r:.2e}"

    def dissipation():
        tr, _ = traj()
        d = np.array([row.dissipation_cum for row in tr.ledger])
        ok = bool(np.all(np.diff(d) > 0))
        h0 = tr.ledger[0].aux["helmholtz0"]
        r = max(abs(row.dissipation_residual) for row in tr.ledger) / abs(h0)
        return ok and r <= 1e-2, f"monotone={ok}, {r:.2e}"

    def production():
        tr, _ = traj()
        m = min(float(entropy_production_field(s, tr.cfg.params).min()) for s in tr.snapshots)
        return m >= 0, f"min {m:.2e}"

    def min_principle():
        tr, _ = traj()
        times = [0.0] + [r.t for r in tr.trace]
        a = [tr.trace[0].a_norm] + [r.a_norm for r in tr.trace]
        bound = min_temperature_bound_series(tr.ledger[0].min_theta, times, a)
        mins = np.array([row.min_theta for row in tr.ledger])
        ratio = float(np.min(mins / (0.99 * bound)))
        return ratio >= 1.0, f"min theta / (0.99 bound) = {ratio:.4f}"

    def equilibrium():
        grid = Grid.uniform(33)
        init = InitialData(grid, grid.zeros_vector(), grid.zeros_vector(), np.full(33, 1.5))
        tr = run(init, SolverConfig(dt=1e-2, t_end=0.1))
        r = max(max(abs(row.energy_residual), abs(row.dissipation_residual)) for row in tr.ledger)
        return r < 1e-10, f"{r:.1e}"

    def bracket():
        p = ConstitutiveParams(model=Model.PowerLaw, alpha=2, beta=2, delta=1e-2)
        grid = Grid.uniform(65)
        tr = run(_hotspot(grid), SolverConfig(dt=2e-3, t_end=0.25, params=p))
        lo, hi = comparison_bracket(p, 1.0, 2.0, min(r.div_min for r in tr.trace),
                                    max(r.div_max for r in tr.trace))
        ok = all(lo <= row.min_theta and row.max_theta <= hi for row in tr.ledger)
        return ok, f"[{lo:.3g}, {hi:.3g}]"

    # the run is shared, so build it before fanning out
    return {"energy residual": energy, "dissipation": dissipation,
            "entropy production >= 0": production, "minimum principle": min_principle,
            "equilibrium steady": equilibrium, "comparison bracket": bracket}, traj


# -- relative entropy -------------------------------------------------------------

def _relent_checks():
    def nonneg():
        th = np.geomspace(1e-4, 1e4, 401)
        TH = np.geomspace(1e-2, 1e2, 41)
        a, b = np.meshgrid(th, TH, indexing="ij")
        worst = float(np.min(rel_entropy_density_linear(np.log(a), b) / (a + b)))
        for p in MODELS.values():
            # relative to the size of the cancelling terms
            scale = (np.abs(C.internal_energy(p, a)) + np.abs(C.internal_energy(p, b))
                     + b * (np.abs(C.entropy(p, a)) + np.abs(C.entropy(p, b))))
            worst = min(worst, float(np.min(rel_entropy_density_nonlinear(p, a, b) / scale)))
        return worst >= -1e-14, f"min relative {worst:.1e}"

    def diagonal():
        TH = np.geomspace(1e-2, 1e2, 41)
        worst = max(float(np.max(np.abs(rel_entropy_density_nonlinear(p, TH, TH))))
                    for p in MODELS.values())
        return worst == 0.0, f"{worst:.1e}"

    def limit():
        worst = 0.0
        for p in MODELS.values():
            for T in (0.5, 1.0, 2.0):
                h = 1e-3 * T
                num = h * h / rel_entropy_density_nonlinear(p, T + h, T)
                worst = max(worst, abs(num / quadratic_limit_ratio(p, T) - 1))
        return worst <= 1e-2, f"{worst:.1e}"

    def identical():
        grid = Grid.uniform(33)
        cfg = SolverConfig(dt=2e-3, t_end=0.1)
        a = run(_hotspot(grid), cfg, snapshot_stride=10)
        b = run(_hotspot(grid), cfg, snapshot_stride=10)
        rep = weak_strong_compare(a, b, cfg.params)
        m = float(np.max(np.abs(rep.total)))
        return m == 0.0 and rep.verdict, f"max total {m:.1e}"

    return {"density >= 0": nonneg, "zero on diagonal": diagonal,
            "quadratic limit": limit, "identical runs": identical}


SUITES = ("constitutive", "operators", "balances", "relent")


def run_suite(name: str, threads: int | None = None) -> list[CheckResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    if name == "constitutive":
        checks = _constitutive_checks()
    elif name == "operators":
        checks = _operator_checks()
    elif name == "balances":
        checks, warm = _balance_checks()
        warm()
    else:
        checks = _relent_checks()
    workers = threads or max_threads()

    def one(item):
        label, fn = item
        try:
            ok, value = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, value = False, f"{type(exc).__name__}: {exc}"
        return CheckResult(name, label, bool(ok), str(value))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, checks.items()))


def format_table(results: list[CheckResult]) -> str:
    width = max([len(r.name) for r in results] + [5])
    lines = [f"{'suite':<13} {'check':<{width}}  status  value"]
    for r in results:
        lines.append(f"{r.suite:<13} {r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.value}")
    return "\n".join(lines)
