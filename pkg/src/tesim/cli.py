"""Command line interface: ``tesim run|verify|compare|mms``.

Exit codes: 0 success, 1 invariant failure, 2 configuration error,
3 numerical failure (Newton/Picard divergence, loss of positivity, NaN).
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .balance import ledger as ledger_row, min_temperature_bound_series
from .config import ConfigParseError, RunConfig, build_initial, load_config, parse_config
from .errors import GridMismatch, NumericalFailure, ParameterError
from .io import (read_state, read_trace_csv, write_json, write_ledger_csv, write_state,
                 write_trace_csv)
from .solver import Coupling, HeatFormulation, SimState, run

log = logging.getLogger("tesim")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
MMS_SPACE_ORDER, MMS_TIME_ORDER = 1.9, 0.9


class ConfigError(Exception):
    pass


def _load(path) -> RunConfig:
    try:
        return load_config(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc


# -- run ---------------------------------------------------------------------------

def _snapshot_name(step: int) -> str:
    return f"snap_{step:06d}.tesim"


def cmd_run(config_path, out_dir, stride: int | None = None, plots: bool = True) -> int:
    cfg = _load(config_path) if config_path else parse_config("{}")
    if stride is not None:
        if stride < 0:
            raise ConfigError("--stride must be >= 0")
        cfg = replace(cfg, output=replace(cfg.output, snapshot_stride=stride))
    out = Path(out_dir)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    init = build_initial(cfg)
    write_json(out / "config.json", cfg.to_dict())

    scfg = cfg.solver
    stride_n = cfg.output.snapshot_stride
    # partial ledger survives a numerical failure
    rows = [ledger_row(init.state(), None, scfg.dt, scfg.params)]
    trace, snaps = [], []

    def on_step(n, state, row):
        rows.append(row)

    t0 = time.perf_counter()
    status, message = "ok", ""
    traj = None
    try:
        traj = run(init, scfg, snapshot_stride=stride_n, on_step=on_step)
    except NumericalFailure as exc:
        status, message = "numerical_failure", str(exc)
        log.error("%s", exc)
    wall = time.perf_counter() - t0

    if traj is not None:
        rows = traj.ledger
        trace = traj.trace
        steps_taken = scfg.num_steps
        snap_steps = [0] + [n for n in range(1, steps_taken + 1)
                            if stride_n and n % stride_n == 0 and n != steps_taken]
        if steps_taken > 0:
            snap_steps.append(steps_taken)
        for n, s in zip(snap_steps, traj.snapshots):
            write_state(snap_dir / _snapshot_name(n), s)
            snaps.append(_snapshot_name(n))
        write_trace_csv(out / "trace.csv", trace)
    if rows:
        write_ledger_csv(out / "ledger.csv", rows, cfg.output.ledger_stride)

    summary = {
        "status": status,
        "message": message,
        "steps": len(rows) - 1 if rows else 0,
        "t_final": rows[-1].t if rows else 0.0,
        "final_energy_residual": rows[-1].energy_residual if rows else None,
        "final_dissipation_residual": rows[-1].dissipation_residual if rows else None,
        "max_abs_energy_residual": max(abs(r.energy_residual) for r in rows) if rows else None,
        "min_theta": min(r.min_theta for r in rows) if rows else None,
        "max_theta": max(r.max_theta for r in rows) if rows else None,
        "initial_energy": rows[0].aux["energy0"] if rows else None,
        "wall_time_s": wall,
        "snapshots": snaps,
        "version": __version__,
    }
    if plots and traj is not None and rows:
        from .plotting import plot_ledger

        times = [r.t for r in rows]
        a = [trace[0].a_norm if trace else 0.0] + [r.a_norm for r in trace]
        bound = min_temperature_bound_series(rows[0].min_theta, times, a)
        summary["figures"] = [str(plot_ledger(rows, out / "ledger.png", bound).name)]
    write_json(out / "summary.json", summary)
    print(f"{status}: {summary['steps']} steps, t={summary['t_final']:.6g}, "
          f"min theta={summary['min_theta']:.6g}, wall {wall:.2f}s -> {out}")
    return EXIT_OK if status == "ok" else EXIT_NUMERICAL


# -- verify --------------------------------------------------------------------------

def cmd_verify(suite: str) -> int:
    from .verify import SUITES, format_table, run_suite

    names = SUITES if suite == "all" else (suite,)
    if any(n not in SUITES for n in names):
        raise ConfigError(f"unknown suite {suite!r}; choose from all, {', '.join(SUITES)}")
    results = [r for n in names for r in run_suite(n)]
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_INVARIANT if failed else EXIT_OK


# -- compare ------------------------------------------------------------------------

def load_run(run_dir):
    """Trajectory-like view of a ``tesim run`` output directory."""
    run_dir = Path(run_dir)
    cfg = _load(run_dir / "config.json")
    grid = cfg.grid.build()
    snaps = []
    for path in sorted((run_dir / "snapshots").glob("snap_*.tesim")):
        u, v, theta, t = read_state(path, grid)
        snaps.append(SimState(grid, t, u, v, theta))
    if not snaps:
        raise ConfigError(f"{run_dir}: no snapshots found")
    trace = [SimpleNamespace(**r) for r in read_trace_csv(run_dir / "trace.csv")]
    return SimpleNamespace(grid=grid, cfg=cfg, snapshots=snaps, trace=trace)


def cmd_compare(ref_dir, other_dir, out_dir=None, plots: bool = True) -> int:
    from .relent import weak_strong_compare

    ref = load_run(ref_dir)
    other = load_run(other_dir)
    if ref.grid != other.grid:
        raise GridMismatch("runs use different grids")
    rep = weak_strong_compare(other, ref, ref.cfg.params)
    out = Path(out_dir) if out_dir else Path(other_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "relent.csv", "w") as fh:
        fh.write("t,rel_entropy,velocity_gap,strain_gap,total\n")
        for row in zip(rep.times, rep.rel_entropy, rep.velocity_gap, rep.strain_gap, rep.total):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    summary = rep.summary()
    summary["max_total"] = float(np.max(rep.total))
    summary["reference"] = str(ref_dir)
    if plots:
        from .plotting import plot_relent

        summary["figures"] = [plot_relent(rep, out / "relent.png").name]
    write_json(out / "relent.json", summary)
    print(f"verdict {summary['verdict']}: fitted C={rep.fitted_C:.4g}, "
          f"reference C={rep.reference_C:.4g}, max total={summary['max_total']:.3e} ({rep.regime})")
    return EXIT_OK if rep.verdict else EXIT_INVARIANT


# -- mms -----------------------------------------------------------------------------

def cmd_mms(refinements: int, study: str = "both", config_path=None, coupling=None,
            formulation=None, out_dir=None, plots: bool = True) -> int:
    from .mms import run_mms

    scfg = _load(config_path).solver if config_path else parse_config("{}").solver
    if coupling:
        scfg = replace(scfg, coupling=Coupling(coupling))
    if formulation:
        scfg = replace(scfg, heat_formulation=HeatFormulation(formulation))
    if refinements < 3:
        raise ConfigError("--refinements must be >= 3")
    studies = ("space", "time") if study == "both" else (study,)
    tables, ok = [], True
    for s in studies:
        tab = run_mms(scfg, refinements, s)
        tables.append(tab)
        print(tab.format())
        need = MMS_SPACE_ORDER if s == "space" else MMS_TIME_ORDER
        worst = min(tab.orders_u + tab.orders_theta)
        print(f"min observed order {worst:.3f} (required {need})")
        ok &= worst >= need
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = [{"study": t.study, "nodes": n, "dt": dt, "err_u": eu, "err_theta": et,
                 "order_u": ou, "order_theta": ot}
                for t in tables for n, dt, eu, et, ou, ot in t.rows()]
        write_json(out / "mms.json", {"rows": rows, "passed": bool(ok)})
        if plots:
            from .plotting import plot_convergence

            plot_convergence(tables, out / "convergence.png")
    return EXIT_OK if ok else EXIT_INVARIANT


# -- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tesim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a configured scenario")
    p.add_argument("--config", type=Path, help="JSON run configuration (defaults if omitted)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--stride", type=int, help="snapshot stride in steps (overrides config)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("--suite", default="all",
                   help="constitutive | operators | balances | relent | all")

    p = sub.add_parser("compare", help="relative entropy of a run against a reference run")
    p.add_argument("--ref", type=Path, required=True, help="reference run directory")
    p.add_argument("other", type=Path, help="run directory to compare")
    p.add_argument("--out", type=Path, help="report directory (defaults to the compared run)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("mms", help="manufactured-solution convergence study")
    p.add_argument("--refinements", type=int, default=3)
    p.add_argument("--study", choices=("space", "time", "both"), default="both")
    p.add_argument("--config", type=Path, help="take solver/constitutive settings from here")
    p.add_argument("--coupling", choices=[c.value for c in Coupling])
    p.add_argument("--formulation", choices=[f.value for f in HeatFormulation])
    p.add_argument("--out", type=Path, help="write mms.json and convergence.png here")
    p.add_argument("--no-plots", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.stride, not args.no_plots)
        if args.command == "verify":
            return cmd_verify(args.suite)
        if args.command == "compare":
            return cmd_compare(args.ref, args.other, args.out, not args.no_plots)
        return cmd_mms(args.refinements, args.study, args.config, args.coupling,
                       args.formulation, args.out, not args.no_plots)
    except ParameterError as exc:
        print("configuration error:", file=sys.stderr)
        for path, rule in exc.problems:
            print(f"  {path}: {rule}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigParseError, ConfigError, GridMismatch) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
