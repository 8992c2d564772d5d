"""Run configuration (JSON) and the initial-data presets.

A configuration document looks like::

    {
      "dt": 1e-3, "t_end": 1.0, "coupling": "Splitting",
      "params": {"model": "LinearCV", "mu": 1.0},
      "grid": {"dim": 1, "nodes": 129, "extent": 1.0},
      "initial": {"preset": "GaussianHotSpot", "base": 1.0, "amplitude": 1.0},
      "output": {"snapshot_stride": 100, "ledger_stride": 1},
      "seed": 0
    }

Every key is optional.  Unknown keys and duplicate keys are errors, and all
validation problems are reported together with their field paths.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .constitutive import ConstitutiveParams, Model
from .errors import ParameterError, TesimError
from .grid import Grid
from .solver import Coupling, HeatFormulation, InitialData, SolverConfig


class ConfigParseError(TesimError, ValueError):
    """The document is not well-formed JSON (or repeats a key)."""


class Preset(str, enum.Enum):
    Equilibrium = "Equilibrium"
    GaussianHotSpot = "GaussianHotSpot"
    StandingWave = "StandingWave"
    TwoScale = "TwoScale"


@dataclass(frozen=True)
class GridSpec:
    dim: int = 1
    nodes: tuple = (129,)
    extent: tuple = (1.0,)

    def build(self) -> Grid:
        return Grid(self.dim, self.extent, self.nodes)


@dataclass(frozen=True)
class Perturbation:
    kind: str = "none"           # none | bump | noise
    epsilon: float = 0.0
    width: float = 0.1
    center: float | None = None  # defaults to the domain centre


@dataclass(frozen=True)
class InitialSpec:
    preset: Preset | None = Preset.GaussianHotSpot
    base: float = 1.0
    amplitude: float = 1.0       # temperature bump, or displacement for StandingWave
    width: float = 0.1
    center: float | None = None
    perturbation: Perturbation = field(default_factory=Perturbation)
    snapshot: str | None = None  # TESIM1 file with u, v, theta (overrides preset)


@dataclass(frozen=True)
class OutputSpec:
    snapshot_stride: int = 0
    ledger_stride: int = 1


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int = 0
    base_dir: Path = Path(".")

    @property
    def params(self) -> ConstitutiveParams:
        return self.solver.params

    def to_dict(self) -> dict:
        s = self.solver
        p = s.params
        d = {f.name: getattr(s, f.name) for f in fields(SolverConfig) if f.name != "params"}
        d = {k: (v.value if isinstance(v, enum.Enum) else v) for k, v in d.items()}
        d["params"] = {f.name: getattr(p, f.name) for f in fields(ConstitutiveParams)}
        d["params"]["model"] = p.model.value
        g = self.grid
        d["grid"] = {"dim": g.dim, "nodes": list(g.nodes), "extent": list(g.extent)}
        i = self.initial
        init = {"preset": i.preset.value if i.preset else None, "base": i.base,
                "amplitude": i.amplitude, "width": i.width, "center": i.center,
                "perturbation": {f.name: getattr(i.perturbation, f.name)
                                 for f in fields(Perturbation)}}
        if i.snapshot is not None:
            init["snapshot"] = str(self.resolve(i.snapshot))
        d["initial"] = init
        d["output"] = {"snapshot_stride": self.output.snapshot_stride,
                       "ledger_stride": self.output.ledger_stride}
        d["seed"] = self.seed
        return d

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


# -- parsing --------------------------------------------------------------------

def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigParseError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _strict_float(s):
    raise ConfigParseError(f"non-finite number {s!r} not allowed")


SOLVER_KEYS = {f.name for f in fields(SolverConfig)} - {"params"}
PARAM_KEYS = {f.name for f in fields(ConstitutiveParams)}
TOP_KEYS = SOLVER_KEYS | {"params", "grid", "initial", "output", "seed"}
GRID_KEYS = {"dim", "nodes", "extent"}
INIT_KEYS = {f.name for f in fields(InitialSpec)}
PERT_KEYS = {f.name for f in fields(Perturbation)}
OUT_KEYS = {f.name for f in fields(OutputSpec)}


class _Collector:
    """Gathers (path, rule) pairs while reading a nested dict."""

    def __init__(self):
        self.problems = []

    def add(self, path, rule):
        self.problems.append((path, rule))

    def section(self, doc, key, allowed, prefix=""):
        path = f"{prefix}{key}"
        sub = doc.get(key, {})
        if not isinstance(sub, dict):
            self.add(path, "must be an object")
            return {}
        for k in sub:
            if k not in allowed:
                self.add(f"{path}.{k}", "unknown key")
        return {k: v for k, v in sub.items() if k in allowed}

    def number(self, d, key, path, default, integer=False):
        if key not in d:
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.add(path, "must be a number")
            return default
        if integer and not float(v).is_integer():
            self.add(path, "must be an integer")
            return default
        return int(v) if integer else float(v)

    def choice(self, d, key, path, enum_cls, default):
        if key not in d:
            return default
        try:
            return enum_cls(d[key])
        except ValueError:
            self.add(path, "one of " + ", ".join(e.value for e in enum_cls))
            return default


def _per_axis(c, value, dim, path, integer):
    vals = value if isinstance(value, list) else [value] * dim
    if len(vals) != dim:
        c.add(path, f"need {dim} entries")
        return None
    out = []
    for v in vals:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            c.add(path, "must be numbers")
            return None
        if integer and not float(v).is_integer():
            c.add(path, "must be integers")
            return None
        out.append(int(v) if integer else float(v))
    return tuple(out)


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse and validate a JSON configuration document.

    Raises ConfigParseError for malformed JSON and ParameterError (listing
    every problem with its field path) for invalid content.
    """
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_strict_float)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigParseError("top level must be an object")

    c = _Collector()
    for k in doc:
        if k not in TOP_KEYS:
            c.add(k, "unknown key")

    # constitutive parameters
    pd = c.section(doc, "params", PARAM_KEYS)
    defaults = ConstitutiveParams()
    pkw = {"model": c.choice(pd, "model", "params.model", Model, defaults.model)}
    for name in PARAM_KEYS - {"model"}:
        pkw[name] = c.number(pd, name, f"params.{name}", getattr(defaults, name))
    probe = object.__new__(ConstitutiveParams)
    for k, v in pkw.items():
        object.__setattr__(probe, k, v)
    found = probe.violations()
    if pkw["model"] is not Model.PowerLaw:
        # explicitly given exponents are checked even when the model ignores them
        pl = object.__new__(ConstitutiveParams)
        for k, v in {**pkw, "model": Model.PowerLaw, "beta": pkw["beta"] or 1.0}.items():
            object.__setattr__(pl, k, v)
        found += [(f, r) for f, r in pl.violations() if f in pd and f in ("alpha", "beta")]
    for path, rule in found:
        c.add(f"params.{path}", rule)

    # solver
    sdef = SolverConfig()
    skw = {
        "coupling": c.choice(doc, "coupling", "coupling", Coupling, sdef.coupling),
        "heat_formulation": c.choice(doc, "heat_formulation", "heat_formulation",
                                     HeatFormulation, sdef.heat_formulation),
    }
    for name in ("dt", "t_end", "picard_tol", "newton_tol"):
        skw[name] = c.number(doc, name, name, getattr(sdef, name))
    for name in ("picard_max_iters", "newton_max_iters"):
        skw[name] = c.number(doc, name, name, getattr(sdef, name), integer=True)
    sprobe = object.__new__(SolverConfig)
    for k, v in skw.items():
        object.__setattr__(sprobe, k, v)
    object.__setattr__(sprobe, "params", probe)
    for path, rule in sprobe.violations():
        c.add(path, rule)

    # grid
    gd = c.section(doc, "grid", GRID_KEYS)
    dim = c.number(gd, "dim", "grid.dim", 1, integer=True)
    if dim not in (1, 2):
        c.add("grid.dim", "1 or 2")
        dim = 1
    nodes = _per_axis(c, gd.get("nodes", 129), dim, "grid.nodes", True)
    extent = _per_axis(c, gd.get("extent", 1.0), dim, "grid.extent", False)
    if nodes and any(n < 3 for n in nodes):
        c.add("grid.nodes", "at least 3 nodes per axis")
    if extent and any(not e > 0 for e in extent):
        c.add("grid.extent", "lengths must be positive")

    # initial data
    idd = c.section(doc, "initial", INIT_KEYS)
    idef = InitialSpec()
    preset = idef.preset
    if "preset" in idd and idd["preset"] is None:
        preset = None
    else:
        preset = c.choice(idd, "preset", "initial.preset", Preset, idef.preset)
    ikw = {}
    for name in ("base", "amplitude", "width"):
        ikw[name] = c.number(idd, name, f"initial.{name}", getattr(idef, name))
    center = idd.get("center")
    if center is not None:
        center = c.number(idd, "center", "initial.center", None)
    if not ikw["base"] > 0:
        c.add("initial.base", "base temperature > 0")
    if preset is not Preset.StandingWave and not ikw["amplitude"] >= 0:
        c.add("initial.amplitude", "temperature bump must be >= 0")
    if not ikw["width"] > 0:
        c.add("initial.width", "width > 0")
    pt = c.section(idd, "perturbation", PERT_KEYS, prefix="initial.")
    kind = pt.get("kind", "none")
    if kind not in ("none", "bump", "noise"):
        c.add("initial.perturbation.kind", "one of none, bump, noise")
    eps = c.number(pt, "epsilon", "initial.perturbation.epsilon", 0.0)
    if not eps >= 0:
        c.add("initial.perturbation.epsilon", "epsilon >= 0")
    pw = c.number(pt, "width", "initial.perturbation.width", 0.1)
    if not pw > 0:
        c.add("initial.perturbation.width", "width > 0")
    pc = pt.get("center")
    if pc is not None:
        pc = c.number(pt, "center", "initial.perturbation.center", None)
    snap = idd.get("snapshot")
    if snap is not None and not isinstance(snap, str):
        c.add("initial.snapshot", "must be a path string")
        snap = None
    if preset is None and snap is None:
        c.add("initial", "need a preset or a snapshot")

    # output
    od = c.section(doc, "output", OUT_KEYS)
    sstride = c.number(od, "snapshot_stride", "output.snapshot_stride", 0, integer=True)
    lstride = c.number(od, "ledger_stride", "output.ledger_stride", 1, integer=True)
    if sstride < 0:
        c.add("output.snapshot_stride", "snapshot_stride >= 0")
    if lstride < 1:
        c.add("output.ledger_stride", "ledger_stride >= 1")
    seed = c.number(doc, "seed", "seed", 0, integer=True)
    if seed < 0:
        c.add("seed", "seed >= 0")

    if c.problems:
        raise ParameterError(c.problems)

    params = ConstitutiveParams(**pkw)
    solver = SolverConfig(params=params, **skw)
    return RunConfig(
        solver=solver,
        grid=GridSpec(dim, nodes, extent),
        initial=InitialSpec(preset, perturbation=Perturbation(kind, eps, pw, pc),
                            center=center, snapshot=snap, **ikw),
        output=OutputSpec(sstride, lstride),
        seed=seed,
        base_dir=Path(base_dir),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


# -- presets ----------------------------------------------------------------------

def _gaussian(grid: Grid, width, center):
    X = grid.coords()
    r2 = 0.0
    for a, x in enumerate(X):
        c = 0.5 * grid.extents[a] if center is None else center
        r2 = r2 + (x - c) ** 2
    return np.exp(-r2 / (2.0 * width**2))


def preset_fields(grid: Grid, spec: InitialSpec):
    """(u0, v0, theta0) for a preset; theta0 = base + non-negative bump."""
    u = grid.zeros_vector()
    v = grid.zeros_vector()
    theta = np.full(grid.shape, spec.base)
    if spec.preset is Preset.GaussianHotSpot:
        theta = theta + spec.amplitude * _gaussian(grid, spec.width, spec.center)
    elif spec.preset is Preset.StandingWave:
        mode = np.ones(grid.shape)
        for L, x in zip(grid.extents, grid.coords()):
            mode = mode * np.sin(math.pi * x / L)
        u[0] = spec.amplitude * mode
    elif spec.preset is Preset.TwoScale:
        X = grid.coords()
        x, L = X[0], grid.extents[0]
        coarse = 0.5 * (1.0 + np.cos(2 * math.pi * x / L))
        fine = 0.5 * (1.0 + np.cos(16 * 2 * math.pi * x / L))
        theta = theta + spec.amplitude * (coarse + 0.1 * fine)
    u[:, grid.boundary_mask] = 0.0
    return u, v, theta


def apply_perturbation(grid: Grid, theta, pert: Perturbation, seed: int):
    """Non-negative temperature perturbation; the seed is used only here."""
    if pert.kind == "none" or pert.epsilon == 0.0:
        return theta
    if pert.kind == "bump":
        return theta + pert.epsilon * _gaussian(grid, pert.width, pert.center)
    rng = np.random.default_rng(seed)
    return theta + pert.epsilon * rng.random(grid.shape)


def build_initial(cfg: RunConfig) -> InitialData:
    from .io import read_state

    grid = cfg.grid.build()
    spec = cfg.initial
    if spec.snapshot is not None:
        u, v, theta, _ = read_state(cfg.resolve(spec.snapshot), grid)
    else:
        u, v, theta = preset_fields(grid, spec)
    theta = apply_perturbation(grid, theta, spec.perturbation, cfg.seed)
    return InitialData(grid, u, v, theta)
