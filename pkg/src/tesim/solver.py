"""Time integration of the coupled momentum / heat system.

    u_tt = lap u - mu grad theta                                (u = 0 on the boundary)
    e1(theta)_t - div(kappa grad theta) + mu theta div u_t
        + delta theta^2 - delta theta^-2 = 0                    (d_n theta = 0)

Momentum: velocity Verlet with the temperature source frozen over the step.
Heat: backward Euler, Newton on theta with a halving line search that keeps
the iterate positive.  ``LogTemperature`` integrates the entropy form in
tau = ln theta instead (LinearCV only).

The discrete compression rate fed to the heat equation is the divergence of
the step-averaged velocity (v^n + v^(n+1)) / 2.  Together with the
summation-by-parts divergence this makes the mechanical work and the
thermal source cancel exactly up to the temperature lag of the coupling.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constitutive as C
from .constitutive import ConstitutiveParams
from .errors import (NewtonDivergence, NonFiniteState, NumericalFailure, ParameterError,
                     PicardDivergence, PositivityLoss)
from .grid import (Grid, diffusion_jacobian, divergence, gradient, laplacian_dirichlet,
                   variable_coefficient_diffusion)

MAX_HALVINGS = 60


class Coupling(str, enum.Enum):
    Splitting = "Splitting"
    Picard = "Picard"


class HeatFormulation(str, enum.Enum):
    Temperature = "Temperature"
    LogTemperature = "LogTemperature"


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    coupling: Coupling = Coupling.Splitting
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    newton_tol: float = 1e-10
    newton_max_iters: int = 30
    heat_formulation: HeatFormulation = HeatFormulation.Temperature
    params: ConstitutiveParams = field(default_factory=ConstitutiveParams)

    def __post_init__(self):
        object.__setattr__(self, "coupling", Coupling(self.coupling))
        object.__setattr__(self, "heat_formulation", HeatFormulation(self.heat_formulation))
        problems = self.violations()
        if problems:
            raise ParameterError(problems)

    def violations(self):
        out = []
        if not self.dt > 0:
            out.append(("dt", "dt > 0"))
        if not self.t_end >= 0:
            out.append(("t_end", "t_end >= 0"))
        for name in ("picard_tol", "newton_tol"):
            if not getattr(self, name) > 0:
                out.append((name, f"{name} > 0"))
        for name in ("picard_max_iters", "newton_max_iters"):
            if not getattr(self, name) >= 1:
                out.append((name, f"{name} >= 1"))
        if (self.heat_formulation is HeatFormulation.LogTemperature
                and not self.params.is_linear):
            out.append(("heat_formulation", "LogTemperature requires model LinearCV"))
        return out

    @property
    def num_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class SimState:
    grid: Grid
    t: float
    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray

    @property
    def tau(self):
        return np.log(self.theta)

    def copy(self):
        return SimState(self.grid, self.t, self.u.copy(), self.v.copy(), self.theta.copy())


@dataclass
class InitialData:
    grid: Grid
    u0: np.ndarray
    v0: np.ndarray
    theta0: np.ndarray

    def __post_init__(self):
        g = self.grid
        self.u0 = g.check_vector(self.u0, "u0").copy()
        self.v0 = g.check_vector(self.v0, "v0").copy()
        self.theta0 = g.check_scalar(self.theta0, "theta0").copy()
        problems = []
        if not np.all(np.isfinite(self.theta0)) or self.theta0.min() <= 0:
            problems.append(("theta0", "initial temperature must be finite and > 0"))
        if np.any(self.u0[:, g.boundary_mask] != 0):
            problems.append(("u0", "displacement must vanish on the boundary"))
        if problems:
            raise ParameterError(problems)

    def state(self) -> SimState:
        v = self.v0.copy()
        v[:, self.grid.boundary_mask] = 0.0
        return SimState(self.grid, 0.0, self.u0.copy(), v, self.theta0.copy())


@dataclass
class StepInfo:
    div_vt: np.ndarray
    newton_iters: int = 0
    picard_iters: int = 1


# -- momentum -----------------------------------------------------------------

def momentum_step(state: SimState, theta_source, dt: float, mu: float,
                  forcing: tuple | None = None):
    """Velocity Verlet for u_tt = lap u - mu grad(theta_source) (+ forcing).

    ``forcing`` is an optional pair of vector fields evaluated at t^n and
    t^(n+1).  Boundary values of u and v are forced to zero.
    """
    g = state.grid
    mask = g.boundary_mask
    push = -mu * gradient(g, theta_source)
    f0, f1 = forcing if forcing is not None else (0.0, 0.0)
    v_half = state.v + 0.5 * dt * (laplacian_dirichlet(g, state.u) + push + f0)
    v_half[:, mask] = 0.0
    u = state.u + dt * v_half
    u[:, mask] = 0.0
    v = v_half + 0.5 * dt * (laplacian_dirichlet(g, u) + push + f1)
    v[:, mask] = 0.0
    return u, v


def compression_rate(grid: Grid, v_old, v_new):
    return divergence(grid, 0.5 * (v_old + v_new))


# -- heat -----------------------------------------------------------------------

def _solve(grid: Grid, jac, rhs):
    if grid.dim == 1:
        lower, diag, upper = jac
        ab = np.zeros((3, diag.size))
        ab[0, 1:] = upper
        ab[1] = diag
        ab[2, :-1] = lower
        return sla.solve_banded((1, 1), ab, rhs.ravel(), check_finite=False).reshape(grid.shape)
    return spla.spsolve(jac.tocsc(), rhs.ravel()).reshape(grid.shape)


def _shift_jacobian(grid, jac, scale, diag_add):
    """Return diag(diag_add) + scale * jac in the same storage."""
    if grid.dim == 1:
        lower, diag, upper = jac
        return scale * lower, diag_add + scale * diag, scale * upper
    return sp.diags(diag_add.ravel()) + scale * jac


def _newton(grid, x0, residual, jacobian, tol, max_iters, positive=True):
    x = x0.copy()
    r = residual(x)
    norm = float(np.max(np.abs(r)))
    it = 0
    while norm > tol:
        if it >= max_iters or not np.isfinite(norm):
            raise NewtonDivergence(norm, it)
        dx = _solve(grid, jacobian(x), -r)
        lam = 1.0
        trial = x + dx
        if positive:
            halvings = 0
            while not np.all(trial > 0):
                lam *= 0.5
                halvings += 1
                if halvings > MAX_HALVINGS:
                    raise PositivityLoss("line search could not keep temperature positive")
                trial = x + lam * dx
        x = trial
        r = residual(x)
        norm = float(np.max(np.abs(r)))
        it += 1
    return x, it


def heat_step(state: SimState, div_vt, dt: float, cfg: SolverConfig, source=None):
    """One backward-Euler step of the heat equation in temperature form.

    Returns ``(theta_new, newton_iterations)``.
    """
    p = cfg.params
    g = state.grid
    mu, delta = p.mu, p.delta
    e_old = C.internal_energy(p, state.theta)
    src = 0.0 if source is None else source

    def residual(th):
        k = C.conductivity(p, th)
        rhs = (variable_coefficient_diffusion(g, k, th) - mu * th * div_vt
               - delta * th**2 + delta / th**2 + src)
        return C.internal_energy(p, th) - e_old - dt * rhs

    def jacobian(th):
        jd = diffusion_jacobian(g, C.conductivity(p, th), C.conductivity_derivative(p, th), th)
        d = C.heat_capacity(p, th) + dt * (mu * div_vt + 2 * delta * th + 2 * delta / th**3)
        return _shift_jacobian(g, jd, -dt, d)

    return _newton(g, state.theta, residual, jacobian, cfg.newton_tol, cfg.newton_max_iters)


def _log_flux_terms(grid: Grid, tau):
    """N(tau) = lap(e^tau)/e^tau in flux form and its Jacobian.

    N splits as lap_h(tau) + G(tau) with G a non-negative discretisation of
    |grad tau|^2, G = sum over faces of (e^a - 1 - a)/(h w) >= 0.
    """
    n_val = np.zeros(grid.shape)
    diag = np.zeros(grid.shape)
    off = []
    for a, h in enumerate(grid.spacing):
        d = np.diff(tau, axis=a)
        w = grid.axis_weights(a).reshape((-1,) + (1,) * (grid.dim - 1))
        fwd = np.moveaxis(np.exp(d), a, 0)       # e^(tau_{i+1} - tau_i)
        bwd = np.moveaxis(np.exp(-d), a, 0)      # e^(tau_i - tau_{i+1})
        nv = np.moveaxis(n_val, a, 0)
        dg = np.moveaxis(diag, a, 0)
        nv[:-1] += (fwd - 1.0) / (h * w[:-1])
        nv[1:] += (bwd - 1.0) / (h * w[1:])
        dg[:-1] -= fwd / (h * w[:-1])
        dg[1:] -= bwd / (h * w[1:])
        off.append((a, fwd / (h * w[:-1]), bwd / (h * w[1:])))
    return n_val, diag, off


def _log_jacobian(grid, diag, off, dt, diag_add):
    if grid.dim == 1:
        _, upper, lower = off[0]
        return -dt * lower.ravel(), diag_add - dt * diag, -dt * upper.ravel()
    n = grid.size
    idx = np.arange(n).reshape(grid.shape)
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [(diag_add - dt * diag).ravel()]
    for a, up, lo in off:
        ia = np.moveaxis(idx, a, 0)
        rows += [ia[:-1].ravel(), ia[1:].ravel()]
        cols += [ia[1:].ravel(), ia[:-1].ravel()]
        vals += [(-dt * up).ravel(), (-dt * lo).ravel()]
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def heat_step_log(state: SimState, div_vt, dt: float, cfg: SolverConfig, source=None):
    """Backward-Euler step of the entropy form in tau = ln theta (LinearCV).

        tau' - tau + mu dt div_vt - dt lap tau = dt |grad tau|^2  (+ delta terms)

    Positivity of theta = exp(tau) is automatic.
    """
    p = cfg.params
    if not p.is_linear:
        raise ParameterError([("heat_formulation", "LogTemperature requires model LinearCV")])
    g = state.grid
    mu, delta = p.mu, p.delta
    tau_old = np.log(state.theta)
    src = 0.0 if source is None else source

    def residual(tau):
        n_val, _, _ = _log_flux_terms(g, tau)
        e = np.exp(tau)
        rhs = n_val - mu * div_vt - delta * e + delta * np.exp(-3 * tau) + src / e
        return tau - tau_old - dt * rhs

    def jacobian(tau):
        _, diag, off = _log_flux_terms(g, tau)
        e = np.exp(tau)
        d = 1.0 + dt * (delta * e + 3 * delta * np.exp(-3 * tau) + src / e)
        return _log_jacobian(g, diag, off, dt, d)

    tau, it = _newton(g, tau_old, residual, jacobian, cfg.newton_tol, cfg.newton_max_iters,
                      positive=False)
    return np.exp(tau), it


def _heat(state, div_vt, dt, cfg, source=None):
    if cfg.heat_formulation is HeatFormulation.LogTemperature:
        return heat_step_log(state, div_vt, dt, cfg, source)
    return heat_step(state, div_vt, dt, cfg, source)


# -- coupling -------------------------------------------------------------------

def coupled_step(state: SimState, dt: float, cfg: SolverConfig, forcing=None):
    """Advance one step; returns ``(new_state, StepInfo)``.

    ``forcing`` (manufactured-solution runs only) is a callable
    ``t -> (momentum_vector_field, heat_scalar_field)``.
    """
    mu = cfg.params.mu
    t1 = state.t + dt
    mom_f = heat_f = None
    if forcing is not None:
        fu0, _ = forcing(state.t)
        fu1, heat_f = forcing(t1)
        mom_f = (fu0, fu1)

    u, v = momentum_step(state, state.theta, dt, mu, mom_f)
    div_vt = compression_rate(state.grid, state.v, v)
    theta, newton = _heat(state, div_vt, dt, cfg, heat_f)
    iters = 1
    if cfg.coupling is Coupling.Picard:
        while True:
            u, v = momentum_step(state, 0.5 * (state.theta + theta), dt, mu, mom_f)
            div_vt = compression_rate(state.grid, state.v, v)
            nxt, newton = _heat(state, div_vt, dt, cfg, heat_f)
            iters += 1
            gap = float(np.max(np.abs(nxt - theta)))
            theta = nxt
            if gap < cfg.picard_tol:
                break
            if iters > cfg.picard_max_iters:
                raise PicardDivergence(gap, iters - 1)
    new = SimState(state.grid, t1, u, v, theta)
    return new, StepInfo(div_vt, newton, iters)


# -- driver ---------------------------------------------------------------------

@dataclass
class TraceRow:
    step: int
    t: float
    a_norm: float          # ||mu div u_t||_inf over the step
    div_min: float
    div_max: float
    newton_iters: int
    picard_iters: int


@dataclass
class Trajectory:
    grid: Grid
    cfg: SolverConfig
    ledger: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # SimState copies
    final: SimState | None = None

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])


def run(init: InitialData, cfg: SolverConfig, snapshot_stride: int = 0,
        on_step: Callable | None = None) -> Trajectory:
    """Advance ``init`` to ``cfg.t_end``.

    Ledger rows (see :mod:`tesim.balance`) are produced for every step; a
    snapshot is kept every ``snapshot_stride`` steps (0 keeps none besides
    the initial and final states).  Deterministic for a given input.
    """
    from .balance import ledger as ledger_row

    p = cfg.params
    state = init.state()
    traj = Trajectory(init.grid, cfg)
    row = ledger_row(state, None, cfg.dt, p)
    traj.ledger.append(row)
    traj.snapshots.append(state.copy())
    n_steps = cfg.num_steps
    for n in range(1, n_steps + 1):
        try:
            state, info = coupled_step(state, cfg.dt, cfg)
            # keep the clock exact (no drift from repeated additions)
            state.t = n * cfg.dt
            if not (np.all(np.isfinite(state.theta)) and np.all(np.isfinite(state.u))
                    and np.all(np.isfinite(state.v))):
                raise NonFiniteState("non-finite values in state")
            if state.theta.min() <= 0:
                raise PositivityLoss("temperature lost positivity")
        except NumericalFailure as exc:
            raise exc.at(n, n * cfg.dt)
        row = ledger_row(state, row, cfg.dt, p)
        traj.ledger.append(row)
        traj.trace.append(TraceRow(n, state.t, p.mu * float(np.max(np.abs(info.div_vt))),
                                   float(info.div_vt.min()), float(info.div_vt.max()),
                                   info.newton_iters, info.picard_iters))
        if snapshot_stride and n % snapshot_stride == 0 and n != n_steps:
            traj.snapshots.append(state.copy())
        if on_step is not None:
            on_step(n, state, row)
    if n_steps > 0:
        traj.snapshots.append(state.copy())
    traj.final = state
    return traj
