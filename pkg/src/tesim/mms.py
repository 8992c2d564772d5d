"""Method of manufactured solutions for the coupled scheme.

Manufactured fields (k_a = pi / L_a, S = prod sin(k_a x_a), Q = prod cos(k_a x_a))::

    u*     = S(x) sin(t) e_1          (vanishes on the boundary)
    theta* = 2 + Q(x) cos(t)          (zero normal derivative)

The forcings are the exact residuals of both equations, appended on the right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import constitutive as C
from .grid import Grid
from .solver import InitialData, SimState, SolverConfig, coupled_step


@dataclass
class Manufactured:
    grid: Grid
    kind: str = "trig"          # "trig" or "constant"
    theta_const: float = 2.0

    def __post_init__(self):
        g = self.grid
        self.k = [math.pi / L for L in g.extents]
        X = g.coords()
        self.sines = [np.sin(k * x) for k, x in zip(self.k, X)]
        self.cosines = [np.cos(k * x) for k, x in zip(self.k, X)]
        self.S = np.prod(self.sines, axis=0)
        self.Q = np.prod(self.cosines, axis=0)
        self.k2 = sum(k * k for k in self.k)
        self.S[g.boundary_mask] = 0.0

    def _partial(self, factors, derivs, a):
        out = derivs[a]
        for b, f in enumerate(factors):
            if b != a:
                out = out * f
        return out

    def u(self, t):
        out = self.grid.zeros_vector()
        if self.kind == "trig":
            out[0] = self.S * math.sin(t)
        return out

    def v(self, t):
        out = self.grid.zeros_vector()
        if self.kind == "trig":
            out[0] = self.S * math.cos(t)
        return out

    def theta(self, t):
        if self.kind == "trig":
            return 2.0 + self.Q * math.cos(t)
        return np.full(self.grid.shape, self.theta_const)

    def forcing(self, p: C.ConstitutiveParams):
        """Callable t -> (momentum forcing, heat forcing)."""
        g = self.grid
        if self.kind != "trig":
            th = self.theta(0.0)
            heat = p.delta * th**2 - p.delta / th**2

            def const(t):
                return g.zeros_vector(), heat
            return const

        dsin = [k * c for k, c in zip(self.k, self.cosines)]     # d/dx_a sin(k_a x_a)
        dcos = [-k * s for k, s in zip(self.k, self.sines)]      # d/dx_a cos(k_a x_a)
        grad_Q = [self._partial(self.cosines, dcos, a) for a in range(g.dim)]
        dS_dx0 = self._partial(self.sines, dsin, 0)

        def f(t):
            st, ct = math.sin(t), math.cos(t)
            th = 2.0 + self.Q * ct
            th_t = -self.Q * st
            grad_th = [gq * ct for gq in grad_Q]
            lap_th = -self.k2 * self.Q * ct
            mom = g.zeros_vector()
            for a in range(g.dim):
                mom[a] = p.mu * grad_th[a]
            # u_tt - lap u = (-1 + k2) S sin t along e_1
            mom[0] += (self.k2 - 1.0) * self.S * st
            grad_sq = sum(gt * gt for gt in grad_th)
            div_ut = dS_dx0 * ct
            heat = (C.heat_capacity(p, th) * th_t
                    - (C.conductivity_derivative(p, th) * grad_sq + C.conductivity(p, th) * lap_th)
                    + p.mu * th * div_ut + p.delta * th**2 - p.delta / th**2)
            return mom, heat
        return f


@dataclass
class ConvergenceTable:
    study: str
    nodes: list
    dts: list
    err_u: list
    err_theta: list
    orders_u: list = field(default_factory=list)
    orders_theta: list = field(default_factory=list)

    def rows(self):
        for i, (n, dt, eu, et) in enumerate(zip(self.nodes, self.dts, self.err_u, self.err_theta)):
            ou = self.orders_u[i - 1] if i else None
            ot = self.orders_theta[i - 1] if i else None
            yield n, dt, eu, et, ou, ot

    def format(self) -> str:
        lines = [f"# {self.study} convergence",
                 f"{'nodes':>7} {'dt':>11} {'err_u':>11} {'order':>6} {'err_theta':>11} {'order':>6}"]
        for n, dt, eu, et, ou, ot in self.rows():
            o1 = f"{ou:6.2f}" if ou is not None else "     -"
            o2 = f"{ot:6.2f}" if ot is not None else "     -"
            lines.append(f"{n:7d} {dt:11.4e} {eu:11.4e} {o1} {et:11.4e} {o2}")
        return "\n".join(lines)


def _orders(errs):
    return [math.log2(a / b) if a > 0 and b > 0 else float("inf")
            for a, b in zip(errs[:-1], errs[1:])]


def mms_solve(cfg: SolverConfig, grid: Grid, kind: str = "trig"):
    """Run the manufactured problem to cfg.t_end; returns (final state, solution)."""
    m = Manufactured(grid, kind)
    p = cfg.params
    init = InitialData(grid, m.u(0.0), m.v(0.0), m.theta(0.0))
    state = init.state()
    forcing = m.forcing(p)
    steps = cfg.num_steps
    for n in range(1, steps + 1):
        state, _ = coupled_step(state, cfg.dt, cfg, forcing)
        state.t = n * cfg.dt
    return state, m


def mms_error(cfg: SolverConfig, grid: Grid, kind: str = "trig"):
    """Max-norm errors (u, theta) against the manufactured solution at cfg.t_end."""
    state, m = mms_solve(cfg, grid, kind)
    t = state.t
    err_u = float(np.max(np.abs(state.u - m.u(t))))
    err_th = float(np.max(np.abs(state.theta - m.theta(t))))
    return err_u, err_th


def run_mms(cfg: SolverConfig, refinements: int = 3, study: str = "space",
            base_nodes: int = 33, dim: int = 1, t_end: float = 0.5,
            time_nodes: int = 257, kind: str = "trig") -> ConvergenceTable:
    """Observed convergence orders over ``refinements`` dyadic refinements.

    ``space``: nodes (base-1)*2^j + 1 with dt = h^2, so the first-order
    temporal error of the heat step scales like h^2 as well.  Errors are
    measured against the manufactured solution.

    ``time``: fixed grid of ``time_nodes`` nodes with dt = h, h/2, ... (dt <= h
    keeps the explicit wave update stable).  The spatial error does not
    change with dt, so the orders come from successive differences of the
    discrete solutions (Richardson), which needs one extra run; the table
    still lists the errors against the manufactured solution.
    """
    if refinements < 3:
        raise ValueError("need at least three refinements")
    if study not in ("space", "time"):
        raise ValueError(f"unknown study {study!r}")
    nodes, dts, eu, et, finals = [], [], [], [], []
    levels = refinements + 1 if study == "space" else refinements + 2
    for j in range(levels):
        if study == "space":
            n = (base_nodes - 1) * 2**j + 1
            h = 1.0 / (n - 1)
            dt = h * h
        else:
            n = time_nodes
            dt = 1.0 / (time_nodes - 1) / 2**j
        grid = Grid.uniform(n, dim=dim)
        steps = max(1, int(round(t_end / dt)))
        c = replace(cfg, dt=t_end / steps, t_end=t_end)
        state, m = mms_solve(c, grid, kind)
        nodes.append(n)
        dts.append(c.dt)
        eu.append(float(np.max(np.abs(state.u - m.u(state.t)))))
        et.append(float(np.max(np.abs(state.theta - m.theta(state.t)))))
        finals.append(state)
    if study == "space":
        return ConvergenceTable(study, nodes, dts, eu, et, _orders(eu), _orders(et))
    du = [float(np.max(np.abs(a.u - b.u))) for a, b in zip(finals[:-1], finals[1:])]
    dth = [float(np.max(np.abs(a.theta - b.theta))) for a, b in zip(finals[:-1], finals[1:])]
    k = refinements + 1
    return ConvergenceTable(study, nodes[:k], dts[:k], eu[:k], et[:k], _orders(du), _orders(dth))
