"""Discrete balance laws: total energy, entropy, total dissipation.

Time integrals are accumulated with the right-endpoint (backward Euler) rule,
the same one the heat step uses, so the residuals measure how well the scheme
honours the balances rather than bookkeeping mismatch.

energy_residual (delta-regularised energy identity)::

    [thermal + kinetic + elastic + delta int int theta^2](t) - [...](0)
        - delta int int theta^-2

dissipation_residual (energy minus entropy, reference temperature 1)::

    [int (e1 - s1) + kinetic + elastic + dissipation
        + delta int int (theta^2 + theta^-3)](t) - [...](0)
        - delta int int (theta + theta^-2)
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import constitutive as C
from .constitutive import ConstitutiveParams
from .grid import (Grid, dirichlet_energy, divergence, face_entropy_production, gradient,
                   integrate)


@dataclass
class BalanceLedger:
    t: float
    kinetic: float
    elastic: float
    thermal: float
    entropy_total: float
    dissipation_cum: float
    delta_source_sq_cum: float      # delta int int theta^2
    delta_source_inv_cum: float     # delta int int theta^-2
    energy_residual: float
    dissipation_residual: float
    min_theta: float
    max_theta: float
    # accumulators and reference values that are not part of the CSV row
    aux: dict = field(default_factory=dict, repr=False, compare=False)


CSV_COLUMNS = tuple(f.name for f in fields(BalanceLedger) if f.name != "aux")


def row_values(row: BalanceLedger):
    return [getattr(row, c) for c in CSV_COLUMNS]


def ledger(state, history: BalanceLedger | None, dt: float,
           p: ConstitutiveParams) -> BalanceLedger:
    """Ledger row for ``state``; ``history`` is the previous row (None at t=0)."""
    g: Grid = state.grid
    th = state.theta
    kinetic = 0.5 * sum(integrate(g, c * c) for c in state.v)
    elastic = dirichlet_energy(g, state.u)
    thermal = integrate(g, C.internal_energy(p, th))
    s_thermal = integrate(g, C.entropy(p, th))
    entropy_total = s_thermal + p.mu * integrate(g, divergence(g, state.u))
    production = face_entropy_production(g, C.conductivity(p, th), th)
    d = p.delta
    rates = {
        "sq": d * integrate(g, th**2),
        "inv": d * integrate(g, th**-2),
        "lin": d * integrate(g, th),
        "inv3": d * integrate(g, th**-3),
        "diss": production,
    }
    mech = kinetic + elastic
    helm = thermal - s_thermal + mech
    if history is None:
        acc = {k: 0.0 for k in rates}
        aux = {"acc": acc, "energy0": thermal + mech, "helmholtz0": helm}
    else:
        prev = history.aux
        acc = {k: prev["acc"][k] + dt * rates[k] for k in rates}
        aux = {"acc": acc, "energy0": prev["energy0"], "helmholtz0": prev["helmholtz0"]}
    energy_residual = (thermal + mech + acc["sq"]) - aux["energy0"] - acc["inv"]
    dissipation_residual = ((helm + acc["diss"] + acc["sq"] + acc["inv3"])
                            - aux["helmholtz0"] - (acc["lin"] + acc["inv"]))
    return BalanceLedger(
        t=float(state.t), kinetic=kinetic, elastic=elastic, thermal=thermal,
        entropy_total=entropy_total, dissipation_cum=acc["diss"],
        delta_source_sq_cum=acc["sq"], delta_source_inv_cum=acc["inv"],
        energy_residual=energy_residual, dissipation_residual=dissipation_residual,
        min_theta=float(th.min()), max_theta=float(th.max()), aux=aux)


def initial_energy(row: BalanceLedger) -> float:
    return row.aux["energy0"]


def initial_helmholtz(row: BalanceLedger) -> float:
    return row.aux["helmholtz0"]


def entropy_production_field(state, p: ConstitutiveParams) -> np.ndarray:
    """Pointwise kappa(theta) |grad theta|^2 / theta^2 (non-negative)."""
    g = state.grid
    th = state.theta
    grad = gradient(g, th)
    return C.conductivity(p, th) * np.sum(grad * grad, axis=0) / th**2


def min_temperature_bound_series(theta0_min: float, times, a_norms) -> np.ndarray:
    """Maximum-principle lower bound min(theta0) exp(-int_0^t ||a||_inf) at every time.

    ``times`` and ``a_norms`` must include t = 0; the integral is accumulated
    with the trapezoid rule.
    """
    times = np.asarray(times, dtype=float)
    a = np.asarray(a_norms, dtype=float)
    if np.any(a < 0):
        raise ValueError("norms must be non-negative")
    steps = np.diff(times) * 0.5 * (a[1:] + a[:-1])
    integral = np.concatenate([[0.0], np.cumsum(steps)])
    return theta0_min * np.exp(-integral)


def min_temperature_bound(theta0_min: float, times, a_norms) -> float:
    return float(min_temperature_bound_series(theta0_min, times, a_norms)[-1])


def tail_mass(grid: Grid, theta, k: float, s: float) -> float:
    """int |T_k(theta) - theta|^s with the cut-off T_k(x) = min(x, k)."""
    if not k > 0:
        raise ValueError("cut-off level must be positive")
    theta = grid.check_scalar(theta)
    excess = np.maximum(theta - k, 0.0)
    if s == 0:
        return integrate(grid, (excess > 0).astype(float))
    return integrate(grid, excess**s)


@dataclass
class DefectIndicator:
    ratio: float
    total: float


def defect_indicator(grid: Grid, production) -> DefectIndicator:
    """Share of the entropy production carried by the single largest cell.

    Cells are the dual control volumes of the nodes (trapezoid weights), so a
    uniform production gives 1/num_cells and a one-node spike gives 1.
    """
    production = grid.check_scalar(production)
    if np.any(production < 0):
        raise ValueError("production must be non-negative")
    cellwise = grid.weights * production
    total = float(cellwise.sum())
    if total == 0.0:
        return DefectIndicator(0.0, 0.0)
    return DefectIndicator(float(cellwise.max() / total), total)


# -- comparison bracket -----------------------------------------------------------

def _bracket_root(mu: float, delta: float, rate: float) -> tuple[float, float]:
    """Bisection bracket (lo, hi) of the unique positive root of
    delta x^4 + mu rate x^3 - delta.

    Constant temperatures below the root are sub-solutions of the heat
    equation for compression rate ``rate``, those above are super-solutions.
    """
    h = lambda x: delta * x**4 + mu * rate * x**3 - delta
    lo, hi = 0.0, 1.0
    while h(hi) <= 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) <= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo, hi


def comparison_bracket(p: ConstitutiveParams, theta0_min: float, theta0_max: float,
                       rate_min: float, rate_max: float) -> tuple[float, float]:
    """Constant sub/super solutions (lower, upper) for the delta-regularised heat eq.

    lower satisfies mu x rate_max + delta x^2 <= delta x^-2 and lower <= min theta0;
    upper satisfies delta x^2 >= delta x^-2 - mu x rate_min and upper >= max theta0.
    """
    if not p.delta > 0:
        raise ValueError("the comparison bracket needs delta > 0")
    lower = min(theta0_min, _bracket_root(p.mu, p.delta, rate_max)[0])
    upper = max(theta0_max, _bracket_root(p.mu, p.delta, rate_min)[1])
    return lower, upper
