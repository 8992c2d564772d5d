"""Relative entropy functionals and the weak-strong comparison harness."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import constitutive as C
from .constitutive import ConstitutiveParams
from .errors import GridMismatch, ParameterError
from .grid import dirichlet_energy, divergence, integrate


def rel_entropy_density_linear(tau, Theta):
    """e^tau - Theta - Theta (tau - ln Theta) >= 0, zero iff e^tau == Theta."""
    tau = np.asarray(tau, dtype=float)
    Theta = np.asarray(Theta, dtype=float)
    if np.any(Theta <= 0):
        raise C.DomainError("Theta must be positive")
    out = np.exp(tau) - Theta - Theta * (tau - np.log(Theta))
    return float(out) if out.ndim == 0 else out


def rel_entropy_density_nonlinear(p: ConstitutiveParams, theta, Theta):
    """e1(theta) - e1(Theta) - Theta (s1(theta) - s1(Theta))."""
    theta = np.asarray(theta, dtype=float)
    Theta = np.asarray(Theta, dtype=float)
    out = (np.asarray(C.internal_energy(p, theta)) - np.asarray(C.internal_energy(p, Theta))
           - Theta * (np.asarray(C.entropy(p, theta)) - np.asarray(C.entropy(p, Theta))))
    return float(out) if out.ndim == 0 else out


def quadratic_limit_ratio(p: ConstitutiveParams, Theta):
    """lim_{theta -> Theta} |theta - Theta|^2 / E(theta|Theta) = 2 / (e1'' - Theta s1'')."""
    Theta = np.asarray(Theta, dtype=float)
    curv = (np.asarray(C.heat_capacity_derivative(p, Theta))
            - Theta * np.asarray(C.entropy_second_derivative(p, Theta)))
    return 2.0 / curv


@dataclass
class QuadraticControl:
    c_mid: float       # sup |theta - Theta|^2 / E over the bracket
    c_low: float       # sup (1 + |ln theta|) / E for theta <= bracket low
    c_high: float      # sup (1 + e1(theta)) / E for theta >= bracket high
    theta_bracket: tuple
    Theta_range: tuple


def _ratio_grid(p, thetas, Thetas, numerator):
    th, TH = np.meshgrid(thetas, Thetas, indexing="ij")
    E = rel_entropy_density_nonlinear(p, th, TH)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = numerator(th, TH) / E
    return r, th, TH


def quadratic_control(p: ConstitutiveParams, Theta_range, theta_bracket,
                      samples: int = 1001) -> QuadraticControl:
    """Sampled constants for |theta - Theta|^2 <= C E(theta|Theta) and the tail bounds.

    Near the diagonal (relative gap below 1e-4) the quotient is replaced by
    its second-order limit to avoid cancellation in E.  The tail regimes are
    infinite when ``Theta_range`` touches the bracket ends.
    """
    lo, hi = theta_bracket
    T_lo, T_hi = Theta_range
    if not (0 < lo < hi) or not (lo <= T_lo <= T_hi <= hi):
        raise ParameterError([("theta_bracket", "need 0 < lo < hi containing Theta_range")])
    Thetas = np.linspace(T_lo, T_hi, samples) if T_hi > T_lo else np.array([T_lo])
    thetas = np.linspace(lo, hi, samples)

    r, th, TH = _ratio_grid(p, thetas, Thetas, lambda a, b: (a - b) ** 2)
    near = np.abs(th - TH) <= 1e-4 * TH
    limit = np.broadcast_to(quadratic_limit_ratio(p, TH), r.shape)
    r = np.where(near, limit, r)
    c_mid = float(np.max(r))

    low_thetas = np.geomspace(lo * 1e-12, lo, samples)
    r_low, th, TH = _ratio_grid(p, low_thetas, Thetas, lambda a, b: 1.0 + np.abs(np.log(a)))
    high_thetas = np.geomspace(hi, hi * 1e6, samples)
    r_high, th, TH = _ratio_grid(
        p, high_thetas, Thetas, lambda a, b: 1.0 + np.asarray(C.internal_energy(p, a)))
    c_low = float(np.max(np.where(np.isfinite(r_low), r_low, np.inf)))
    c_high = float(np.max(np.where(np.isfinite(r_high), r_high, np.inf)))
    return QuadraticControl(c_mid, c_low, c_high, tuple(theta_bracket), tuple(Theta_range))


# -- weak-strong comparison -----------------------------------------------------------

@dataclass
class RelEntReport:
    times: np.ndarray
    rel_entropy: np.ndarray
    velocity_gap: np.ndarray
    strain_gap: np.ndarray
    fitted_C: float
    reference_C: float          # mu * max ||div U_t||_inf of the reference run
    verdict: bool
    regime: str
    parameters: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.rel_entropy + self.velocity_gap + self.strain_gap

    def summary(self) -> dict:
        return {"fitted_C": self.fitted_C, "reference_C": self.reference_C,
                "verdict": "pass" if self.verdict else "fail", "regime": self.regime,
                "parameters": self.parameters}


def relative_entropy_total(state_a, state_b, p: ConstitutiveParams):
    """(int E, 1/2 int |v_a - v_b|^2, 1/2 int |grad(u_a - u_b)|^2) at one time."""
    g = state_a.grid
    if state_b.grid != g:
        raise GridMismatch("trajectories live on different grids")
    if p.is_linear:
        dens = rel_entropy_density_linear(np.log(state_a.theta), state_b.theta)
    else:
        dens = rel_entropy_density_nonlinear(p, state_a.theta, state_b.theta)
    dv = state_a.v - state_b.v
    vel = 0.5 * sum(integrate(g, c * c) for c in dv)
    strain = dirichlet_energy(g, state_a.u - state_b.u)
    return integrate(g, dens), vel, strain


def fit_gronwall(times, total, floor: float = 1e-14) -> float:
    """Least-squares growth rate C of log(total) over the samples above ``floor``."""
    times = np.asarray(times, dtype=float)
    total = np.asarray(total, dtype=float)
    keep = total > floor
    if keep.sum() < 2:
        return 0.0
    slope, _ = np.polyfit(times[keep], np.log(total[keep]), 1)
    return float(slope)


def proven_regime(p: ConstitutiveParams) -> str:
    if p.is_linear or (p.alpha >= 2 and p.beta == 2):
        return "proven"
    return "outside proven regime"


def weak_strong_compare(run_a, run_b, p: ConstitutiveParams, atol: float = 1e-12,
                        rtol: float = 0.2) -> RelEntReport:
    """Relative entropy of ``run_a`` with respect to the reference ``run_b``.

    Both runs must carry snapshots at the same times on the same grid.  The
    verdict passes when total(t) <= (total(0) + atol) exp(C t) (1 + rtol) at
    every stored time, with C the least-squares fit (clipped at 0).
    """
    sa, sb = run_a.snapshots, run_b.snapshots
    if len(sa) != len(sb):
        raise GridMismatch("trajectories have different numbers of snapshots")
    times = np.array([s.t for s in sa])
    if not np.allclose(times, [s.t for s in sb], rtol=0, atol=1e-12):
        raise GridMismatch("snapshot times differ")
    parts = np.array([relative_entropy_total(a, b, p) for a, b in zip(sa, sb)])
    rel, vel, strain = parts.T
    total = rel + vel + strain
    fitted = fit_gronwall(times, total)
    envelope = (total[0] + atol) * np.exp(max(fitted, 0.0) * times) * (1.0 + rtol)
    verdict = bool(np.all(total <= envelope))
    trace = getattr(run_b, "trace", None)
    if trace:
        ref = max(r.a_norm for r in trace)
    else:
        ref = p.mu * max(float(np.max(np.abs(divergence(s.grid, s.v)))) for s in sb)
    params = {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(p).items()}
    return RelEntReport(times, rel, vel, strain, fitted, float(ref), verdict,
                        proven_regime(p), params)
