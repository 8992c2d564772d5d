"""Constitutive functions for the two thermoelastic material families.

``LinearCV`` is the constant heat capacity / constant conductivity model
(e1 = theta, s1 = ln theta, kappa = 1).  ``PowerLaw`` uses

    c_V(theta)   = 1 + alpha * theta**(alpha - 1)
    kappa(theta) = 1 + theta**beta

so that e1 = theta + theta**alpha and s1 = ln theta + alpha/(alpha-1) theta**(alpha-1).

The mechanical part of the energy and entropy is fixed: e2(F) = |F|^2 / 2 and
s2(F) = mu * tr(F).  Those are evaluated by the balance diagnostics, the
stability check below only needs their closed form.

All evaluators accept scalars or numpy arrays.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, ParameterError


class Model(str, enum.Enum):
    LinearCV = "LinearCV"
    PowerLaw = "PowerLaw"


DEFAULT_PANELS = 2**10


@dataclass(frozen=True)
class ConstitutiveParams:
    model: Model = Model.LinearCV
    mu: float = 1.0
    alpha: float = 2.0
    beta: float = 0.0
    delta: float = 0.0
    omega: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        problems = self.violations()
        if problems:
            raise ParameterError(problems)

    def violations(self) -> list[tuple[str, str]]:
        """(field, rule) pairs for every violated invariant."""
        out = []
        if not (self.mu > 0):
            out.append(("mu", "mu > 0"))
        if self.model is Model.PowerLaw:
            if not (self.alpha > 1):
                out.append(("alpha", "alpha > 1 (heat capacity must grow)"))
            if not (self.beta > 0):
                out.append(("beta", "beta > 0 (conductivity must grow)"))
        if not (self.delta >= 0):
            out.append(("delta", "delta >= 0"))
        if not (self.omega > 0):
            out.append(("omega", "omega > 0"))
        return out

    @property
    def is_linear(self) -> bool:
        return self.model is Model.LinearCV


def _positive(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise DomainError("temperature must be strictly positive")
    return theta


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def internal_energy(p: ConstitutiveParams, theta):
    theta = _positive(theta)
    if p.is_linear:
        return _out(theta * 1.0)
    return _out(theta + theta**p.alpha)


def entropy(p: ConstitutiveParams, theta):
    theta = _positive(theta)
    if p.is_linear:
        return _out(np.log(theta))
    a = p.alpha
    return _out(np.log(theta) + a / (a - 1.0) * theta ** (a - 1.0))


def heat_capacity(p: ConstitutiveParams, theta):
    theta = _positive(theta)
    if p.is_linear:
        return _out(np.ones_like(theta))
    a = p.alpha
    return _out(1.0 + a * theta ** (a - 1.0))


def entropy_derivative(p: ConstitutiveParams, theta):
    """d s1 / d theta, which by the Gibbs relation equals c_V / theta."""
    theta = _positive(theta)
    if p.is_linear:
        return _out(1.0 / theta)
    a = p.alpha
    return _out(1.0 / theta + a * theta ** (a - 2.0))


def heat_capacity_derivative(p: ConstitutiveParams, theta):
    theta = _positive(theta)
    if p.is_linear:
        return _out(np.zeros_like(theta))
    a = p.alpha
    return _out(a * (a - 1.0) * theta ** (a - 2.0))


def entropy_second_derivative(p: ConstitutiveParams, theta):
    theta = _positive(theta)
    if p.is_linear:
        return _out(-1.0 / theta**2)
    a = p.alpha
    return _out(-1.0 / theta**2 + a * (a - 2.0) * theta ** (a - 3.0))


def conductivity(p: ConstitutiveParams, theta):
    theta = _positive(theta)
    if p.is_linear:
        return _out(np.ones_like(theta))
    return _out(1.0 + theta**p.beta)


def conductivity_derivative(p: ConstitutiveParams, theta):
    theta = _positive(theta)
    if p.is_linear:
        return _out(np.zeros_like(theta))
    b = p.beta
    return _out(b * theta ** (b - 1.0))


def conductivity_primitive(p: ConstitutiveParams, theta):
    """K(theta) = int_0^theta kappa(s) ds."""
    theta = _positive(theta)
    if p.is_linear:
        return _out(theta * 1.0)
    b = p.beta
    return _out(theta + theta ** (b + 1.0) / (b + 1.0))


def helmholtz(p: ConstitutiveParams, theta, theta_bar):
    """Thermal part of the Helmholtz function e1 - theta_bar * s1."""
    _positive(theta_bar)
    return _out(np.asarray(internal_energy(p, theta)) - theta_bar * np.asarray(entropy(p, theta)))


# -- mollified variants -------------------------------------------------------

def mollifier(omega: float, x):
    """f_omega(x) = sqrt(x^2 + w^2) / (1 + w sqrt(x^2 + w^2)).

    Smooth, even, bounded in [w / (1 + w^2), 1 / w) with slope in (-1, 1).
    """
    x = np.asarray(x, dtype=float)
    r = np.hypot(x, omega)
    return _out(r / (1.0 + omega * r))


def smooth_power(omega: float, x, s: float):
    """Regularisation of |x|**s used inside the mollified integrands."""
    x = np.asarray(x, dtype=float)
    return (x * x + omega * omega) ** (0.5 * s)


def _mollified_integral(integrand: Callable, theta, panels: int):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise DomainError("mollified primitives need theta >= 0")
    if panels % 2:
        panels += 1

    def one(t):
        if t == 0.0:
            return 0.0
        x = np.linspace(0.0, t, panels + 1)
        return float(simpson(integrand(x), x=x))

    if theta.ndim == 0:
        return one(float(theta))
    return np.array([one(float(t)) for t in theta.ravel()]).reshape(theta.shape)


def mollified_energy(p: ConstitutiveParams, theta, panels: int = DEFAULT_PANELS):
    """e_omega(theta) = int_0^theta [1 + alpha <x>_w^(alpha-1)]_w dx."""
    w = p.omega
    if p.is_linear:
        integrand = lambda x: mollifier(w, np.ones_like(x))
    else:
        a = p.alpha
        integrand = lambda x: mollifier(w, 1.0 + a * smooth_power(w, x, a - 1.0))
    return _mollified_integral(integrand, theta, panels)


def mollified_primitive(p: ConstitutiveParams, theta, panels: int = DEFAULT_PANELS):
    """K_omega(theta) = int_0^theta [1 + <x>_w^beta]_w dx."""
    w = p.omega
    if p.is_linear:
        integrand = lambda x: mollifier(w, np.ones_like(x))
    else:
        b = p.beta
        integrand = lambda x: mollifier(w, 1.0 + smooth_power(w, x, b))
    return _mollified_integral(integrand, theta, panels)


# -- certification ------------------------------------------------------------

@dataclass
class GibbsReport:
    passed: bool
    max_violation: float
    thetas: np.ndarray = field(repr=False)
    violations: np.ndarray = field(repr=False)


def _central_difference(fn, theta, rel_step=1e-5):
    h = rel_step * theta
    return (np.asarray(fn(theta + h)) - np.asarray(fn(theta - h))) / (2.0 * h)


def check_gibbs(p: ConstitutiveParams, theta_range=(0.5, 2.0), tol: float = 1e-6,
                samples: int = 101, entropy_fn: Callable | None = None,
                energy_fn: Callable | None = None) -> GibbsReport:
    """Check theta * s1'(theta) == e1'(theta) on a sample of ``theta_range``.

    The analytic derivatives are used for the built-in laws and cross-checked
    against central differences; a custom ``entropy_fn``/``energy_fn`` (for
    negative controls) is differentiated numerically only.
    """
    lo, hi = theta_range
    if not (0 < lo < hi):
        raise ParameterError([("theta_range", "0 < lo < hi")])
    thetas = np.geomspace(lo, hi, samples)
    s_fn = entropy_fn or (lambda t: entropy(p, t))
    e_fn = energy_fn or (lambda t: internal_energy(p, t))
    ds = _central_difference(s_fn, thetas)
    de = _central_difference(e_fn, thetas)
    violations = np.abs(thetas * ds - de)
    if entropy_fn is None and energy_fn is None:
        exact = np.abs(thetas * entropy_derivative(p, thetas) - heat_capacity(p, thetas))
        # analytic derivatives must agree with their finite-difference shadows
        fd_gap = np.maximum(np.abs(ds - entropy_derivative(p, thetas)),
                            np.abs(de - heat_capacity(p, thetas)))
        if fd_gap.max() > tol * max(1.0, float(np.abs(de).max())):
            violations = np.maximum(violations, fd_gap)
        else:
            violations = exact
    worst = float(violations.max())
    return GibbsReport(worst <= tol, worst, thetas, violations)


@dataclass
class StabilityReport:
    passed: bool
    energy_positive: bool
    heat_capacity_positive: bool
    entropy_diverges: bool
    mechanical_bound: bool
    c1: float
    c2: float
    dim: int
    notes: list[str] = field(default_factory=list)


def check_stability(p: ConstitutiveParams, dim: int = 3, c1: float = 1.0) -> StabilityReport:
    """Thermodynamic stability of the constitutive laws.

    e1 > 0 and e1' > 0 are sampled on a log grid; s1 -> -inf at 0+ is
    certified by strictly decreasing values over 12 decades that drop below
    s1(1) by more than 12 (ln 10^-12 ~ -27.6).  The mechanical bound
    |F|^2/2 - c1 mu tr F >= c2 holds with c2 = -c1^2 mu^2 dim / 2 (completing
    the square at F = c1 mu I).
    """
    thetas = np.geomspace(1e-6, 1e6, 241)
    e_pos = bool(np.all(np.asarray(internal_energy(p, thetas)) > 0))
    cv_pos = bool(np.all(np.asarray(heat_capacity(p, thetas)) > 0))
    probes = 10.0 ** -np.arange(1, 13)
    s = np.asarray(entropy(p, probes))
    diverges = bool(np.all(np.diff(s) < 0) and s[-1] < entropy(p, 1.0) - 12.0)
    c2 = -0.5 * c1**2 * p.mu**2 * dim
    # the minimiser itself must attain the bound
    f_star = c1 * p.mu * np.eye(dim)
    at_min = 0.5 * np.sum(f_star**2) - c1 * p.mu * np.trace(f_star)
    mech = bool(math.isclose(at_min, c2, rel_tol=1e-12, abs_tol=1e-12) and c1 > 0)
    notes = []
    if not diverges:
        notes.append("entropy does not diverge at 0+")
    ok = e_pos and cv_pos and diverges and mech
    return StabilityReport(ok, e_pos, cv_pos, diverges, mech, c1, c2, dim, notes)


def helmholtz_argmin(p: ConstitutiveParams, theta_bar: float, points: int = 10_000,
                     span: float = 1e3) -> tuple[float, float]:
    """Minimiser of theta -> helmholtz(p, theta, theta_bar) on a log grid.

    Returns ``(argmin, log_cell)`` where ``log_cell`` is the grid ratio, so
    the minimiser is within one cell of ``theta_bar`` iff
    ``|ln(argmin / theta_bar)| <= ln(log_cell)``.
    """
    grid = np.geomspace(theta_bar / span, theta_bar * span, points)
    values = np.asarray(helmholtz(p, grid, theta_bar))
    return float(grid[int(np.argmin(values))]), float(grid[1] / grid[0])
