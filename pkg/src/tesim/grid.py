"""Uniform tensor grids on rectangles and the finite-difference operators.

Fields are plain numpy arrays.  A scalar field has shape ``grid.shape``
(axis 0 is x, axis 1 is y); a vector field has shape ``(dim, *grid.shape)``.
Flattening in C order gives the row-major node order used on disk.

Quadrature is the tensor trapezoid rule.  The stencils are matched to it:

* ``divergence`` uses the summation-by-parts closure at the boundary, so that
  ``integrate(f * divergence(g)) == -integrate(gradient(f) . g)`` whenever g
  vanishes on the boundary (the discrete energy exchange between the momentum
  and heat equations cancels exactly);
* the Neumann operators are written in flux form with mirror ghost nodes,
  which makes them symmetric in the trapezoid inner product and conservative.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch, ParameterError


@dataclass(frozen=True)
class Grid:
    dim: int
    extents: tuple[float, ...]
    nodes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        problems = []
        if self.dim not in (1, 2):
            problems.append(("dim", "1 or 2"))
        if len(self.extents) != self.dim:
            problems.append(("extents", f"need {self.dim} entries"))
        if len(self.nodes) != self.dim:
            problems.append(("nodes", f"need {self.dim} entries"))
        if any(not e > 0 for e in self.extents):
            problems.append(("extents", "lengths must be positive"))
        if any(n < 3 for n in self.nodes):
            problems.append(("nodes", "at least 3 nodes per axis"))
        if problems:
            raise ParameterError(problems)

    @classmethod
    def uniform(cls, nodes, extent=1.0, dim=1):
        return cls(dim, (extent,) * dim, (nodes,) * dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / (n - 1) for e, n in zip(self.extents, self.nodes))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    @property
    def num_cells(self) -> int:
        return int(np.prod([n - 1 for n in self.nodes]))

    def axis_coords(self, axis: int) -> np.ndarray:
        return np.linspace(0.0, self.extents[axis], self.nodes[axis])

    def coords(self) -> list[np.ndarray]:
        """Node coordinates as a list of arrays of shape ``self.shape``."""
        return np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)], indexing="ij")

    def axis_weights(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        w = np.full(self.nodes[axis], h)
        w[0] = w[-1] = 0.5 * h
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.axis_weights(0)
        for a in range(1, self.dim):
            w = np.multiply.outer(w, self.axis_weights(a))
        return w

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for a in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[a] = 0
            mask[tuple(idx)] = True
            idx[a] = -1
            mask[tuple(idx)] = True
        return mask

    def check_scalar(self, f, name="field"):
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridMismatch(f"{name}: expected shape {self.shape}, got {f.shape}")
        return f

    def check_vector(self, g, name="field"):
        g = np.asarray(g, dtype=float)
        if g.shape != (self.dim, *self.shape):
            raise GridMismatch(f"{name}: expected shape {(self.dim, *self.shape)}, got {g.shape}")
        return g

    def zeros_vector(self):
        return np.zeros((self.dim, *self.shape))


# -- helpers -----------------------------------------------------------------

def _bcast(w, axis, ndim):
    shape = [1] * ndim
    shape[axis] = w.size
    return w.reshape(shape)


def _cross_weight(grid: Grid, axis: int) -> np.ndarray | float:
    """Trapezoid weights of the axes other than ``axis``, broadcastable to faces."""
    out = 1.0
    for a in range(grid.dim):
        if a != axis:
            out = out * _bcast(grid.axis_weights(a), a, grid.dim)
    return out


# -- operators ---------------------------------------------------------------

def gradient(grid: Grid, f) -> np.ndarray:
    """Central differences inside, second-order one-sided at the boundary."""
    f = grid.check_scalar(f)
    return np.stack([np.gradient(f, grid.spacing[a], axis=a, edge_order=2)
                     for a in range(grid.dim)])


def _sbp_derivative(g, h, axis):
    out = np.empty_like(g)
    g = np.moveaxis(g, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[1:-1] = (g[2:] - g[:-2]) / (2.0 * h)
    o[0] = (g[1] - g[0]) / h
    o[-1] = (g[-1] - g[-2]) / h
    return out


def divergence(grid: Grid, g) -> np.ndarray:
    """Divergence with the summation-by-parts boundary closure."""
    g = grid.check_vector(g)
    return sum(_sbp_derivative(g[a], grid.spacing[a], a) for a in range(grid.dim))


def laplacian_dirichlet(grid: Grid, f) -> np.ndarray:
    """Standard 3/5-point Laplacian; boundary rows are zero (u = 0 there).

    Accepts scalar or vector fields (applied per component).
    """
    f = np.asarray(f, dtype=float)
    if f.shape == (grid.dim, *grid.shape):
        return np.stack([laplacian_dirichlet(grid, c) for c in f])
    f = grid.check_scalar(f)
    out = np.zeros_like(f)
    inner = tuple(slice(1, -1) for _ in range(grid.dim))
    for a, h in enumerate(grid.spacing):
        fa = np.moveaxis(f, a, 0)
        d2 = np.zeros_like(fa)
        d2[1:-1] = (fa[2:] - 2.0 * fa[1:-1] + fa[:-2]) / h**2
        out[inner] += np.moveaxis(d2, 0, a)[inner]
    return out


def face_values(kappa, axis):
    """Arithmetic mean of neighbouring node values along ``axis``."""
    k = np.moveaxis(kappa, axis, 0)
    return np.moveaxis(0.5 * (k[1:] + k[:-1]), 0, axis)


def variable_coefficient_diffusion(grid: Grid, kappa, theta) -> np.ndarray:
    """Flux-form div(kappa grad theta) with homogeneous Neumann data."""
    kappa = grid.check_scalar(kappa, "kappa")
    theta = grid.check_scalar(theta, "theta")
    out = np.zeros_like(theta)
    for a, h in enumerate(grid.spacing):
        flux = face_values(kappa, a) * np.diff(theta, axis=a) / h
        flux = np.moveaxis(flux, a, 0)
        acc = np.zeros((grid.nodes[a], *flux.shape[1:]))
        acc[:-1] += flux
        acc[1:] -= flux
        w = grid.axis_weights(a).reshape((-1,) + (1,) * (grid.dim - 1))
        out += np.moveaxis(acc / w, 0, a)
    return out


def laplacian_neumann(grid: Grid, f) -> np.ndarray:
    f = grid.check_scalar(f)
    return variable_coefficient_diffusion(grid, np.ones_like(f), f)


def integrate(grid: Grid, f) -> float:
    f = grid.check_scalar(f)
    return float(np.sum(grid.weights * f))


def dirichlet_energy(grid: Grid, u) -> float:
    """Half the squared discrete H1 seminorm, sum over faces and components.

    This is the energy whose trapezoid gradient is ``-laplacian_dirichlet``.
    """
    u = np.asarray(u, dtype=float)
    comps = u if u.shape == (grid.dim, *grid.shape) else [grid.check_scalar(u)]
    total = 0.0
    for c in comps:
        for a, h in enumerate(grid.spacing):
            d = np.diff(c, axis=a) / h
            total += float(np.sum(h * _cross_weight(grid, a) * d * d))
    return 0.5 * total


def face_entropy_production(grid: Grid, kappa, theta) -> float:
    """Sum over faces of w_f kappa_f ((theta_j - theta_i)/h)^2 / (theta_i theta_j).

    Equals ``integrate(variable_coefficient_diffusion(kappa, theta) / theta)``
    exactly, i.e. the discrete counterpart of int kappa |grad theta|^2 / theta^2.
    """
    total = 0.0
    for a, h in enumerate(grid.spacing):
        d = np.diff(theta, axis=a) / h
        t = np.moveaxis(theta, a, 0)
        prod = np.moveaxis(t[1:] * t[:-1], 0, a)
        total += float(np.sum(h * _cross_weight(grid, a) * face_values(kappa, a) * d * d / prod))
    return total


# -- Jacobians ------------------------------------------------------------------

def diffusion_jacobian(grid: Grid, kappa, dkappa, theta):
    """Jacobian of ``variable_coefficient_diffusion(kappa(theta), theta)``.

    Returns ``(lower, diag, upper)`` arrays for 1D grids (the matrix is
    tridiagonal), a CSR matrix otherwise.
    """
    n = grid.size
    idx = np.arange(n).reshape(grid.shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(grid.shape)
    for a, h in enumerate(grid.spacing):
        kf = face_values(kappa, a)
        g = np.diff(theta, axis=a) / h
        t = lambda arr: np.moveaxis(arr, a, 0)
        dk = t(dkappa)
        # dF/dtheta_left, dF/dtheta_right for the flux on every face
        d_left = t(0.5 * g) * dk[:-1] - t(kf) / h
        d_right = t(0.5 * g) * dk[1:] + t(kf) / h
        w = grid.axis_weights(a).reshape((-1,) + (1,) * (grid.dim - 1))
        dg = t(diag)
        # node i gets +F_{i+1/2}/w_i and -F_{i-1/2}/w_i
        dg[:-1] += d_left / w[:-1]
        dg[1:] -= d_right / w[1:]
        ia = t(idx)
        rows += [ia[:-1].ravel(), ia[1:].ravel()]
        cols += [ia[1:].ravel(), ia[:-1].ravel()]
        vals += [(d_right / w[:-1]).ravel(), (-d_left / w[1:]).ravel()]
    if grid.dim == 1:
        upper = vals[0]
        lower = vals[1]
        return lower, diag, upper
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))
