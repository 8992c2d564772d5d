"""Shared scenario builders for the test-suite."""
import numpy as np

from tesim.grid import Grid
from tesim.solver import InitialData


def hotspot(grid: Grid, base: float = 1.0, amp: float = 1.0, width: float = 0.1):
    r2 = sum((x - 0.5 * L) ** 2 for x, L in zip(grid.coords(), grid.extents))
    theta = base + amp * np.exp(-r2 / (2 * width**2))
    return InitialData(grid, grid.zeros_vector(), grid.zeros_vector(), theta)


def standing_wave(grid: Grid, amp: float = 0.1, base: float = 1.0):
    mode = np.ones(grid.shape)
    for x, L in zip(grid.coords(), grid.extents):
        mode = mode * np.sin(np.pi * x / L)
    u = grid.zeros_vector()
    u[0] = amp * mode
    u[:, grid.boundary_mask] = 0.0
    return InitialData(grid, u, grid.zeros_vector(), np.full(grid.shape, base))
