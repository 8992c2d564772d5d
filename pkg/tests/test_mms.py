import numpy as np
import pytest
import sympy as sp

from tesim.constitutive import ConstitutiveParams, Model
from tesim.grid import Grid
from tesim.mms import Manufactured, mms_error, run_mms
from tesim.solver import SolverConfig


def _sympy_forcing(p, dim):
    """Residuals of both equations for the manufactured fields, derived symbolically."""
    t = sp.Symbol("t")
    xs = sp.symbols(f"x0:{dim}")
    S = sp.prod([sp.sin(sp.pi * x) for x in xs])
    Q = sp.prod([sp.cos(sp.pi * x) for x in xs])
    u = [S * sp.sin(t)] + [0] * (dim - 1)
    th = 2 + Q * sp.cos(t)
    if p.model is Model.PowerLaw:
        e1 = th + th**p.alpha
        kap = 1 + th**p.beta
    else:
        e1, kap = th, 1
    mom = [sp.diff(ui, t, 2) - sum(sp.diff(ui, x, 2) for x in xs) + p.mu * sp.diff(th, x)
           for ui, x in zip(u, xs)]
    div_ut = sum(sp.diff(sp.diff(ui, t), x) for ui, x in zip(u, xs))
    heat = (sp.diff(e1, t) - sum(sp.diff(kap * sp.diff(th, x), x) for x in xs)
            + p.mu * th * div_ut + p.delta * th**2 - p.delta / th**2)
    return [sp.lambdify((t, *xs), m, "numpy") for m in mom], sp.lambdify((t, *xs), heat, "numpy")


@pytest.mark.parametrize("p,dim", [
    (ConstitutiveParams(), 1),
    (ConstitutiveParams(model=Model.PowerLaw, alpha=2, beta=2, delta=1e-2, mu=0.7), 1),
    (ConstitutiveParams(model=Model.PowerLaw, alpha=3, beta=1.5, delta=0.1), 2),
])
def test_forcing_matches_symbolic_derivation(p, dim):
    g = Grid.uniform(9, dim=dim)
    m = Manufactured(g)
    f = m.forcing(p)
    mom_ref, heat_ref = _sympy_forcing(p, dim)
    X = g.coords()
    for t in (0.0, 0.37, 1.2):
        mom, heat = f(t)
        for a in range(dim):
            ref = np.broadcast_to(mom_ref[a](t, *X), g.shape)
            inner = ~g.boundary_mask          # u is pinned on the boundary
            assert np.allclose(mom[a][inner], ref[inner], atol=1e-12)
        assert np.allclose(heat, heat_ref(t, *X), atol=1e-11)


def test_constant_solution_is_reproduced():
    p = ConstitutiveParams(model=Model.PowerLaw, alpha=2, beta=2, delta=0.05)
    eu, et = mms_error(SolverConfig(dt=1e-2, t_end=0.2, params=p), Grid.uniform(17), kind="constant")
    assert eu == 0.0 and et <= 1e-12


def test_space_and_time_orders_small():
    cfg = SolverConfig()
    space = run_mms(cfg, refinements=3, study="space", base_nodes=9, t_end=0.1)
    assert min(space.orders_theta) > 1.8 and min(space.orders_u) > 1.7
    time = run_mms(cfg, refinements=3, study="time", time_nodes=65, t_end=0.25)
    assert min(time.orders_theta) > 0.9 and min(time.orders_u) > 0.9
    assert len(space.nodes) == 4 and len(space.orders_u) == 3
    assert "order" in space.format()


def test_picard_coupling_converges():
    space = run_mms(SolverConfig(coupling="Picard"), refinements=3, study="space",
                    base_nodes=9, t_end=0.1)
    assert min(space.orders_theta) > 1.8


def test_too_few_refinements_rejected():
    with pytest.raises(ValueError):
        run_mms(SolverConfig(), refinements=2)
