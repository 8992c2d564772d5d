import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tesim.config import (ConfigParseError, Preset, RunConfig, build_initial, parse_config,
                          preset_fields)
from tesim.constitutive import Model
from tesim.errors import GridMismatch, ParameterError
from tesim.grid import Grid
from tesim.io import (SnapshotFormatError, read_ledger_csv, read_snapshot, read_state,
                      write_fields, write_ledger_csv, write_snapshot, write_state)
from tesim.solver import Coupling, SolverConfig, run

from helpers import hotspot


# -- configuration ----------------------------------------------------------------

def test_minimal_document_gives_defaults():
    cfg = parse_config("{}")
    assert cfg.solver == SolverConfig()
    assert cfg.grid.nodes == (129,) and cfg.grid.extent == (1.0,)
    assert cfg.initial.preset is Preset.GaussianHotSpot
    assert cfg.output.ledger_stride == 1 and cfg.output.snapshot_stride == 0
    assert cfg.seed == 0


def test_full_document():
    doc = {"dt": 5e-4, "t_end": 0.5, "coupling": "Picard",
           "params": {"model": "PowerLaw", "alpha": 3, "beta": 2, "delta": 0.01},
           "grid": {"dim": 2, "nodes": [17, 33], "extent": [1.0, 2.0]},
           "initial": {"preset": "TwoScale", "base": 0.5, "amplitude": 0.2,
                       "perturbation": {"kind": "noise", "epsilon": 1e-3}},
           "output": {"snapshot_stride": 10, "ledger_stride": 5}, "seed": 7}
    cfg = parse_config(json.dumps(doc))
    assert cfg.solver.coupling is Coupling.Picard
    assert cfg.params.model is Model.PowerLaw and cfg.params.alpha == 3.0
    assert cfg.grid.build() == Grid(2, (1.0, 2.0), (17, 33))
    assert cfg.initial.perturbation.kind == "noise" and cfg.seed == 7


def test_alpha_below_one_names_field():
    with pytest.raises(ParameterError) as exc:
        parse_config('{"params": {"model": "PowerLaw", "alpha": 0.5, "beta": 2}}')
    paths = dict(exc.value.problems)
    assert "params.alpha" in paths and "alpha > 1" in paths["params.alpha"]
    # also when the model is left at its default
    with pytest.raises(ParameterError) as exc:
        parse_config('{"params": {"alpha": 0.5}}')
    assert "params.alpha" in dict(exc.value.problems)


def test_duplicate_key_is_parse_error():
    with pytest.raises(ConfigParseError):
        parse_config('{"dt": 1e-3, "dt": 2e-3}')
    with pytest.raises(ConfigParseError):
        parse_config('{"params": {"mu": 1, "mu": 2}}')


def test_malformed_json_is_parse_error():
    with pytest.raises(ConfigParseError):
        parse_config('{"dt": }')
    with pytest.raises(ConfigParseError):
        parse_config('{"dt": NaN}')


def test_all_violations_listed():
    doc = {"dt": -1, "bogus": 1, "params": {"mu": 0, "extra": 2},
           "grid": {"nodes": 2}, "initial": {"base": 0, "preset": "Nope"},
           "output": {"ledger_stride": 0}, "heat_formulation": "LogTemperature"}
    with pytest.raises(ParameterError) as exc:
        parse_config(json.dumps(doc))
    paths = {p for p, _ in exc.value.problems}
    assert {"dt", "bogus", "params.mu", "params.extra", "grid.nodes", "initial.base",
            "initial.preset", "output.ledger_stride"} <= paths


def test_log_formulation_with_power_law_rejected():
    with pytest.raises(ParameterError) as exc:
        parse_config('{"heat_formulation": "LogTemperature", '
                     '"params": {"model": "PowerLaw", "alpha": 2, "beta": 2}}')
    assert "heat_formulation" in dict(exc.value.problems)


def test_to_dict_round_trips():
    cfg = parse_config('{"params": {"model": "PowerLaw", "alpha": 2, "beta": 2}, '
                       '"grid": {"nodes": 33}, "output": {"snapshot_stride": 3}}')
    again = parse_config(json.dumps(cfg.to_dict()))
    assert again.solver == cfg.solver and again.grid == cfg.grid
    assert again.initial == cfg.initial and again.output == cfg.output


# -- presets -------------------------------------------------------------------------

@pytest.mark.parametrize("preset", list(Preset))
@pytest.mark.parametrize("dim", [1, 2])
def test_presets_are_valid_initial_data(preset, dim):
    cfg = parse_config(json.dumps({"grid": {"dim": dim, "nodes": 17},
                                   "initial": {"preset": preset.value, "base": 0.1}}))
    init = build_initial(cfg)
    assert init.theta0.min() >= 0.1
    assert not init.u0[:, init.grid.boundary_mask].any()


def test_equilibrium_preset_is_constant():
    cfg = parse_config('{"initial": {"preset": "Equilibrium", "base": 2.0}, "grid": {"nodes": 9}}')
    u, v, th = preset_fields(cfg.grid.build(), cfg.initial)
    assert not u.any() and not v.any() and np.all(th == 2.0)


def test_seed_only_affects_noise():
    doc = {"grid": {"nodes": 17}, "initial": {"perturbation": {"kind": "noise", "epsilon": 0.1}}}
    a = build_initial(parse_config(json.dumps({**doc, "seed": 1})))
    b = build_initial(parse_config(json.dumps({**doc, "seed": 1})))
    c = build_initial(parse_config(json.dumps({**doc, "seed": 2})))
    assert np.array_equal(a.theta0, b.theta0) and not np.array_equal(a.theta0, c.theta0)
    base = build_initial(parse_config('{"grid": {"nodes": 17}, "seed": 5}'))
    base2 = build_initial(parse_config('{"grid": {"nodes": 17}, "seed": 6}'))
    assert np.array_equal(base.theta0, base2.theta0)


# -- snapshots ------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 9), st.integers(3, 9)),
              elements=st.floats(allow_nan=True, allow_infinity=True, width=64)),
       st.floats(0, 1e6, allow_nan=False))
def test_snapshot_round_trip_bit_exact(tmp_path_factory, data, time):
    path = tmp_path_factory.mktemp("snap") / "f.tesim"
    write_snapshot(path, data, time)
    snap = read_snapshot(path)
    assert snap.nodes == data.shape and snap.components == 1 and snap.time == time
    assert snap.data[0].tobytes() == data.tobytes()


def test_snapshot_layout(tmp_path):
    data = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])     # two components on 3 nodes
    path = write_fields(tmp_path / "f.tesim", data, 0.25)
    raw = path.read_bytes()
    header, body = raw.split(b"\n", 1)
    assert header == b"TESIM1 1 3 2 0.25"
    # node-major, little-endian float64
    assert struct.unpack("<6d", body) == (1.0, 4.0, 2.0, 5.0, 3.0, 6.0)


def test_state_round_trip(tmp_path):
    g = Grid.uniform(9, dim=2)
    tr = run(hotspot(g), SolverConfig(dt=1e-2, t_end=0.03))
    s = tr.final
    write_state(tmp_path / "s.tesim", s)
    u, v, th, t = read_state(tmp_path / "s.tesim", g)
    assert u.tobytes() == s.u.tobytes() and v.tobytes() == s.v.tobytes()
    assert th.tobytes() == s.theta.tobytes() and t == s.t
    with pytest.raises(GridMismatch):
        read_state(tmp_path / "s.tesim", Grid.uniform(9))


def test_corrupt_snapshots_rejected(tmp_path):
    p = tmp_path / "bad.tesim"
    p.write_bytes(b"NOTIT 1 3 1 0\n" + b"\0" * 24)
    with pytest.raises(SnapshotFormatError):
        read_snapshot(p)
    p.write_bytes(b"TESIM1 1 3 1 0\n" + b"\0" * 16)
    with pytest.raises(SnapshotFormatError):
        read_snapshot(p)


# -- CSV ------------------------------------------------------------------------------

GOLDEN_HEADER = ("t,kinetic,elastic,thermal,entropy_total,dissipation_cum,delta_source_sq_cum,"
                 "delta_source_inv_cum,energy_residual,dissipation_residual,min_theta,max_theta")


def test_ledger_csv_golden_header_and_stride(tmp_path):
    g = Grid.uniform(17)
    tr = run(hotspot(g), SolverConfig(dt=1e-2, t_end=0.1))
    path = write_ledger_csv(tmp_path / "ledger.csv", tr.ledger, stride=3)
    assert path.read_text().splitlines()[0] == GOLDEN_HEADER
    header, rows = read_ledger_csv(path)
    assert list(rows[:, 0]) == pytest.approx([0.0, 0.03, 0.06, 0.09, 0.1])
    # values survive the text round trip exactly
    assert rows[-1, 8] == tr.ledger[-1].energy_residual
