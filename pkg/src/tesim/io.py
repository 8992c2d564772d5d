"""File formats: TESIM1 field snapshots, ledger/trace CSV, JSON summaries.

TESIM1 layout: one ASCII header line::

    TESIM1 <dim> <n_0> [<n_1>] <components> <time>\\n

followed by little-endian float64 values in row-major node order, with the
components of a node stored next to each other.  The time is written with
``repr`` so it survives the round trip exactly.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .balance import CSV_COLUMNS, row_values
from .errors import GridMismatch, TesimError

MAGIC = "TESIM1"
_DTYPE = np.dtype("<f8")


class SnapshotFormatError(TesimError, ValueError):
    pass


@dataclass
class Snapshot:
    dim: int
    nodes: tuple
    time: float
    data: np.ndarray        # shape (components, *nodes)

    @property
    def components(self) -> int:
        return self.data.shape[0]


def write_snapshot(path, data, time: float) -> Path:
    """Write a single scalar field (one component); see ``write_fields``."""
    return _write(Path(path), np.asarray(data, dtype=float), time)


def _write(path: Path, data: np.ndarray, time: float, components: int | None = None) -> Path:
    if components is None:
        # a bare scalar field has one component
        data = data[None]
    nodes = data.shape[1:]
    header = " ".join([MAGIC, str(len(nodes)), *map(str, nodes), str(data.shape[0]),
                       repr(float(time))]) + "\n"
    body = np.moveaxis(data, 0, -1).astype(_DTYPE, copy=False)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(body).tobytes())
    return path


def write_fields(path, fields, time: float) -> Path:
    """Write several fields as components; ``fields`` is (components, *nodes)."""
    data = np.asarray(fields, dtype=float)
    return _write(Path(path), data, time, components=data.shape[0])


def read_snapshot(path) -> Snapshot:
    raw = Path(path).read_bytes()
    end = raw.find(b"\n")
    if end < 0:
        raise SnapshotFormatError(f"{path}: missing header")
    parts = raw[:end].decode("ascii", errors="replace").split()
    if not parts or parts[0] != MAGIC:
        raise SnapshotFormatError(f"{path}: not a {MAGIC} file")
    try:
        dim = int(parts[1])
        if dim not in (1, 2) or len(parts) != 4 + dim:
            raise ValueError
        nodes = tuple(int(n) for n in parts[2:2 + dim])
        comps = int(parts[2 + dim])
        time = float(parts[3 + dim])
    except (ValueError, IndexError):
        raise SnapshotFormatError(f"{path}: malformed header {raw[:end]!r}") from None
    body = np.frombuffer(raw, dtype=_DTYPE, offset=end + 1)
    expected = int(np.prod(nodes)) * comps
    if body.size != expected:
        raise SnapshotFormatError(f"{path}: expected {expected} values, found {body.size}")
    data = np.moveaxis(body.reshape(*nodes, comps), -1, 0).astype(float)
    return Snapshot(dim, nodes, time, data)


def write_state(path, state) -> Path:
    """u components, then v components, then theta."""
    fields = np.concatenate([state.u, state.v, state.theta[None]])
    return write_fields(path, fields, state.t)


def read_state(path, grid):
    """Returns (u, v, theta, t) checked against ``grid``."""
    snap = read_snapshot(path)
    if snap.nodes != grid.shape or snap.components != 2 * grid.dim + 1:
        raise GridMismatch(f"{path}: snapshot does not match grid {grid.shape}")
    d = grid.dim
    return snap.data[:d].copy(), snap.data[d:2 * d].copy(), snap.data[2 * d].copy(), snap.time


# -- CSV / JSON -----------------------------------------------------------------

def write_ledger_csv(path, rows, stride: int = 1) -> Path:
    """Every ``stride``-th ledger row (the last row is always kept)."""
    path = Path(path)
    keep = list(range(0, len(rows), stride))
    if rows and keep[-1] != len(rows) - 1:
        keep.append(len(rows) - 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i in keep:
            w.writerow([repr(float(x)) for x in row_values(rows[i])])
    return path


def read_ledger_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in r] for r in reader]
    return header, np.array(rows)


TRACE_COLUMNS = ("step", "t", "a_norm", "div_min", "div_max", "newton_iters", "picard_iters")


def write_trace_csv(path, trace) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow([r.step, repr(r.t), repr(r.a_norm), repr(r.div_min), repr(r.div_max),
                        r.newton_iters, r.picard_iters])
    return path


def read_trace_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in r.items()} for r in reader]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
