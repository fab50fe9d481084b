"""Diagnostics CSV emission and binary state snapshots.

CSV columns are fixed per dimensionality, floats are written with 17
significant digits so they round-trip exactly.  Snapshots are little-endian
binary: an 8-byte magic, int64 header words, then factor blocks, each with
explicit dimensions and float64 payload in column-major order.  A snapshot
stores the full multistep lineage (kinetic and macroscopic levels plus the
recent step sizes), so a resumed run reproduces an uninterrupted one
bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SnapshotError
from .htucker import HtTensor
from .lowrank import LowRankMatrix
from .macro import MacroState1D, MacroState2D

_MAGIC = b"LRVSNAP\x01"
_VERSION = 1


@dataclass
class DiagnosticsRow:
    t: float
    ranks: tuple[int, ...]
    mass: float
    momentum: tuple[float, ...]
    energy: float
    efield_energy: float
    wall_ms: float


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _header(row: DiagnosticsRow) -> str:
    if len(row.ranks) == 1:
        rank_cols = "rank"
    else:
        rank_cols = "rank_x,rank_vv,rank_v1,rank_v2"
    mom_cols = ",".join(f"mom{i + 1}" for i in range(len(row.momentum)))
    return f"t,{rank_cols},mass,{mom_cols},energy,efield_energy,wall_ms"


def write_diagnostics(series: list[DiagnosticsRow], path, header: str | None = None) -> None:
    path = Path(path)
    try:
        with path.open("w") as fh:
            if series:
                fh.write(_header(series[0]) + "\n")
            elif header is not None:
                fh.write(header + "\n")
            else:
                fh.write("t,rank,mass,mom1,energy,efield_energy,wall_ms\n")
            for row in series:
                fields = ([_fmt(row.t)] + [str(r) for r in row.ranks] + [_fmt(row.mass)]
                          + [_fmt(m) for m in row.momentum]
                          + [_fmt(row.energy), _fmt(row.efield_energy), _fmt(row.wall_ms)])
                fh.write(",".join(fields) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write diagnostics to {path}: {exc}") from exc


def append_row(row: DiagnosticsRow, sink) -> None:
    """Stream one row to an open text sink, writing the header first."""
    if getattr(sink, "_needs_header", True):
        sink.write(_header(row) + "\n")
        sink._needs_header = False
    fields = ([_fmt(row.t)] + [str(r) for r in row.ranks] + [_fmt(row.mass)]
              + [_fmt(m) for m in row.momentum]
              + [_fmt(row.energy), _fmt(row.efield_energy), _fmt(row.wall_ms)])
    sink.write(",".join(fields) + "\n")


def read_diagnostics(path) -> list[DiagnosticsRow]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise SnapshotError(f"empty diagnostics file: {path}")
    names = lines[0].split(",")
    n_ranks = sum(1 for n in names if n.startswith("rank"))
    n_mom = sum(1 for n in names if n.startswith("mom"))
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        i = 0
        t = float(parts[i]); i += 1
        ranks = tuple(int(p) for p in parts[i:i + n_ranks]); i += n_ranks
        mass = float(parts[i]); i += 1
        mom = tuple(float(p) for p in parts[i:i + n_mom]); i += n_mom
        energy = float(parts[i]); i += 1
        efield = float(parts[i]); i += 1
        wall = float(parts[i])
        rows.append(DiagnosticsRow(t, ranks, mass, mom, energy, efield, wall))
    return rows


# ---------------------------------------------------------------------------
# binary snapshots

def _write_ints(fh, *vals: int) -> None:
    fh.write(struct.pack(f"<{len(vals)}q", *vals))


def _read_ints(fh, n: int) -> tuple[int, ...]:
    raw = fh.read(8 * n)
    if len(raw) != 8 * n:
        raise SnapshotError("truncated snapshot (header)")
    return struct.unpack(f"<{n}q", raw)


def _write_floats(fh, *vals: float) -> None:
    fh.write(struct.pack(f"<{len(vals)}d", *vals))


def _read_floats(fh, n: int) -> tuple[float, ...]:
    raw = fh.read(8 * n)
    if len(raw) != 8 * n:
        raise SnapshotError("truncated snapshot (header)")
    return struct.unpack(f"<{n}d", raw)


def _write_array(fh, a: np.ndarray) -> None:
    a = np.asarray(a, dtype=float)
    _write_ints(fh, a.ndim, *a.shape)
    fh.write(a.astype("<f8").tobytes(order="F"))


def _read_array(fh) -> np.ndarray:
    (ndim,) = _read_ints(fh, 1)
    shape = _read_ints(fh, ndim)
    count = int(np.prod(shape)) if ndim else 1
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise SnapshotError("truncated snapshot (array payload)")
    return np.frombuffer(raw, dtype="<f8").reshape(shape, order="F").copy()


def _write_kinetic(fh, f) -> None:
    if isinstance(f, LowRankMatrix):
        _write_ints(fh, 1)
        for a in (f.C, f.Ux, f.Uv):
            _write_array(fh, a)
    elif isinstance(f, HtTensor):
        _write_ints(fh, 2, f.nx[0], f.nx[1])
        for a in (f.Ux, f.B, f.Bvv, f.Uv1, f.Uv2):
            _write_array(fh, a)
    else:
        raise SnapshotError(f"cannot serialize state of type {type(f).__name__}")


def _read_kinetic(fh):
    (kind,) = _read_ints(fh, 1)
    if kind == 1:
        c, ux, uv = (_read_array(fh) for _ in range(3))
        return LowRankMatrix(c, ux, uv)
    if kind == 2:
        n1, n2 = _read_ints(fh, 2)
        ux, b, bvv, uv1, uv2 = (_read_array(fh) for _ in range(5))
        return HtTensor(ux, b, bvv, uv1, uv2, (n1, n2))
    raise SnapshotError(f"unknown kinetic block kind {kind}")


def _write_macro(fh, u) -> None:
    if u is None:
        _write_ints(fh, 0)
    elif isinstance(u, MacroState1D):
        _write_ints(fh, 1)
        for a in (u.rho, u.J, u.e):
            _write_array(fh, a)
    elif isinstance(u, MacroState2D):
        _write_ints(fh, 2)
        for a in (u.rho, u.J1, u.J2, u.e):
            _write_array(fh, a)
    else:
        raise SnapshotError(f"cannot serialize macro state {type(u).__name__}")


def _read_macro(fh):
    (kind,) = _read_ints(fh, 1)
    if kind == 0:
        return None
    if kind == 1:
        rho, j, e = (_read_array(fh) for _ in range(3))
        return MacroState1D(rho, j, e)
    if kind == 2:
        rho, j1, j2, e = (_read_array(fh) for _ in range(4))
        return MacroState2D(rho, j1, j2, e)
    raise SnapshotError(f"unknown macro block kind {kind}")


def _grid_signature(problem) -> tuple[float, ...]:
    cfg = problem.cfg
    return (float(cfg.nx), float(cfg.nx2), float(cfg.nv), float(cfg.nv2),
            cfg.x_min, cfg.x_max, cfg.v_max, cfg.beta, cfg.eps)


def snapshot_write(hist, problem, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        _write_ints(fh, _VERSION, 1 if problem.cfg.dim == "1d1v" else 2,
                    hist.step, len(hist.fs), len(hist.dts))
        _write_floats(fh, hist.t, hist.dt_work, *hist.dts)
        _write_floats(fh, *_grid_signature(problem))
        for f, u in zip(hist.fs, hist.us):
            _write_kinetic(fh, f)
            _write_macro(fh, u)


def snapshot_read(path, problem):
    from .driver import History  # deferred: avoids a module import cycle

    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise SnapshotError(f"{path}: bad magic; not a snapshot file")
        version, dim, step, n_levels, n_dts = _read_ints(fh, 5)
        if version != _VERSION:
            raise SnapshotError(f"{path}: snapshot version {version}, expected {_VERSION}")
        want_dim = 1 if problem.cfg.dim == "1d1v" else 2
        if dim != want_dim:
            raise SnapshotError(f"{path}: snapshot dimensionality {dim} does not match config")
        t, dt_work, *dts = _read_floats(fh, 2 + n_dts)
        sig = _read_floats(fh, 9)
        if not np.allclose(sig, _grid_signature(problem), rtol=0, atol=0):
            raise SnapshotError(f"{path}: snapshot grid/method signature differs from config")
        hist = History(t=t, step=step, dts=list(dts), dt_work=dt_work)
        for _ in range(n_levels):
            hist.fs.append(_read_kinetic(fh))
            hist.us.append(_read_macro(fh))
        return hist
