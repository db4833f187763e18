"""Snapshot files, CSV tables and run manifests.

Snapshot layout (all little-endian)::

    b"FCTF"                 magic
    u32 version             currently 1
    u32 dim
    u64 cells[dim]
    f64 lengths[dim]
    f64 tau
    u64 k
    f64 wall_time           seconds spent on the march up to step k
    f64 residual
    f64 u[node_count], psi[node_count], rho[node_count]   C node order
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid, build_grid

MAGIC = b"FCTF"
VERSION = 1


@dataclass(frozen=True, eq=False)
class Snapshot:
    grid: Grid
    tau: float
    k: int
    wall_time: float
    residual: float
    u: np.ndarray
    psi: np.ndarray
    rho: np.ndarray


def snapshot_bytes(snap: Snapshot) -> bytes:
    g = snap.grid
    d = g.dim
    head = MAGIC + struct.pack(f"<II{d}Q{d}ddQdd", VERSION, d, *g.cells, *g.lengths,
                               snap.tau, snap.k, snap.wall_time, snap.residual)
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").reshape(-1).tobytes() for a in (snap.u, snap.psi, snap.rho))
    return head + body


def write_snapshot(path: str | Path, snap: Snapshot) -> None:
    Path(path).write_bytes(snapshot_bytes(snap))


def read_snapshot(path: str | Path) -> Snapshot:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    version, d = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    fmt = f"<{d}Q{d}ddQdd"
    vals = struct.unpack_from(fmt, buf, 12)
    off = 12 + struct.calcsize(fmt)
    cells, lengths = vals[:d], vals[d:2 * d]
    tau, k, wall, res = vals[2 * d:]
    g = build_grid(d, lengths, cells)
    n = g.node_count
    if len(buf) != off + 3 * 8 * n:
        raise ValueError(f"{path}: truncated or oversized snapshot")
    arrs = [np.frombuffer(buf, dtype="<f8", count=n, offset=off + 8 * n * i).astype(np.float64).reshape(g.shape)
            for i in range(3)]
    return Snapshot(g, tau, int(k), wall, res, *arrs)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, header, rows) -> None:
    """Write rows with shortest round-trip float formatting, fixed column order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path: str | Path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
