"""File formats: flat binary grid dumps, CSV tables, JSON reports, manifests.

Binary grid format (little endian):

    magic   4 bytes  b"CGOF"
    n       3 x u32  nodes per axis
    length  f64      box side
    shift   u8       half-shifted lattice flag
    data    n^3 complex64, row-major

Grid origin and any phase reference are run metadata and live in the JSON
manifest next to the dump, not in the header.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, GridField

MAGIC = b"CGOF"
_HEADER = struct.Struct("<4sIIIdB")


def write_grid_binary(path, f: GridField) -> None:
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.n, g.n, g.n, g.length, int(g.shifted)))
        f.values.astype(np.complex64).tofile(fh)


def read_grid_binary(path, origin=(0.0, 0.0, 0.0)) -> GridField:
    with open(path, "rb") as fh:
        magic, n1, n2, n3, length, shift = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if not (n1 == n2 == n3):
            raise ValueError(f"{path}: anisotropic grids are not supported")
        data = np.fromfile(fh, dtype=np.complex64, count=n1 * n2 * n3)
    grid = Grid(n=int(n1), length=float(length), origin=tuple(origin),
                shifted=bool(shift))
    return GridField(grid, data.reshape(grid.shape).astype(complex))


def _atomic_write(path, data: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def write_json(path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True,
                                   default=_json_default).encode())


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def write_csv(path, header, rows) -> None:
    buf = []
    out = csv.writer(_ListWriter(buf))
    out.writerow(header)
    for row in rows:
        out.writerow([_csv_cell(c) for c in row])
    _atomic_write(path, "".join(buf).encode())


def _csv_cell(c):
    if isinstance(c, complex):
        return f"{c.real:.17g}{c.imag:+.17g}j"
    if isinstance(c, float):
        return f"{c:.17g}"
    return c


class _ListWriter:
    def __init__(self, buf):
        self.buf = buf

    def write(self, s):
        self.buf.append(s)


@dataclass
class RunManifest:
    """Index of one CLI run: config echo, timings, and emitted files."""

    command: str
    config: dict
    version: str
    started: float = field(default_factory=time.time)
    stages: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    status: str = "running"

    def add_stage(self, name: str, seconds: float) -> None:
        self.stages.append({"name": name, "seconds": seconds})

    def add_output(self, path, kind: str) -> None:
        self.outputs.append({"path": str(path), "kind": kind,
                             "bytes": os.path.getsize(path)})

    def finish(self, path, status: str) -> None:
        self.status = status
        payload = {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "started": self.started,
            "wall_time": time.time() - self.started,
            "stages": self.stages,
            "outputs": self.outputs,
            "status": status,
        }
        write_json(path, payload)
