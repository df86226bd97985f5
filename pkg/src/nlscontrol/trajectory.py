"""Time-indexed field sequences and their on-disk formats.

Binary dump layout (all little-endian)::

    magic    4 bytes   b"NLST"
    version  uint32    1
    d        uint32
    n        uint32
    L        float64
    M        uint32    number of time steps of the run
    stride   uint32
    nodes    uint32    number of stored nodes
    itemsize uint32    8 (complex64) or 16 (complex128)
    times    float64[nodes]
    fields   complex[nodes, n^d]   row-major per node
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .grid import SpatialGrid

_MAGIC = b"NLST"
_HEADER = struct.Struct("<4sIIIdIIII")


@dataclass
class Trajectory:
    grid: SpatialGrid
    times: np.ndarray
    values: np.ndarray = field(repr=False)
    stride: int = 1
    kind: str = "forward"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.times),) + self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} inconsistent with "
                f"{len(self.times)} nodes on grid {self.grid.shape}"
            )

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k):
        return self.values[k]

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def steps(self) -> int:
        return (len(self.times) - 1) * self.stride

    def masses(self) -> np.ndarray:
        """L^2 norm of every stored node."""
        axes = tuple(range(1, self.values.ndim))
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=axes) * self.grid.cell)

    def with_values(self, values, kind=None) -> "Trajectory":
        return Trajectory(self.grid, self.times.copy(), values, self.stride, kind or self.kind)


def write_csv(traj: Trajectory, path, p_values=(2, 4, np.inf)):
    """Per-node table: t, mass, then one L^p column per requested p."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mass"] + ["Linf" if np.isinf(p) else f"L{p:g}" for p in p_values])
        for t, f in zip(traj.times, traj.values):
            row = [repr(float(t)), repr(traj.grid.norm(f, 2))]
            row += [repr(traj.grid.norm(f, p)) for p in p_values]
            w.writerow(row)


def write_binary(traj: Trajectory, path, single=False):
    dtype = np.dtype("<c8") if single else np.dtype("<c16")
    g = traj.grid
    header = _HEADER.pack(
        _MAGIC, 1, g.d, g.n, float(g.L), traj.steps, traj.stride, len(traj), dtype.itemsize
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(traj.times.astype("<f8").tobytes())
        fh.write(traj.values.reshape(len(traj), -1).astype(dtype).tobytes())


def read_binary(path) -> Trajectory:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, d, n, L, M, stride, nodes, itemsize = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a trajectory dump")
    grid = SpatialGrid(d, n, L)
    off = _HEADER.size
    times = np.frombuffer(raw, dtype="<f8", count=nodes, offset=off)
    off += 8 * nodes
    dtype = {8: "<c8", 16: "<c16"}[itemsize]
    vals = np.frombuffer(raw, dtype=dtype, count=nodes * grid.size, offset=off)
    traj = Trajectory(grid, times.copy(), vals.reshape((nodes,) + grid.shape).astype(complex), stride)
    if traj.steps != M:
        raise ValueError(f"{path}: header step count {M} disagrees with stored nodes")
    return traj
