"""Discrete p-variation norms and temporal-regularity diagnostics.

The V^p norm is taken over partitions drawn from the sample nodes of [0, T]
(no v(inf) = 0 convention).  The atomic U^2 norm is not computed; since
U^2 embeds in V^2, the V^2 value is what gets reported in its place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import SpatialGrid
from .stochastic import PhaseField
from .trajectory import Trajectory


class UndefinedPathError(ValueError):
    pass


class UnsupportedGaugeError(ValueError):
    pass


def euclidean_norm(diffs: np.ndarray) -> np.ndarray:
    diffs = np.asarray(diffs)
    if diffs.ndim == 1:
        return np.abs(diffs)
    return np.sqrt(np.sum(np.abs(diffs) ** 2, axis=tuple(range(1, diffs.ndim))))


def field_norm(grid: SpatialGrid) -> Callable[[np.ndarray], np.ndarray]:
    """Batched L^2(grid) norm for arrays of shape (k, *grid.shape)."""

    def norm(diffs):
        axes = tuple(range(1, diffs.ndim))
        return np.sqrt(np.sum(np.abs(diffs) ** 2, axis=axes) * grid.cell)

    return norm


@dataclass
class SampledPath:
    """Values v(t_0), ..., v(t_M) in a Hilbert space H.

    ``norm`` maps a batch of differences (k, ...) to their H-norms (k,).
    """

    times: np.ndarray
    values: np.ndarray
    norm: Callable[[np.ndarray], np.ndarray] = euclidean_norm

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.values = np.asarray(self.values)
        if len(self.times) != len(self.values):
            raise ValueError("one value per time node required")
        if len(self.times) < 2:
            raise UndefinedPathError("a path needs at least two nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")

    @classmethod
    def from_trajectory(cls, traj: Trajectory):
        return cls(traj.times, traj.values, field_norm(traj.grid))

    @property
    def M(self) -> int:
        return len(self.times) - 1

    def distances_to(self, i: int) -> np.ndarray:
        """‖v_i - v_j‖ for j < i."""
        return self.norm(self.values[:i] - self.values[i])


def vp_norm(path: SampledPath, p: float) -> float:
    """Exact sup over node partitions of (Σ ‖v(t_k) - v(t_{k-1})‖^p)^(1/p), O(M^2)."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    M = path.M
    if M < 1:
        raise UndefinedPathError("path has no increments")
    best = np.zeros(M + 1)
    for i in range(1, M + 1):
        best[i] = np.max(best[:i] + path.distances_to(i) ** p)
    return float(np.max(best) ** (1.0 / p))


def _uniform_dt(times):
    h = np.diff(times)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("time nodes must be uniform")
    return float(h[0])


def shift_profile(path: SampledPath, p: float = 2):
    """(h_j, ‖v(.+h_j) - v‖_{L^p(0,T-h_j)}) for h_j = jΔt, j = 1..M-1 (left Riemann sums)."""
    dt = _uniform_dt(path.times)
    M = path.M
    hs, vals = [], []
    for j in range(1, M):
        # nodes k = 0..M-j-1 cover [0, T-h) with left endpoints
        d = path.norm(path.values[j:M] - path.values[: M - j])
        hs.append(j * dt)
        vals.append(float(np.sum(dt * d**p) ** (1.0 / p)))
    return np.array(hs), np.array(vals)


def besov_embedding_check(path: SampledPath, p: float = 2):
    """max_h ‖v(.+h) - v‖_{L^p(0,T-h)} / (h^(1/p) ‖v‖_{V^p}) and whether it is <= 2^(1+1/p)."""
    vp = vp_norm(path, p)
    if vp == 0:
        return 0.0, True
    hs, vals = shift_profile(path, p)
    if len(hs) == 0:
        return 0.0, True
    ratio = float(np.max(vals / (hs ** (1.0 / p) * vp)))
    return ratio, bool(ratio <= 2 ** (1 + 1.0 / p))


@dataclass
class GaugeSpec:
    """Gauge used to pull a trajectory back to the free-flow frame.

    Only constant noise profiles are supported: then the evolution operator
    U(0, t) is the free flow run backward for time t.
    """

    constant: bool = True
    phase: PhaseField | None = None

    def __post_init__(self):
        if self.phase is not None and not self.phase.model.constant_profiles:
            self.constant = False


def pulled_back(traj: Trajectory, gauge: GaugeSpec | None = None) -> np.ndarray:
    """Φ(t_k) = e^{i t_k Δ} e^{-W(t_k)} X(t_k)."""
    gauge = gauge or GaugeSpec()
    if not gauge.constant:
        raise UnsupportedGaugeError("the evolution-adapted transform needs constant noise profiles")
    if traj.stride != 1:
        raise ValueError("temporal regularity needs a densely stored trajectory (stride 1)")
    g = traj.grid
    vals = traj.values
    if gauge.phase is not None:
        W = np.stack([gauge.phase.W(k) for k in range(len(traj))])
        vals = np.exp(-W) * vals
    mult = np.exp(-1j * traj.times[:, None] * g.k2.reshape(1, -1)).reshape((len(traj),) + g.shape)
    return g.ifft(mult * g.fft(vals))


def temporal_regularity(traj: Trajectory, gauge: GaugeSpec | None = None):
    """sup_h h^(-1/2) ‖Φ(.+h) - Φ‖_{L^2(0,T-h; L^2)} and the full h-profile."""
    phi = pulled_back(traj, gauge)
    path = SampledPath(traj.times, phi, field_norm(traj.grid))
    hs, vals = shift_profile(path, 2)
    if len(hs) == 0:
        raise UndefinedPathError("need at least two time steps")
    scaled = vals / np.sqrt(hs)
    table = [(float(h), float(v)) for h, v in zip(hs, scaled)]
    return float(np.max(scaled)), table


def embedding_chain_gap(path: SampledPath, p: float) -> float:
    """‖v_0‖ + ‖v‖_{V^p} - sup_k ‖v_k‖, non-negative by the triangle inequality."""
    zero = np.zeros_like(path.values[:1])
    sizes = path.norm(path.values - zero)
    return float(sizes[0] + vp_norm(path, p) - np.max(sizes))
