"""Space-time diagnostics: mixed L^q_t L^p_x norms and the local smoothing norm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trajectory import Trajectory


class NormSpecError(ValueError):
    pass


def is_strichartz_pair(p: float, q: float, d: int, tol: float = 1e-12) -> bool:
    """2/q = d(1/2 - 1/p) with p in [2, inf], q in (2, inf]."""
    if not (2 <= p <= np.inf and 2 < q <= np.inf):
        return False
    return abs(2.0 / q - d * (0.5 - 1.0 / p)) <= tol


def subcritical_pair(alpha: float, d: int) -> tuple[float, float]:
    """The pair (alpha+1, 4(alpha+1)/(d(alpha-1)))."""
    return alpha + 1, 4 * (alpha + 1) / (d * (alpha - 1))


@dataclass(frozen=True)
class NormSpec:
    """Which space-time norm to evaluate.

    kind is one of ``"Lp"``, ``"LqLp"``, ``"LocalSmoothing"``, ``"TerminalL2"``.
    LocalSmoothing is the L^2_t norm of <x>^beta <grad>^alpha f; only
    (alpha, beta) = (1/2, -1) and its dual (-1/2, 1) are supported.
    """

    kind: str
    p: float = 2
    q: float = np.inf
    strichartz: bool = False
    alpha: float = 0.5
    beta: float = -1.0

    def validate(self, d: int):
        if self.kind not in ("Lp", "LqLp", "LocalSmoothing", "TerminalL2"):
            raise NormSpecError(f"unknown norm kind {self.kind!r}")
        if self.kind == "LqLp" and self.strichartz and not is_strichartz_pair(self.p, self.q, d):
            raise NormSpecError(f"(p, q) = ({self.p}, {self.q}) is not a Strichartz pair in d={d}")
        if self.kind == "LocalSmoothing" and (self.alpha, self.beta) not in ((0.5, -1.0), (-0.5, 1.0)):
            raise NormSpecError("local smoothing supports only (1/2, -1) and (-1/2, 1)")


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    h = np.diff(times)
    w = np.zeros(len(times))
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def local_smoothing_weighted(grid, values, alpha=0.5, beta=-1.0):
    """<x - x_c>^beta applied after the multiplier (1+|k|^2)^(alpha/2)."""
    smoothed = grid.ifft((1 + grid.k2) ** (alpha / 2) * grid.fft(values))
    return (1 + grid.r2_center) ** (beta / 2) * smoothed


def trajectory_norm(traj: Trajectory, spec: NormSpec) -> float:
    if len(traj) < 2:
        raise NormSpecError("need at least two time nodes")
    spec.validate(traj.grid.d)
    grid = traj.grid
    if spec.kind == "TerminalL2":
        return grid.norm(traj.values[-1], 2)
    if spec.kind == "Lp":
        return grid.norm(traj.values[-1], spec.p)
    w = trapezoid_weights(traj.times)
    if spec.kind == "LocalSmoothing":
        g = local_smoothing_weighted(grid, traj.values, spec.alpha, spec.beta)
        per_t = np.array([grid.norm(f, 2) for f in g])
        return float(np.sqrt(np.sum(w * per_t**2)))
    per_t = np.array([grid.norm(f, spec.p) for f in traj.values])
    if np.isinf(spec.q):
        return float(per_t.max())
    return float(np.sum(w * per_t**spec.q) ** (1.0 / spec.q))
