"""Admissible control sets and piecewise-linear control paths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InadmissibleControlError(ValueError):
    pass


@dataclass(frozen=True)
class AdmissibleSet:
    """Compact convex K in R^m: a box or a closed Euclidean ball."""

    kind: str
    lo: tuple[float, ...] = ()
    hi: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "box":
            lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
            if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
                raise ValueError("box bounds need matching non-empty lo/hi")
            if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(lo > hi):
                raise ValueError("box bounds must be finite with lo <= hi")
        elif self.kind == "ball":
            if len(self.center) == 0 or not (self.radius >= 0 and np.isfinite(self.radius)):
                raise ValueError("ball needs a center and a finite radius >= 0")
        else:
            raise ValueError(f"unknown admissible set kind {self.kind!r}")

    @classmethod
    def box(cls, lo, hi):
        return cls("box", lo=tuple(np.atleast_1d(lo).astype(float)), hi=tuple(np.atleast_1d(hi).astype(float)))

    @classmethod
    def ball(cls, center, radius):
        return cls("ball", center=tuple(np.atleast_1d(center).astype(float)), radius=float(radius))

    @property
    def m(self) -> int:
        return len(self.lo) if self.kind == "box" else len(self.center)

    @property
    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(np.subtract(self.hi, self.lo)))
        return 2 * self.radius

    def project(self, g) -> np.ndarray:
        """Nodewise Euclidean projection of an (..., m) array."""
        g = np.asarray(g, dtype=float)
        if g.shape[-1] != self.m:
            raise ValueError(f"last axis must have length {self.m}, got {g.shape}")
        if self.kind == "box":
            return np.clip(g, self.lo, self.hi)
        c = np.asarray(self.center)
        diff = g - c
        r = np.linalg.norm(diff, axis=-1, keepdims=True)
        # points within roundoff of the sphere count as inside, which keeps the
        # projection exactly idempotent; the center itself maps to the center
        outside = r > self.radius + 1e-12 * (self.radius + np.linalg.norm(c))
        scale = np.where(outside, self.radius / np.where(r > 0, r, 1.0), 1.0)
        return c + diff * scale

    def contains(self, g, tol=1e-12) -> bool:
        g = np.asarray(g, dtype=float)
        return bool(np.all(np.abs(self.project(g) - g) <= tol * (1 + np.abs(g))))


def project_K(g, K: AdmissibleSet) -> np.ndarray:
    return K.project(g)


@dataclass
class ControlPath:
    """Control values u(t_k) on the solver nodes, piecewise linear in between."""

    times: np.ndarray
    values: np.ndarray
    K: AdmissibleSet

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape != (len(self.times), self.K.m):
            raise ValueError(f"control values shape {values.shape} != ({len(self.times)}, {self.K.m})")
        self.values = self.K.project(values)

    @classmethod
    def constant(cls, times, value, K: AdmissibleSet):
        value = np.broadcast_to(np.asarray(value, float), (K.m,))
        return cls(times, np.tile(value, (len(times), 1)), K)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.values[:-1] + self.values[1:])

    def with_values(self, values) -> "ControlPath":
        return ControlPath(self.times, values, self.K)


def check_admissible(values, K: AdmissibleSet):
    if not K.contains(values):
        raise InadmissibleControlError("control leaves the admissible set")
