"""Noise model W(t,x) = sum_j mu_j e_j(x) beta_j(t), Brownian sampling and gauge factors."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid import SpatialGrid


class InvalidDiscretizationError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Spatial profile e_j: either ``constant`` (value c) or ``bump`` c(1+|x-x0|^2)^(-s).

    Distances for bumps use the minimum periodic image so the profile is
    continuous on the torus.
    """

    kind: str = "constant"
    c: float = 1.0
    x0: tuple[float, ...] | float | None = None
    s: float = 2.0

    def __post_init__(self):
        if self.kind not in ("constant", "bump"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "bump" and self.s < 2:
            raise ValueError("bump decay exponent s must be >= 2")

    def evaluate(self, grid: SpatialGrid) -> np.ndarray:
        if self.kind == "constant":
            return np.full(grid.shape, float(self.c))
        x0 = self.x0 if self.x0 is not None else grid.center
        x0 = np.broadcast_to(np.asarray(x0, dtype=float), (grid.d,))
        r2 = 0.0
        for x, c in zip(grid.axes, x0):
            dist = (x - c + grid.L / 2) % grid.L - grid.L / 2
            r2 = r2 + dist**2
        return self.c * (1 + r2) ** (-self.s)


@dataclass(frozen=True)
class NoiseModel:
    mu: tuple[complex, ...]
    profiles: tuple[Profile, ...]
    conservative: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(complex(m) for m in self.mu))
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if len(self.mu) != len(self.profiles):
            raise ValueError("need one profile per noise channel")
        if len(self.mu) == 0:
            raise ValueError("noise model needs at least one channel")
        if self.conservative and any(m.real != 0 for m in self.mu):
            raise ValueError("conservative noise requires purely imaginary mu_j")

    @property
    def N(self) -> int:
        return len(self.mu)

    @property
    def constant_profiles(self) -> bool:
        return all(p.kind == "constant" for p in self.profiles)

    @property
    def is_unitary(self) -> bool:
        return all(m.real == 0 for m in self.mu)

    def profile_values(self, grid: SpatialGrid) -> np.ndarray:
        return np.stack([p.evaluate(grid) for p in self.profiles])

    def mu_profile(self, grid: SpatialGrid) -> np.ndarray:
        """mu(x) = 1/2 sum_j |mu_j|^2 e_j(x)^2."""
        e = self.profile_values(grid)
        w = np.abs(np.asarray(self.mu)) ** 2
        return 0.5 * np.tensordot(w, e**2, axes=1)

    def strat_drift(self, grid: SpatialGrid) -> np.ndarray:
        """Residual drift sum_j Re(mu_j) mu_j e_j^2 of the Stratonovich form; zero when conservative."""
        e = self.profile_values(grid)
        mu = np.asarray(self.mu)
        return np.tensordot(mu.real * mu, e**2, axes=1)


@dataclass
class WienerPath:
    times: np.ndarray
    beta: np.ndarray = field(repr=False)
    seed: int = 0
    level: int = 0

    @property
    def M(self) -> int:
        return len(self.times) - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def N(self) -> int:
        return self.beta.shape[1]


def _check_discretization(T, M):
    if M < 1:
        raise InvalidDiscretizationError(f"need at least one time step, got M={M}")
    if not T > 0:
        raise InvalidDiscretizationError(f"horizon must be positive, got T={T}")


def brownian_increments(rng: np.random.Generator, T: float, M: int, N: int, size=None) -> np.ndarray:
    """Standard Gaussian increments of variance T/M, shape (*size, M, N)."""
    _check_discretization(T, M)
    shape = (M, N) if size is None else tuple(np.atleast_1d(size)) + (M, N)
    return rng.normal(0.0, np.sqrt(T / M), shape)


def sample_path(model: NoiseModel, T: float, M: int, seed: int) -> WienerPath:
    _check_discretization(T, M)
    rng = np.random.default_rng(seed)
    inc = brownian_increments(rng, T, M, model.N)
    beta = np.zeros((M + 1, model.N))
    np.cumsum(inc, axis=0, out=beta[1:])
    return WienerPath(np.linspace(0.0, T, M + 1), beta, seed=seed, level=0)


def refine_path(path: WienerPath) -> WienerPath:
    """Brownian-bridge midpoint refinement M -> 2M; coarse nodes are copied unchanged."""
    rng = np.random.default_rng([path.seed, path.level + 1])
    M, N = path.M, path.N
    z = rng.normal(0.0, 1.0, (M, N))
    beta = np.empty((2 * M + 1, N))
    beta[0::2] = path.beta
    beta[1::2] = 0.5 * (path.beta[:-1] + path.beta[1:]) + np.sqrt(path.dt / 4) * z
    return WienerPath(np.linspace(0.0, path.T, 2 * M + 1), beta, seed=path.seed, level=path.level + 1)


def sample_paths(model: NoiseModel, T: float, M: int, count: int, base_seed: int) -> list[WienerPath]:
    """Independent paths with per-path seeds spawned from ``base_seed``."""
    seeds = np.random.SeedSequence(base_seed).generate_state(count, dtype=np.uint64)
    return [sample_path(model, T, M, int(s)) for s in seeds]


def write_path_csv(path: WienerPath, filename):
    with open(filename, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"beta_{j + 1}" for j in range(path.N)])
        for t, row in zip(path.times, path.beta):
            w.writerow([repr(float(t))] + [repr(float(b)) for b in row])


class PhaseField:
    """W(t_k, x) on every node of a Wiener path."""

    def __init__(self, model: NoiseModel, path: WienerPath, grid: SpatialGrid):
        self.model = model
        self.path = path
        self.grid = grid
        self.profiles = model.profile_values(grid)
        self.mu_profile = model.mu_profile(grid)
        self._coef = np.asarray(model.mu)[None, :] * path.beta  # (M+1, N)

    def __len__(self):
        return self.path.M + 1

    def W(self, k: int) -> np.ndarray:
        return np.tensordot(self._coef[k], self.profiles, axes=1)

    def increment(self, k: int) -> np.ndarray:
        """W(t_{k+1}) - W(t_k)."""
        return np.tensordot(self._coef[k + 1] - self._coef[k], self.profiles, axes=1)

    def step_factors(self) -> np.ndarray:
        """exp(dW_k - dt * drift) for every step, shape (M, *grid.shape)."""
        dt = self.path.dt
        drift = self.model.strat_drift(self.grid)
        dcoef = np.diff(self._coef, axis=0)
        dW = np.tensordot(dcoef, self.profiles, axes=1)
        return np.exp(dW - dt * drift)

    def all_W(self) -> np.ndarray:
        return np.tensordot(self._coef, self.profiles, axes=1)


def gauge_factor(phase: PhaseField, k: int, sign: int = 1) -> np.ndarray:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not 0 <= k < len(phase):
        raise IndexError(f"time index {k} out of range")
    return np.exp(sign * phase.W(k))


def lower_order_coeffs(phase: PhaseField, k: int):
    """b = 2 grad W and c = Laplacian W + sum_j (d_j W)^2 at node k."""
    W = phase.W(k)
    grid = phase.grid
    if phase.model.constant_profiles:
        zero = np.zeros(grid.shape, dtype=complex)
        return tuple(zero.copy() for _ in range(grid.d)), zero
    grads = [grid.derivative(W, a) for a in range(grid.d)]
    b = tuple(2 * g for g in grads)
    c = grid.laplacian(W) + sum(g * g for g in grads)
    return b, c
