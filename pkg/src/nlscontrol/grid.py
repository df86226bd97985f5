"""Periodic spatial grid, spectral transforms and field norms.

Fourier convention: the forward transform is unscaled and the inverse carries
the 1/n^d factor (numpy's default).  With this convention

    sum_i |f_i|^2 dx^d  ==  sum_k |fhat_k|^2 * dx^d / n^d

which is what :meth:`SpatialGrid.parseval_constant` returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class InvalidFieldError(ValueError):
    """Raised when a field holds non-finite values."""


class GridMismatchError(ValueError):
    """Raised when two fields live on different grids."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on the box [0, L)^d."""

    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"box length must be positive, got {self.L}")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell(self) -> float:
        """Volume element dx^d."""
        return self.dx**self.d

    @property
    def center(self) -> float:
        return self.L / 2

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * self.dx
        if self.d == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        k = 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        if self.d == 1:
            return (k,)
        return tuple(np.meshgrid(k, k, indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def r2_center(self) -> np.ndarray:
        """Squared distance to the box center."""
        return sum((x - self.center) ** 2 for x in self.axes)

    def parseval_constant(self) -> float:
        return self.cell / self.size

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values, axes=self._fft_axes(values))

    def ifft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(values, axes=self._fft_axes(values))

    def _fft_axes(self, values):
        return tuple(range(values.ndim - self.d, values.ndim))

    def check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.shape[-self.d:] != self.shape:
            raise GridMismatchError(f"field shape {values.shape} does not fit grid {self.shape}")
        return values

    def norm(self, values: np.ndarray, p: float = 2) -> float:
        """Discrete L^p norm; ``p=np.inf`` gives the max modulus."""
        values = self.check(values)
        if not np.all(np.isfinite(values)):
            raise InvalidFieldError("field contains non-finite values")
        if p < 1:
            raise ValueError(f"p must be >= 1, got {p}")
        a = np.abs(values)
        if np.isinf(p):
            return float(a.max())
        if p == 2:
            return float(np.sqrt(np.sum(a * a) * self.cell))
        return float((np.sum(a**p) * self.cell) ** (1.0 / p))

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """sum f conj(g) dx^d."""
        f = self.check(f)
        g = self.check(g)
        if f.shape != g.shape:
            raise GridMismatchError(f"shapes differ: {f.shape} vs {g.shape}")
        return complex(np.vdot(g, f) * self.cell)

    def propagator(self, t: float) -> np.ndarray:
        """Fourier multiplier exp(i|k|^2 t) of the flow i v_t = Laplacian v."""
        return np.exp(1j * self.k2 * t)

    def propagate(self, values: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return np.array(values, dtype=complex)
        return self.ifft(self.propagator(t) * self.fft(values))

    def derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Spectral partial derivative along ``axis``."""
        return self.ifft(1j * self.wavenumbers[axis] * self.fft(values))

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        return self.ifft(-self.k2 * self.fft(values))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=complex)

    def gaussian(self, width: float = 1.0, center=None, amplitude: float = 1.0, kick: float = 0.0):
        """Gaussian amplitude*exp(-|x-c|^2/(2 width^2)) * exp(i kick x_1)."""
        c = self.center if center is None else center
        r2 = sum((x - c) ** 2 for x in self.axes)
        return amplitude * np.exp(-r2 / (2 * width**2)) * np.exp(1j * kick * self.axes[0])


@dataclass(frozen=True)
class ComplexField:
    """A complex field on a grid."""

    grid: SpatialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise GridMismatchError(f"field shape {values.shape} does not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidFieldError("field contains non-finite values")
        object.__setattr__(self, "values", values)


def lp_norm(f: ComplexField, p: float = 2) -> float:
    return f.grid.norm(f.values, p)


def l2_inner(f: ComplexField, g: ComplexField) -> complex:
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")
    return f.grid.inner(f.values, g.values)


def free_propagate(f: ComplexField, t: float) -> ComplexField:
    """Exact free Schrödinger flow i v_t = Δv over time t."""
    return ComplexField(f.grid, f.grid.propagate(f.values, t))
