"""Split-step integration of the controlled stochastic NLS

    i dX = ΔX dt + λ|X|^(α-1) X dt - iμX dt + V0 X dt + Σ_j u_j V_j X dt + i X dW

in its Stratonovich form.  One step over [t_k, t_{k+1}] is

    A: free flow for dt/2          (Fourier multiplier exp(i|k|^2 dt/2))
    B: exact pointwise phase step  v * exp(-i dt (λ|v|^(α-1) + V0 + u(t_{k+1/2})·V))
    A: free flow for dt/2
    C: noise step                  v * exp(W(t_{k+1}) - W(t_k)) (Stratonovich sub-flow)

A, B and C each preserve |v| in the conservative case, so the discrete mass is
conserved to roundoff.  For constant noise profiles C is a global phase that
commutes with A and B, which makes X_stoch = e^W X_det exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controls import ControlPath, InadmissibleControlError
from .grid import ComplexField, SpatialGrid
from .stochastic import PhaseField
from .trajectory import Trajectory

BLOWUP_THRESHOLD = 1e8


class BlowUpError(RuntimeError):
    def __init__(self, last_valid_time: float):
        super().__init__(f"solution blew up after t={last_valid_time:g}")
        self.last_valid_time = last_valid_time


@dataclass
class ModelParams:
    """Equation coefficients.  ``V`` has shape (m, *grid.shape)."""

    lam: float
    alpha: float
    V0: np.ndarray
    V: np.ndarray = field(repr=False)
    d: int = 1
    max_dt: float | None = None

    def __post_init__(self):
        if self.lam not in (-1, 1):
            raise ValueError("lam must be -1 (defocusing) or +1 (focusing)")
        if not self.alpha > 1:
            raise ValueError("nonlinearity exponent alpha must exceed 1")
        if self.alpha > 1 + 4 / self.d + 1e-12:
            raise ValueError("mass-supercritical exponents are not supported")
        if self.lam == 1 and self.critical:
            raise ValueError("focusing mass-critical dynamics are not supported")
        self.V0 = np.asarray(self.V0, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if V.ndim == self.d:
            V = V[None]
        self.V = V

    @property
    def critical(self) -> bool:
        return abs(self.alpha - (1 + 4 / self.d)) < 1e-12

    @property
    def m(self) -> int:
        return self.V.shape[0]

    def potential(self, u) -> np.ndarray:
        """f(u) = V0 + u·V for one control value u in R^m."""
        return self.V0 + np.tensordot(np.asarray(u, float), self.V, axes=1)


def _as_control(u, times=None, K=None) -> np.ndarray:
    if isinstance(u, ControlPath):
        return u.values
    values = np.asarray(u, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if K is not None and not K.contains(values):
        raise InadmissibleControlError("control leaves the admissible set")
    return values


class SplitStep:
    """The discrete one-step map and its pieces, shared by the forward,
    tangent and adjoint solvers."""

    def __init__(self, grid: SpatialGrid, params: ModelParams, u_nodes: np.ndarray, T: float, phase=None):
        self.grid = grid
        self.params = params
        self.u = np.asarray(u_nodes, float)
        self.M = len(self.u) - 1
        if self.M < 1:
            raise ValueError("need at least one time step")
        self.T = float(T)
        self.dt = self.T / self.M
        if params.max_dt is not None and self.dt > params.max_dt:
            raise ValueError(f"dt={self.dt:g} exceeds configured bound {params.max_dt:g}")
        if params.V.shape[1:] != grid.shape or params.V0.shape != grid.shape:
            raise ValueError("potentials do not match the grid")
        if self.u.shape[1] != params.m:
            raise ValueError(f"control has {self.u.shape[1]} channels, model expects {params.m}")
        self.half = grid.propagator(self.dt / 2)
        self.half_inv = np.conj(self.half)
        self.u_mid = 0.5 * (self.u[:-1] + self.u[1:])
        self.phase = phase
        self.factors = None
        if phase is not None:
            if phase.path.M != self.M or abs(phase.path.T - self.T) > 1e-12 * self.T:
                raise ValueError("noise path and control use different time nodes")
            self.factors = phase.step_factors()

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M + 1)

    def A(self, v):
        return self.grid.ifft(self.half * self.grid.fft(v))

    def A_adj(self, w):
        return self.grid.ifft(self.half_inv * self.grid.fft(w))

    def potential(self, k):
        return self.params.potential(self.u_mid[k])

    def theta(self, v, k):
        """Phase angle of the B sub-step: -dt (λ|v|^(α-1) + f(u_{k+1/2}))."""
        p = self.params
        return -self.dt * (p.lam * np.abs(v) ** (p.alpha - 1) + self.potential(k))

    def B(self, v, k):
        return v * np.exp(1j * self.theta(v, k))

    def C(self, v, k):
        return v if self.factors is None else v * self.factors[k]

    def C_adj(self, w, k):
        return w if self.factors is None else w * np.conj(self.factors[k])

    def step(self, X, k):
        return self.C(self.A(self.B(self.A(X), k)), k)

    def stages(self, X, k):
        """Intermediate states (A X, B A X) of step k."""
        v1 = self.A(X)
        return v1, self.B(v1, k)


def solve_forward(X0, params: ModelParams, u, phase: PhaseField | None = None, *, T=None, grid=None, stride=1, K=None):
    """Integrate from X0 along control ``u``; ``phase=None`` gives the deterministic equation.

    ``u`` is a ControlPath (its times define the step) or an (M+1, m) array with
    ``T`` given; a plain array is checked against ``K`` when one is passed.
    Returns the trajectory stored every ``stride`` steps.
    """
    if isinstance(X0, ComplexField):
        grid, X0 = X0.grid, X0.values
    if grid is None:
        raise ValueError("grid required when X0 is a plain array")
    if isinstance(u, ControlPath):
        T = u.times[-1] - u.times[0]
    elif T is None:
        raise ValueError("T required when u is a plain array")
    u_nodes = _as_control(u, K=K)
    stepper = SplitStep(grid, params, u_nodes, T, phase)
    M = stepper.M
    if stride < 1 or M % stride:
        raise ValueError(f"stride {stride} must divide the step count {M}")
    X = np.array(X0, dtype=complex)
    out = np.empty((M // stride + 1,) + grid.shape, dtype=complex)
    out[0] = X
    times = stepper.times()
    for k in range(M):
        X = stepper.step(X, k)
        peak = np.max(np.abs(X))
        if not np.isfinite(peak) or peak > BLOWUP_THRESHOLD:
            raise BlowUpError(float(times[k]))
        if (k + 1) % stride == 0:
            out[(k + 1) // stride] = X
    return Trajectory(grid, times[::stride], out, stride, "forward")


def rescaled_view(traj: Trajectory, phase: PhaseField, sign: int = -1) -> Trajectory:
    """v(t_k) = exp(sign W(t_k)) X(t_k); the default sign=-1 is the gauge transform."""
    idx = np.arange(len(traj)) * traj.stride
    if idx[-1] > phase.path.M or not np.allclose(phase.path.times[idx], traj.times, rtol=0, atol=1e-12):
        raise ValueError("trajectory nodes do not match the noise path")
    W = np.stack([phase.W(i) for i in idx])
    return traj.with_values(np.exp(sign * W) * traj.values, kind=traj.kind)
