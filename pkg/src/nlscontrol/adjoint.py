"""Linearization, tangent (variational) equation and backward adjoint equation.

Sign conventions.  With <f, g> = sum f conj(g) dx^d, the tangent solves

    i dψ = Δψ dt + λ(h1 ψ + h2 conj ψ) dt + f(u) ψ dt - iΨ dt + iψ∘dW,   ψ(0) = 0,

and the adjoint solves, backward from Y(T) = -(X(T) - X_T),

    dY = -iΔY dt - iλ(h1 Y - h2 conj Y) dt - i f(u) Y dt + γ1 (X - X_track) dt,

with the noise entering through the inverse gauge phase.  Then
∫ Re<Ψ, Y> dt equals Re<X(T)-X_T, ψ(T)> + γ1 ∫ Re<X-X_track, ψ> dt and the
L^2 gradient of the cost is η = 2(γ2 u - Im ∫ V X conj(Y) dx).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import ModelParams, SplitStep, _as_control
from .norms import trapezoid_weights
from .trajectory import Trajectory


class UnsupportedModeError(ValueError):
    pass


@dataclass(frozen=True)
class TruncationLevel:
    """Cutoff g(|X|/n) with g = 1 on [0, 1] and g = 0 on [2, inf)."""

    n: float

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError("truncation level must be positive")

    def __call__(self, r):
        return cutoff((np.asarray(r, float)) / self.n)


def _smooth_step(s):
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def cutoff(r):
    """C-infinity radial cutoff: 1 for r <= 1, 0 for r >= 2."""
    a = _smooth_step(2.0 - np.asarray(r, float))
    b = _smooth_step(np.asarray(r, float) - 1.0)
    return a / (a + b)


@dataclass
class Linearization:
    h1: np.ndarray
    h2: np.ndarray


def _unit(X):
    a = np.abs(X)
    return np.divide(X, a, out=np.zeros_like(X, dtype=complex), where=a > 0), a


def linearize(X, alpha: float, trunc: TruncationLevel | None = None) -> Linearization:
    """Wirtinger derivatives of z -> |z|^(α-1) z; h2 := 0 where X = 0."""
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    X = np.asarray(X, dtype=complex)
    xhat, a = _unit(X)
    rho = a ** (alpha - 1)
    h1 = 0.5 * (alpha + 1) * rho
    h2 = 0.5 * (alpha - 1) * rho * xhat**2
    if trunc is not None:
        g = trunc(a)
        h1, h2 = g * h1, g * h2
    return Linearization(h1, h2)


def real_linear_exp(q, sigma, tau):
    """Coefficients of exp(tau G) for z' = -i q z + i sigma conj(z).

    Returns (c, s) with exp(tau G) = c I + s G, where G acts on (Re z, Im z)
    and G^2 = (|sigma|^2 - q^2) I.
    """
    nu = (np.abs(sigma) ** 2 - q**2) * tau**2
    x = np.sqrt(np.abs(nu))
    osc = nu <= 0
    c = np.where(osc, np.cos(x), np.cosh(np.where(osc, 0.0, x)))
    sinc = np.sinc(x / np.pi)
    xs = np.where(osc | (x == 0), 1.0, x)
    sinhc = np.where(osc | (x == 0), 1.0, np.sinh(np.where(osc, 0.0, x)) / xs)
    s = tau * np.where(osc, sinc, sinhc)
    return c, s


def apply_real_linear(z, q, sigma, tau):
    """z(tau) for z' = -i q z + i sigma conj(z) with frozen pointwise coefficients."""
    c, s = real_linear_exp(q, sigma, tau)
    a, b = z.real, z.imag
    s1, s2 = sigma.real, sigma.imag
    ga = -s2 * a + (q + s1) * b
    gb = (s1 - q) * a + s2 * b
    return (c * a + s * ga) + 1j * (c * b + s * gb)


def _B_jvp(stepper: SplitStep, v, theta, dv):
    """Exact derivative of the B sub-step at v (the linearized phase flow)."""
    p = stepper.params
    vhat, a = _unit(v)
    kappa = stepper.dt * p.lam * (p.alpha - 1) * a ** (p.alpha - 1)
    radial = np.real(np.conj(vhat) * dv)
    return np.exp(1j * theta) * (dv - 1j * kappa * vhat * radial)


def _B_vjp(stepper: SplitStep, v, theta, w):
    """Transpose of _B_jvp for the real inner product Re<.,.>."""
    p = stepper.params
    vhat, a = _unit(v)
    kappa = stepper.dt * p.lam * (p.alpha - 1) * a ** (p.alpha - 1)
    rot = np.exp(1j * theta)
    return np.conj(rot) * w + kappa * vhat * np.imag(vhat * rot * np.conj(w))


def _stepper_for(forward: Trajectory, params, u, phase):
    if forward.stride != 1:
        raise ValueError("tangent and adjoint solves need a forward trajectory stored with stride 1")
    u_nodes = _as_control(u)
    if len(u_nodes) != len(forward):
        raise ValueError("control and trajectory have different node counts")
    return SplitStep(forward.grid, params, u_nodes, forward.T, phase)


def _node_array(x, forward):
    if x is None:
        return None
    if isinstance(x, Trajectory):
        x = x.values
    x = np.asarray(x, dtype=complex)
    if x.shape == forward.grid.shape:
        x = np.broadcast_to(x, forward.values.shape)
    if x.shape != forward.values.shape:
        raise ValueError(f"node array shape {x.shape} does not match trajectory {forward.values.shape}")
    return x


def solve_variational(forward: Trajectory, params: ModelParams, u, source=None, *, control_direction=None, phase=None):
    """Tangent ψ along ``forward``.

    ``source`` holds Ψ on the nodes (injected by the trapezoid rule);
    ``control_direction`` ũ injects Ψ = iũ·V X inside the phase sub-step, which
    makes ψ the exact derivative of the discrete forward map in direction ũ.
    The (h1, h2 conj) coupling is propagated with the exact linearization of
    the pointwise phase flow, including the rotation of X during the sub-step.
    """
    st = _stepper_for(forward, params, u, phase)
    Psi = _node_array(source, forward)
    du_mid = None
    if control_direction is not None:
        du = np.asarray(control_direction, float)
        if du.ndim == 1:
            du = du[:, None]
        du_mid = 0.5 * (du[:-1] + du[1:])
    dt = st.dt
    psi = np.zeros(forward.values.shape, dtype=complex)
    cur = np.zeros(forward.grid.shape, dtype=complex)
    for k in range(st.M):
        if Psi is not None:
            cur = cur - 0.5 * dt * Psi[k]
        v1 = st.A(forward.values[k])
        theta = st.theta(v1, k)
        out = v1 * np.exp(1j * theta)
        p1 = st.A(cur)
        p2 = _B_jvp(st, v1, theta, p1)
        if du_mid is not None:
            p2 = p2 - 1j * dt * np.tensordot(du_mid[k], params.V, axes=1) * out
        cur = st.C(st.A(p2), k)
        if Psi is not None:
            cur = cur - 0.5 * dt * Psi[k + 1]
        psi[k + 1] = cur
    return forward.with_values(psi, kind="tangent")


@dataclass
class AdjointState:
    """Backward solution Y on the forward nodes.

    ``control_term[k]`` is G(t_k) = Im ∫ V X conj(Y) dx, so that
    η = 2(γ2 u - G).  In discrete-adjoint mode G is read off the exact
    reverse sweep instead of the node formula.  Z is never formed.
    """

    Y: Trajectory
    mode: str
    control_term: np.ndarray
    Z: None = None


def _control_term_from_nodes(forward, Y, params):
    g = forward.grid
    prod = forward.values * np.conj(Y)
    axes = tuple(range(1, prod.ndim))
    return np.stack([np.sum(V * prod.imag, axis=axes) * g.cell for V in params.V], axis=1)


def solve_backward(
    forward: Trajectory,
    params: ModelParams,
    u,
    X_T,
    X_track=None,
    gamma1: float = 0.0,
    mode: str = "discrete-adjoint",
    trunc: TruncationLevel | None = None,
    phase=None,
) -> AdjointState:
    if mode not in ("continuous", "discrete-adjoint"):
        raise ValueError(f"unknown adjoint mode {mode!r}")
    if mode == "continuous" and phase is not None and not phase.model.constant_profiles:
        raise UnsupportedModeError("continuous backward mode needs constant noise profiles")
    if mode == "discrete-adjoint" and trunc is not None:
        raise UnsupportedModeError("truncated coefficients are only available in continuous mode")
    st = _stepper_for(forward, params, u, phase)
    X = forward.values
    X_T = np.asarray(X_T, dtype=complex)
    track = _node_array(X_track, forward) if gamma1 else None
    M, dt = st.M, st.dt
    Y = np.empty_like(X)
    Y[M] = -(X[M] - X_T)
    if mode == "continuous":
        cur = Y[M].copy()
        for k in range(M - 1, -1, -1):
            if track is not None:
                cur = cur - 0.5 * dt * gamma1 * (X[k + 1] - track[k + 1])
            cur = st.A_adj(st.C_adj(cur, k))
            v1 = st.A(X[k])
            theta = st.theta(v1, k)
            lin = linearize(v1 * np.exp(0.5j * theta), params.alpha, trunc)
            q = params.lam * lin.h1 + st.potential(k)
            cur = apply_real_linear(cur, q, params.lam * lin.h2, -dt)
            cur = st.A_adj(cur)
            if track is not None:
                cur = cur - 0.5 * dt * gamma1 * (X[k] - track[k])
            Y[k] = cur
        G = _control_term_from_nodes(forward, Y, params)
        return AdjointState(forward.with_values(Y, kind="adjoint"), mode, G)

    # discrete adjoint: cotangents lam with dΦ = Re<δX, lam>, and Y = -lam/2
    w_nodes = trapezoid_weights(forward.times)
    sens = np.zeros((M, params.m))
    lam_store = -2.0 * Y[M]
    lam_total = lam_store.copy()
    if track is not None:
        lam_total = lam_total + gamma1 * dt * (X[M] - track[M])
    cell = forward.grid.cell
    axes = tuple(range(X[0].ndim))
    for k in range(M - 1, -1, -1):
        w = st.A_adj(st.C_adj(lam_total, k))
        v1 = st.A(X[k])
        theta = st.theta(v1, k)
        out = v1 * np.exp(1j * theta)
        im = np.imag(out * np.conj(w))
        sens[k] = dt * cell * np.array([np.sum(V * im, axis=axes) for V in params.V])
        lam_store = st.A_adj(_B_vjp(st, v1, theta, w))
        if track is not None:
            lam_store = lam_store + gamma1 * dt * (X[k] - track[k])
            lam_total = lam_store + (gamma1 * dt * (X[k] - track[k]) if k > 0 else 0)
        else:
            lam_total = lam_store
        Y[k] = -0.5 * lam_store
    dstate = np.zeros((M + 1, params.m))
    dstate[:-1] += 0.5 * sens
    dstate[1:] += 0.5 * sens
    G = -dstate / (2 * w_nodes[:, None])
    return AdjointState(forward.with_values(Y, kind="adjoint"), mode, G)


def smoothness_gradient(u_nodes, times, gamma3):
    """L^2 gradient of γ3 Σ |Δu_k/Δt|^2 Δt, nodewise."""
    u = np.asarray(u_nodes, float)
    if gamma3 == 0:
        return np.zeros_like(u)
    h = np.diff(times)[:, None]
    flux = 2 * gamma3 * np.diff(u, axis=0) / h
    g = np.zeros_like(u)
    g[:-1] -= flux
    g[1:] += flux
    return g / trapezoid_weights(times)[:, None]


def gradient_eta(u, forward, adjoint, gamma2: float, gamma3: float = 0.0):
    """η = 2(γ2 u - G) (+ the γ3 term); Monte Carlo lists are averaged over paths."""
    u_nodes = _as_control(u)
    adjoints = adjoint if isinstance(adjoint, (list, tuple)) else [adjoint]
    G = np.mean([a.control_term for a in adjoints], axis=0)
    times = forward[0].times if isinstance(forward, (list, tuple)) else forward.times
    return 2 * (gamma2 * u_nodes - G) + smoothness_gradient(u_nodes, times, gamma3)


def dual_functional(forward: Trajectory, psi: Trajectory, X_T, X_track=None, gamma1: float = 0.0) -> float:
    """Re<X(T) - X_T, ψ(T)> + γ1 ∫ Re<X - X_track, ψ> dt (trapezoid)."""
    g = forward.grid
    val = g.inner(forward.values[-1] - X_T, psi.values[-1]).real
    if gamma1:
        track = _node_array(X_track, forward)
        w = trapezoid_weights(forward.times)
        val += gamma1 * sum(wk * g.inner(x - t, p).real for wk, x, t, p in zip(w, forward.values, track, psi.values))
    return float(val)


def duality_pairing(source, Y: Trajectory) -> float:
    """∫ Re<Ψ, Y> dt by the trapezoid rule."""
    Psi = _node_array(source, Y)
    w = trapezoid_weights(Y.times)
    return float(sum(wk * Y.grid.inner(p, y).real for wk, p, y in zip(w, Psi, Y.values)))
