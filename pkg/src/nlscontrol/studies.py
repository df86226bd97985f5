"""Numerical studies built from the solvers: gradient checks, refinement and stability sweeps."""

from __future__ import annotations

import numpy as np

from .forward import ModelParams, solve_forward
from .norms import trapezoid_weights
from .optimize import ControlProblem, objective, objective_and_gradient
from .stochastic import PhaseField, WienerPath


def gradient_check(problem: ControlProblem, u, eps=1e-5, nodes=None):
    """Adjoint L^2 gradient against central differences of the discrete Φ.

    Returns rows (node, t, adjoint, finite_difference, abs_err, rel_err).
    Perturbed controls must stay inside K.
    """
    u = np.asarray(u, float)
    _, _, eta, _ = objective_and_gradient(u, problem)
    w = problem.weights_t
    M = problem.M
    if nodes is None:
        nodes = range(M + 1)
    rows = []
    for k in nodes:
        for j in range(u.shape[1]):
            e = np.zeros_like(u)
            e[k, j] = eps
            fp, _ = objective(u + e, problem)
            fm, _ = objective(u - e, problem)
            fd = (fp - fm) / (2 * eps) / w[k]
            err = abs(eta[k, j] - fd)
            rows.append((k, float(problem.times[k]), float(eta[k, j]), float(fd), err, err / max(abs(fd), 1e-300)))
    return rows


def observed_order(errors, ratio=2.0) -> np.ndarray:
    """log_ratio(e_l / e_{l+1}) between consecutive refinement levels."""
    e = np.asarray(errors, float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def fitted_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def self_convergence(X0, params: ModelParams, grid, T, control_fn, M0=32, levels=4, phase_fn=None):
    """Terminal-state self-convergence under dt halving.

    ``control_fn(times)`` gives the control on each level; ``phase_fn(M)`` an
    optional PhaseField for nested noise.  Returns (dts, diffs) where diffs[l]
    is ‖X_l(T) - X_{l+1}(T)‖; ``levels`` differences need levels+1 solves.
    """
    finals, dts = [], []
    for lev in range(levels + 1):
        M = M0 * 2**lev
        times = np.linspace(0, T, M + 1)
        phase = phase_fn(M) if phase_fn is not None else None
        traj = solve_forward(X0, params, control_fn(times), phase, T=T, grid=grid)
        finals.append(traj.values[-1])
        dts.append(T / M)
    diffs = [grid.norm(finals[i] - finals[i + 1]) for i in range(levels)]
    return np.array(dts[:levels]), np.array(diffs)


def stability_sweep(X0, params, grid, T, u, direction, phase: PhaseField | None = None, levels=5, delta0=0.2, beta_shape=None):
    """‖X_n - X‖_{L^inf_t L^2_x} as (u_n, β_n) -> (u, β) with the perturbation halved per level.

    u_n = u + δ ũ and β_n = β + δ b(t) with b(t) = sin(π t / T) on every
    channel (or ``beta_shape``).  Rows are (level, delta, size, error) where
    size = ‖u_n - u‖_{L^2(0,T)} + ‖β_n - β‖_inf.
    """
    u = np.asarray(u, float)
    direction = np.asarray(direction, float).reshape(u.shape)
    times = np.linspace(0, T, len(u))
    w = trapezoid_weights(times)
    base = solve_forward(X0, params, u, phase, T=T, grid=grid).values
    b = np.sin(np.pi * times / T) if beta_shape is None else np.asarray(beta_shape, float)
    rows = []
    for lev in range(levels):
        delta = delta0 * 0.5**lev
        un = u + delta * direction
        size = float(np.sqrt(np.sum(w * np.sum((un - u) ** 2, axis=1))))
        ph = None
        if phase is not None:
            path = phase.path
            pert = WienerPath(path.times, path.beta + delta * b[:, None], seed=path.seed, level=path.level)
            ph = PhaseField(phase.model, pert, grid)
            size += float(np.max(np.abs(delta * b)))
        Xn = solve_forward(X0, params, un, ph, T=T, grid=grid).values
        err = max(grid.norm(a - c) for a, c in zip(Xn, base))
        rows.append((lev, delta, size, err))
    return rows
