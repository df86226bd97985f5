"""Objective functional, admissible-set projection and the optimization drivers."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .adjoint import gradient_eta, solve_backward
from .controls import AdmissibleSet, ControlPath, InadmissibleControlError, project_K
from .forward import ModelParams, solve_forward
from .grid import SpatialGrid
from .norms import trapezoid_weights
from .stochastic import NoiseModel, PhaseField, WienerPath

__all__ = [
    "ObjectiveWeights",
    "TargetData",
    "ControlProblem",
    "RunReport",
    "objective",
    "objective_and_gradient",
    "optimality_residual",
    "optimize",
    "project_K",
]


@dataclass(frozen=True)
class ObjectiveWeights:
    gamma1: float = 0.0
    gamma2: float = 1.0
    gamma3: float = 0.0

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma3 < 0:
            raise ValueError("gamma1 and gamma3 must be non-negative")
        if not self.gamma2 > 0:
            raise ValueError("gamma2 must be strictly positive")


@dataclass
class TargetData:
    """Terminal target X_T and (optional) tracking target on the solver nodes."""

    X_T: np.ndarray
    X_track: np.ndarray | None = None


@dataclass
class ControlProblem:
    grid: SpatialGrid
    X0: np.ndarray
    params: ModelParams
    K: AdmissibleSet
    T: float
    M: int
    targets: TargetData
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    noise: NoiseModel | None = None
    paths: list[WienerPath] | None = None
    adjoint_mode: str = "discrete-adjoint"

    def __post_init__(self):
        shape = self.grid.shape
        if np.shape(self.X0) != shape or np.shape(self.targets.X_T) != shape:
            raise ValueError("initial state and terminal target must live on the state grid")
        if self.targets.X_track is not None and np.shape(self.targets.X_track) != (self.M + 1,) + shape:
            raise ValueError("tracking target must hold one field per time node")
        if self.weights.gamma1 > 0 and self.targets.X_track is None:
            raise ValueError("gamma1 > 0 needs a tracking target")
        if self.K.m != self.params.m:
            raise ValueError("admissible set and potentials disagree on the control dimension")
        if self.paths is not None and self.noise is None:
            raise ValueError("paths given without a noise model")
        self._phases = None

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M + 1)

    @property
    def weights_t(self) -> np.ndarray:
        return trapezoid_weights(self.times)

    def phases(self):
        """One PhaseField per frozen path (common random numbers), or [None]."""
        if self.paths is None:
            return [None]
        if self._phases is None:
            self._phases = [PhaseField(self.noise, p, self.grid) for p in self.paths]
        return self._phases

    def control(self, values) -> ControlPath:
        return ControlPath(self.times, values, self.K)


def _control_values(u, problem):
    values = u.values if isinstance(u, ControlPath) else np.asarray(u, float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape != (problem.M + 1, problem.params.m):
        raise ValueError(f"control shape {values.shape} != {(problem.M + 1, problem.params.m)}")
    if not problem.K.contains(values):
        raise InadmissibleControlError("control leaves the admissible set")
    return values


def _control_costs(u, problem):
    w = problem.weights_t
    wts = problem.weights
    energy = wts.gamma2 * float(np.sum(w * np.sum(u**2, axis=1)))
    smooth = 0.0
    if wts.gamma3:
        smooth = wts.gamma3 * float(np.sum(np.diff(u, axis=0) ** 2) / (problem.T / problem.M))
    return energy, smooth


def _state_costs(X, problem):
    g = problem.grid
    terminal = g.norm(X[-1] - problem.targets.X_T) ** 2
    tracking = 0.0
    if problem.weights.gamma1:
        diff = X - problem.targets.X_track
        axes = tuple(range(1, diff.ndim))
        per_t = np.sum(np.abs(diff) ** 2, axis=axes) * g.cell
        tracking = problem.weights.gamma1 * float(np.sum(problem.weights_t * per_t))
    return terminal, tracking


def objective(u, problem: ControlProblem):
    """Sample-mean cost over the problem's frozen paths.

    Returns (Φ, breakdown) where breakdown has the terminal, tracking, energy
    and smoothness parts, the per-path state costs and their standard error.
    """
    values = _control_values(u, problem)
    per_path = []
    parts = []
    for phase in problem.phases():
        X = solve_forward(problem.X0, problem.params, values, phase, T=problem.T, grid=problem.grid).values
        term, track = _state_costs(X, problem)
        parts.append((term, track))
        per_path.append(term + track)
    return _summarize(values, problem, parts, per_path)


def _summarize(values, problem, parts, per_path):
    energy, smooth = _control_costs(values, problem)
    per_path = np.asarray(per_path)
    parts = np.asarray(parts)
    stderr = float(per_path.std(ddof=1) / np.sqrt(len(per_path))) if len(per_path) > 1 else 0.0
    phi = float(per_path.mean()) + energy + smooth
    breakdown = {
        "terminal": float(parts[:, 0].mean()),
        "tracking": float(parts[:, 1].mean()),
        "energy": energy,
        "smoothness": smooth,
        "per_path": per_path.tolist(),
        "stderr": stderr,
    }
    return phi, breakdown


def objective_and_gradient(u, problem: ControlProblem):
    """Φ, breakdown, η and the averaged G = Im ∫ V X conj(Y) dx."""
    values = _control_values(u, problem)
    parts, per_path, adjoints, forwards = [], [], [], []
    for phase in problem.phases():
        fw = solve_forward(problem.X0, problem.params, values, phase, T=problem.T, grid=problem.grid)
        term, track = _state_costs(fw.values, problem)
        parts.append((term, track))
        per_path.append(term + track)
        adj = solve_backward(
            fw,
            problem.params,
            values,
            problem.targets.X_T,
            problem.targets.X_track,
            problem.weights.gamma1,
            mode=problem.adjoint_mode,
            phase=phase,
        )
        adjoints.append(adj)
        forwards.append(fw)
    phi, breakdown = _summarize(values, problem, parts, per_path)
    wts = problem.weights
    eta = gradient_eta(values, forwards, adjoints, wts.gamma2, wts.gamma3)
    G = np.mean([a.control_term for a in adjoints], axis=0)
    return phi, breakdown, eta, G


def _l2(values, w):
    return float(np.sqrt(np.sum(w * np.sum(np.asarray(values) ** 2, axis=1))))


def optimality_residual(u, adjoint, gamma2: float, K: AdmissibleSet, times=None) -> float:
    """‖u - P_K(G/γ2)‖_{L^2(0,T)} with G = Im ∫ V X conj(Y) dx averaged over paths.

    ``adjoint`` is an AdjointState, a list of them, or the G array itself.
    """
    if isinstance(adjoint, np.ndarray):
        G = adjoint
        if times is None:
            raise ValueError("times required when G is passed directly")
    else:
        adjoints = adjoint if isinstance(adjoint, (list, tuple)) else [adjoint]
        G = np.mean([a.control_term for a in adjoints], axis=0)
        times = adjoints[0].Y.times if times is None else times
    u = u.values if isinstance(u, ControlPath) else np.asarray(u, float)
    if u.ndim == 1:
        u = u[:, None]
    return _l2(u - K.project(G / gamma2), trapezoid_weights(times))


def _residual(values, eta, problem):
    """Projected-gradient residual ‖u - P_K(u - η/(2γ2))‖, equal to the
    fixed-point defect ‖u - P_K(G/γ2)‖ when γ3 = 0."""
    g2 = problem.weights.gamma2
    return _l2(values - problem.K.project(values - eta / (2 * g2)), problem.weights_t)


@dataclass
class RunReport:
    method: str
    status: str
    iterations: list = field(default_factory=list)
    control: list = field(default_factory=list)
    phi: float = float("nan")
    grad_norm: float = float("nan")
    residual: float = float("nan")
    step: float = float("nan")
    mc: dict = field(default_factory=dict)
    config: dict | None = None

    @property
    def phi_history(self):
        return [it["phi"] for it in self.iterations]

    @property
    def residual_history(self):
        return [it["residual"] for it in self.iterations]

    def final_control(self):
        return np.asarray(self.control, float)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, **kw)


def optimize(
    u0,
    problem: ControlProblem,
    method: str = "pgd",
    theta: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 200,
    step0: float | None = None,
    armijo: float = 1e-4,
    max_backtracks: int = 40,
) -> RunReport:
    """Minimize Φ over K.

    ``pgd``: u <- P_K(u - s η/2) with Armijo backtracking on Φ; the trial step
    starts from twice the last accepted one.  ``fixed-point``: damped
    iteration u <- (1-θ) u + θ P_K(G/γ2), only for γ3 = 0.
    Both stop once the residual r(u) drops to ``tol``.
    """
    if method not in ("pgd", "fixed-point"):
        raise ValueError(f"unknown method {method!r}")
    if method == "fixed-point" and problem.weights.gamma3:
        raise ValueError("the fixed-point iteration needs gamma3 = 0")
    if method == "fixed-point" and not 0 < theta <= 1:
        raise ValueError("damping theta must lie in (0, 1]")
    u = _control_values(u0, problem).copy()
    w = problem.weights_t
    g2 = problem.weights.gamma2
    s_max = 16.0 / g2
    s = step0 if step0 is not None else 1.0 / g2
    mc = {"paths": 0 if problem.paths is None else len(problem.paths)}
    if problem.paths is not None:
        mc["seeds"] = [int(p.seed) for p in problem.paths]
    report = RunReport(method=method, status="max_iter", mc=mc)

    phi, _, eta, G = objective_and_gradient(u, problem)
    step = 0.0
    for it in range(max_iter + 1):
        r = _residual(u, eta, problem)
        report.iterations.append(
            {"iter": it, "phi": phi, "grad_norm": _l2(eta, w), "residual": r, "step": step}
        )
        if r <= tol:
            report.status = "converged"
            break
        if it == max_iter:
            break
        if method == "fixed-point":
            u = (1 - theta) * u + theta * problem.K.project(G / g2)
            step = theta
            phi, _, eta, G = objective_and_gradient(u, problem)
            continue
        accepted = False
        for _ in range(max_backtracks):
            trial = problem.K.project(u - 0.5 * s * eta)
            decrease = float(np.sum(w * np.sum(eta * (trial - u), axis=1)))
            phi_trial, _ = objective(trial, problem)
            if phi_trial <= phi + armijo * decrease:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            report.status = "stalled"
            break
        u, step = trial, s
        s = min(2 * s, s_max)
        phi, _, eta, G = objective_and_gradient(u, problem)

    last = report.iterations[-1]
    report.phi, report.grad_norm, report.residual, report.step = last["phi"], last["grad_norm"], last["residual"], last["step"]
    report.control = u.tolist()
    return report
