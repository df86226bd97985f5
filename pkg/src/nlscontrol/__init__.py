"""Split-step solvers, adjoint gradients and optimal bilinear control for
(stochastic) nonlinear Schrödinger equations on a periodic box."""

from .adjoint import (
    AdjointState,
    Linearization,
    TruncationLevel,
    gradient_eta,
    linearize,
    solve_backward,
    solve_variational,
)
from .controls import AdmissibleSet, ControlPath, project_K
from .forward import BlowUpError, ModelParams, rescaled_view, solve_forward
from .grid import ComplexField, SpatialGrid, free_propagate, l2_inner, lp_norm
from .norms import NormSpec, trajectory_norm
from .optimize import (
    ControlProblem,
    ObjectiveWeights,
    RunReport,
    TargetData,
    objective,
    optimality_residual,
    optimize,
)
from .stochastic import NoiseModel, PhaseField, Profile, WienerPath, gauge_factor, lower_order_coeffs, sample_path
from .trajectory import Trajectory
from .variation import GaugeSpec, SampledPath, besov_embedding_check, temporal_regularity, vp_norm

__version__ = "0.1.0"
