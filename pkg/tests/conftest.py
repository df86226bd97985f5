import numpy as np
import pytest

from nlscontrol import AdmissibleSet, ControlProblem, ModelParams, ObjectiveWeights, SpatialGrid, TargetData, solve_forward


def small_problem(M=40, gamma1=0.7, gamma2=0.1, gamma3=0.0, n=64, L=20.0, terminal_u=0.6):
    """Deterministic cubic defocusing tracking problem on a coarse grid."""
    grid = SpatialGrid(1, n, L)
    X0 = grid.gaussian(width=1.0, center=9.0, kick=0.5)
    V = grid.gaussian(width=1.5, center=11.0, amplitude=2.0).real
    params = ModelParams(-1, 3.0, np.zeros(grid.shape), V[None])
    T = 1.0
    times = np.linspace(0, T, M + 1)
    u_t = terminal_u * np.sin(np.pi * times)[:, None]
    X_T = solve_forward(X0, params, u_t, T=T, grid=grid).values[-1]
    X_track = solve_forward(X0, params, np.zeros((M + 1, 1)), T=T, grid=grid).values
    return ControlProblem(
        grid, X0, params, AdmissibleSet.box([-1.0], [1.0]), T, M,
        TargetData(X_T, X_track if gamma1 else None),
        ObjectiveWeights(gamma1, gamma2, gamma3),
    )


@pytest.fixture
def problem():
    return small_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
