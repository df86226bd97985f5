import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_problem
from nlscontrol import NoiseModel, PhaseField, Profile, sample_path, solve_forward
from nlscontrol.adjoint import (
    TruncationLevel,
    UnsupportedModeError,
    apply_real_linear,
    cutoff,
    dual_functional,
    duality_pairing,
    gradient_eta,
    linearize,
    smoothness_gradient,
    solve_backward,
    solve_variational,
)
from nlscontrol.optimize import objective, objective_and_gradient
from nlscontrol.studies import fitted_slope, gradient_check


def interior_control(pr, amp=0.3):
    return amp * np.cos(np.pi * pr.times)[:, None]


def smooth_source(pr, seed):
    r = np.random.default_rng(seed)
    x = pr.grid.axes[0]
    c = r.normal(size=(2, 2)) @ np.array([1, 1j])
    return np.stack(
        [c[0] * np.cos(np.pi * t) * np.exp(-((x - 10) ** 2)) + c[1] * t * np.exp(-((x - 8) ** 2) / 2) for t in pr.times]
    )


# --- linearization coefficients -------------------------------------------


def test_linearize_cubic_unit():
    lin = linearize(np.ones(8, complex), 3.0)
    np.testing.assert_allclose(lin.h1, 2.0)
    np.testing.assert_allclose(lin.h2, 1.0)


def test_linearize_vanishes_at_zero():
    lin = linearize(np.zeros(4, complex), 2.5)
    assert np.all(lin.h1 == 0) and np.all(lin.h2 == 0)


@pytest.mark.parametrize("alpha", [2.0, 3.0, 4.2])
def test_wirtinger_derivatives_by_finite_differences(alpha):
    r = np.random.default_rng(1)
    z = r.normal(size=20) + 1j * r.normal(size=20)
    w = r.normal(size=20) + 1j * r.normal(size=20)
    F = lambda v: np.abs(v) ** (alpha - 1) * v
    lin = linearize(z, alpha)
    errs = []
    for eps in (1e-3, 1e-4):
        errs.append(np.max(np.abs(F(z + eps * w) - F(z) - eps * (lin.h1 * w + lin.h2 * np.conj(w)))))
    # remainder is O(eps^2): shrinking eps tenfold shrinks it about a hundredfold
    assert errs[1] / errs[0] < 0.02


@given(st.floats(1.01, 5.0), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_h2_bounded_by_h1(alpha, seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=16) + 1j * r.normal(size=16)
    X[0] = 0
    lin = linearize(X, alpha)
    assert np.all(np.abs(lin.h2) <= lin.h1 + 1e-15)


def test_cutoff_shape_and_truncation_bound():
    r = np.linspace(0, 3, 301)
    g = cutoff(r)
    assert np.all(g[r <= 1] == 1) and np.all(g[r >= 2] == 0)
    assert np.all(np.diff(g) <= 0)
    alpha, n = 3.0, 1.5
    X = np.linspace(0, 5, 200) * np.exp(0.3j)
    lin = linearize(X, alpha, TruncationLevel(n))
    assert np.all(np.abs(lin.h1) + np.abs(lin.h2) <= alpha * 2 ** (alpha - 1) * n ** (alpha - 1))
    with pytest.raises(ValueError):
        TruncationLevel(0.0)


def test_real_linear_exponential_against_expm():
    r = np.random.default_rng(2)
    for q, sig in [(0.7, 0.3 + 0.2j), (0.2, 1.1 - 0.4j), (0.5, 0.5 + 0j)]:
        G = np.array([[-sig.imag, q + sig.real], [sig.real - q, sig.imag]])
        z = r.normal() + 1j * r.normal()
        tau = 0.37
        # Taylor series of exp(tau G)
        E, term = np.eye(2), np.eye(2)
        for k in range(1, 40):
            term = term @ (tau * G) / k
            E = E + term
        ref = E @ np.array([z.real, z.imag])
        out = apply_real_linear(np.array([z]), np.array([q]), np.array([sig]), tau)[0]
        assert out == pytest.approx(ref[0] + 1j * ref[1], abs=1e-13)


# --- variational equation ------------------------------------------------


@pytest.fixture(scope="module")
def setup():
    pr = small_problem(M=40)
    u = interior_control(pr)
    fw = solve_forward(pr.X0, pr.params, u, T=pr.T, grid=pr.grid)
    return pr, u, fw


def test_zero_source_zero_tangent(setup):
    pr, u, fw = setup
    psi = solve_variational(fw, pr.params, u, np.zeros_like(fw.values))
    assert np.all(psi.values == 0)


def test_tangent_is_real_linear(setup):
    pr, u, fw = setup
    P1, P2 = smooth_source(pr, 1), smooth_source(pr, 2)
    a = solve_variational(fw, pr.params, u, P1).values
    b = solve_variational(fw, pr.params, u, P2).values
    ab = solve_variational(fw, pr.params, u, 1.5 * P1 - 0.5 * P2).values
    scale = np.max(np.abs(a)) + np.max(np.abs(b))
    np.testing.assert_allclose(ab, 1.5 * a - 0.5 * b, atol=1e-12 * scale)
    np.testing.assert_allclose(solve_variational(fw, pr.params, u, 2 * P1).values, 2 * a, atol=1e-12 * scale)


def test_first_order_expansion(setup):
    pr, u, fw = setup
    du = np.sin(2 * np.pi * pr.times)[:, None]
    phi = solve_variational(fw, pr.params, u, control_direction=du).values
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    errs = []
    for e in eps:
        Xe = solve_forward(pr.X0, pr.params, u + e * du, T=pr.T, grid=pr.grid).values
        errs.append(max(pr.grid.norm(d) for d in (Xe - fw.values) / e - phi))
    assert abs(fitted_slope(eps, errs) - 1) <= 0.2


# --- backward equation ---------------------------------------------------


@pytest.mark.parametrize("mode", ["continuous", "discrete-adjoint"])
def test_zero_data_zero_adjoint(setup, mode):
    pr, u, fw = setup
    adj = solve_backward(fw, pr.params, u, fw.values[-1], mode=mode)
    assert np.all(adj.Y.values == 0)
    assert adj.Z is None


@pytest.mark.parametrize("mode", ["continuous", "discrete-adjoint"])
def test_terminal_condition_exact(setup, mode):
    pr, u, fw = setup
    adj = solve_backward(fw, pr.params, u, pr.targets.X_T, pr.targets.X_track, 0.7, mode=mode)
    np.testing.assert_array_equal(adj.Y.values[-1], -(fw.values[-1] - pr.targets.X_T))
    assert np.max(np.abs(adj.Y.values[-1] + fw.values[-1] - pr.targets.X_T)) <= 1e-16


@pytest.mark.parametrize("mode", ["continuous", "discrete-adjoint"])
def test_duality_coarse(setup, mode):
    pr, u, fw = setup
    Psi = smooth_source(pr, 3)
    psi = solve_variational(fw, pr.params, u, Psi)
    lam = dual_functional(fw, psi, pr.targets.X_T, pr.targets.X_track, pr.weights.gamma1)
    Y = solve_backward(fw, pr.params, u, pr.targets.X_T, pr.targets.X_track, pr.weights.gamma1, mode=mode).Y
    assert abs(duality_pairing(Psi, Y) - lam) <= 1e-3 * abs(lam)


def test_unsupported_modes(setup):
    pr, u, fw = setup
    with pytest.raises(UnsupportedModeError):
        solve_backward(fw, pr.params, u, pr.targets.X_T, trunc=TruncationLevel(5.0))
    model = NoiseModel([0.3j], [Profile("bump", 1.0, 10.0, 2.0)])
    ph = PhaseField(model, sample_path(model, pr.T, pr.M, 1), pr.grid)
    fw_s = solve_forward(pr.X0, pr.params, u, ph, T=pr.T, grid=pr.grid)
    with pytest.raises(UnsupportedModeError):
        solve_backward(fw_s, pr.params, u, pr.targets.X_T, mode="continuous", phase=ph)
    # the discrete adjoint handles any profile
    solve_backward(fw_s, pr.params, u, pr.targets.X_T, phase=ph)
    with pytest.raises(ValueError):
        solve_backward(fw, pr.params, u, pr.targets.X_T, mode="euler")


def test_truncation_inactive_above_twice_the_sup(setup):
    pr, u, fw = setup
    peak = np.max(np.abs(fw.values))
    args = (fw, pr.params, u, pr.targets.X_T, pr.targets.X_track, 0.7)
    G = solve_backward(*args, mode="continuous").control_term
    Gn = solve_backward(*args, mode="continuous", trunc=TruncationLevel(2.01 * peak)).control_term
    assert np.max(np.abs(G - Gn)) <= 1e-6
    Gs = solve_backward(*args, mode="continuous", trunc=TruncationLevel(0.3 * peak)).control_term
    assert np.max(np.abs(G - Gs)) > 1e-6


# --- gradient ------------------------------------------------------------


def test_eta_without_coupling(setup):
    pr, u, fw = setup
    adj = solve_backward(fw, pr.params, u, pr.targets.X_T)
    adj.control_term[:] = 0.0
    np.testing.assert_allclose(gradient_eta(u, fw, adj, 0.1), 0.2 * u)
    p0 = small_problem(M=40)
    p0.params.V[:] = 0.0
    fw0 = solve_forward(p0.X0, p0.params, u, T=p0.T, grid=p0.grid)
    for mode in ("continuous", "discrete-adjoint"):
        adj0 = solve_backward(fw0, p0.params, u, p0.targets.X_T, mode=mode)
        np.testing.assert_allclose(gradient_eta(u, fw0, adj0, 0.1), 0.2 * u, atol=1e-15)


def test_adjoint_gradient_matches_finite_differences(setup):
    pr, u, _ = setup
    rows = gradient_check(pr, u, eps=1e-5, nodes=[0, 1, 7, 20, 33, 39, 40])
    assert max(r[-1] for r in rows) <= 1e-7


def test_directional_derivative(setup):
    pr, u, _ = setup
    du = np.sin(3 * np.pi * pr.times)[:, None]
    phi, _, eta, _ = objective_and_gradient(u, pr)
    eps = 1e-5
    fd = (objective(u + eps * du, pr)[0] - objective(u - eps * du, pr)[0]) / (2 * eps)
    pred = float(np.sum(pr.weights_t * np.sum(eta * du, axis=1)))
    assert abs(fd - pred) <= 1e-5 * max(1.0, abs(phi))


def test_smoothness_gradient_finite_differences():
    pr = small_problem(M=20, gamma3=0.05)
    u = interior_control(pr)
    phi, _, eta, _ = objective_and_gradient(u, pr)
    k, eps = 7, 1e-5
    e = np.zeros_like(u)
    e[k] = eps
    fd = (objective(u + e, pr)[0] - objective(u - e, pr)[0]) / (2 * eps) / pr.weights_t[k]
    assert eta[k, 0] == pytest.approx(fd, rel=1e-7)
    assert np.all(smoothness_gradient(np.ones((5, 1)), np.linspace(0, 1, 5), 1.0) == 0)


def test_continuous_gradient_converges_to_discrete():
    errs, dts = [], []
    for M in (40, 80, 160, 320):
        pr = small_problem(M=M)
        u = interior_control(pr)
        fw = solve_forward(pr.X0, pr.params, u, T=pr.T, grid=pr.grid)
        args = (fw, pr.params, u, pr.targets.X_T, pr.targets.X_track, pr.weights.gamma1)
        Gc = solve_backward(*args, mode="continuous").control_term
        Gd = solve_backward(*args, mode="discrete-adjoint").control_term
        errs.append(np.sqrt(np.sum(pr.weights_t * np.sum((Gc - Gd) ** 2, axis=1))))
        dts.append(pr.T / M)
    assert fitted_slope(dts, errs) >= 1.0


def test_stochastic_gradient_matches_finite_differences():
    pr = small_problem(M=30)
    model = NoiseModel([0.3j], [Profile("bump", 1.0, 10.0, 2.0)])
    from nlscontrol.stochastic import sample_paths

    pr.noise = model
    pr.paths = sample_paths(model, pr.T, pr.M, 2, 5)
    pr.targets.X_track = None
    pr.weights = type(pr.weights)(0.0, 0.1, 0.0)
    u = interior_control(pr)
    rows = gradient_check(pr, u, eps=1e-5, nodes=[0, 11, 30])
    assert max(r[-1] for r in rows) <= 1e-7
