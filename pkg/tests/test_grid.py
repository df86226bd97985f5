import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlscontrol.grid import (
    ComplexField,
    GridMismatchError,
    InvalidFieldError,
    SpatialGrid,
    free_propagate,
    l2_inner,
    lp_norm,
)


def field(grid, values):
    return ComplexField(grid, np.asarray(values, dtype=complex))


def random_values(grid, seed):
    r = np.random.default_rng(seed)
    return r.normal(size=grid.shape) + 1j * r.normal(size=grid.shape)


@pytest.mark.parametrize("n", [6, 12, 4])
def test_grid_rejects_bad_resolution(n):
    with pytest.raises(ValueError):
        SpatialGrid(1, n, 1.0)


def test_grid_rejects_bad_dimension_and_length():
    with pytest.raises(ValueError):
        SpatialGrid(3, 8, 1.0)
    with pytest.raises(ValueError):
        SpatialGrid(1, 8, 0.0)


def test_zero_field_norm():
    g = SpatialGrid(1, 32, 5.0)
    assert lp_norm(field(g, g.zeros()), 2) == 0.0


def test_constant_field_norm_on_2pi():
    g = SpatialGrid(1, 64, 2 * np.pi)
    assert lp_norm(field(g, np.ones(g.shape)), 2) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-14)


def test_gaussian_l2_norm_matches_closed_form():
    # |e^{-x^2}|_{L^2}^2 = sqrt(pi/2); the periodic trapezoid rule is spectrally accurate
    g = SpatialGrid(1, 256, 40.0)
    x = g.axes[0] - g.center
    assert lp_norm(field(g, np.exp(-(x**2))), 2) == pytest.approx((np.pi / 2) ** 0.25, abs=1e-8)


def test_linf_norm_and_non_finite():
    g = SpatialGrid(1, 16, 1.0)
    v = np.zeros(g.shape, complex)
    v[3] = 2 - 1j
    assert lp_norm(field(g, v), np.inf) == pytest.approx(np.sqrt(5))
    v[4] = np.nan
    with pytest.raises(InvalidFieldError):
        ComplexField(g, v)


def test_field_length_must_match():
    with pytest.raises(GridMismatchError):
        ComplexField(SpatialGrid(1, 16, 1.0), np.zeros(8))


def test_inner_product_basics():
    g = SpatialGrid(1, 64, 2 * np.pi)
    f = field(g, random_values(g, 0))
    ff = l2_inner(f, f)
    assert abs(ff.imag) <= 1e-12 * abs(ff)
    assert ff.real == pytest.approx(lp_norm(f, 2) ** 2, rel=1e-12)
    x = g.axes[0]
    e3, e5 = field(g, np.exp(3j * x)), field(g, np.exp(5j * x))
    assert abs(l2_inner(e3, e5)) < 1e-10


def test_inner_grid_mismatch():
    a = field(SpatialGrid(1, 16, 1.0), np.ones(16))
    b = field(SpatialGrid(1, 16, 2.0), np.ones(16))
    with pytest.raises(GridMismatchError):
        l2_inner(a, b)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_inner_conjugate_symmetry(s1, s2):
    g = SpatialGrid(1, 32, 3.0)
    f, h = field(g, random_values(g, s1)), field(g, random_values(g, s2))
    assert l2_inner(f, h) == pytest.approx(np.conj(l2_inner(h, f)), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("d", [1, 2])
def test_parseval(d):
    g = SpatialGrid(d, 16, 7.0)
    v = random_values(g, 3)
    lhs = lp_norm(field(g, v), 2) ** 2
    rhs = np.sum(np.abs(g.fft(v)) ** 2) * g.parseval_constant()
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_free_propagate_identity_and_plane_wave():
    g = SpatialGrid(1, 64, 2 * np.pi)
    x = g.axes[0]
    f = field(g, random_values(g, 1))
    np.testing.assert_allclose(free_propagate(f, 0.0).values, f.values, atol=1e-14)
    k, t = 4, 0.37
    out = free_propagate(field(g, np.exp(1j * k * x)), t).values
    np.testing.assert_allclose(out, np.exp(1j * k * x) * np.exp(1j * k**2 * t), atol=1e-12)


def test_free_propagate_solves_schrodinger_with_i_dt_equals_laplacian():
    g = SpatialGrid(1, 64, 2 * np.pi)
    v = random_values(g, 2) * np.exp(-((g.axes[0] - np.pi) ** 2))
    h = 1e-6
    dvdt = (g.propagate(v, h) - g.propagate(v, -h)) / (2 * h)
    np.testing.assert_allclose(1j * dvdt, g.laplacian(v), atol=1e-5 * np.max(np.abs(g.laplacian(v))))


@given(st.floats(0, 10), st.floats(0, 10))
@settings(max_examples=25, deadline=None)
def test_group_law_and_unitarity(t, s):
    g = SpatialGrid(1, 32, 5.0)
    f = field(g, random_values(g, 4))
    h = field(g, random_values(g, 5))
    a = free_propagate(free_propagate(f, t), s).values
    np.testing.assert_allclose(a, free_propagate(f, t + s).values, atol=1e-12 * np.max(np.abs(f.values)) * 10)
    assert lp_norm(free_propagate(f, t), 2) == pytest.approx(lp_norm(f, 2), rel=1e-12)
    lhs = l2_inner(free_propagate(f, t), free_propagate(h, t))
    assert abs(lhs - l2_inner(f, h)) <= 1e-10 * max(1.0, abs(l2_inner(f, h)))


def test_two_dimensional_laplacian_of_mode():
    g = SpatialGrid(2, 16, 2 * np.pi)
    x, y = g.axes
    v = np.exp(1j * (2 * x + 3 * y))
    np.testing.assert_allclose(g.laplacian(v), -13 * v, atol=1e-10)
