import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhedge.errors import SingularEvaluationError, SingularQuasiPeriodicityError
from nhedge.green import (
    GreenParams,
    QuasiPeriodicity,
    free_green_2d,
    free_green_gradient,
    oracle_comparison,
    qp_green,
    qp_green_gradient,
    qp_green_regular,
    qp_green_regular_gradient,
    qp_green_spectral,
    reduce_alpha,
)

L = 10.5
coords = st.floats(-8.0, 8.0)
alpha_frac = st.floats(0.02, 0.999).map(lambda f: f * np.pi / L) | st.floats(-0.999, -0.02).map(
    lambda f: f * np.pi / L)


def test_free_green_value_and_singularity():
    assert free_green_2d([1.0, 0.0], [0.0, 0.0]) == 0.0
    assert free_green_2d([np.e, 0.0], [0.0, 0.0]) == pytest.approx(1 / (2 * np.pi))
    with pytest.raises(SingularEvaluationError):
        free_green_2d([1.0, 1.0], [1.0, 1.0])


def test_free_gradient_matches_finite_difference(rng):
    x, y = rng.normal(size=(20, 2)), rng.normal(size=(20, 2)) + 3.0
    h = 1e-6
    g = free_green_gradient(x, y)
    for k, e in enumerate(np.eye(2)):
        fd = (free_green_2d(x + h * e, y) - free_green_2d(x - h * e, y)) / (2 * h)
        np.testing.assert_allclose(g[:, k], fd, rtol=1e-7, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-50, 50), k=st.integers(-5, 5))
def test_reduce_alpha_into_zone(a, k):
    r = reduce_alpha(a, L)
    assert -np.pi / L < r <= np.pi / L + 1e-12
    assert reduce_alpha(a + 2 * np.pi * k / L, L) == pytest.approx(r, abs=1e-9)


def test_zero_alpha_is_singular():
    qp = QuasiPeriodicity(2 * np.pi / L, L)
    assert qp.is_singular
    with pytest.raises(SingularQuasiPeriodicityError):
        qp_green([1.0, 0.5], [0.0, 0.0], qp)


def test_matches_spectral_partial_sum():
    alphas, x, y, fast, slow = oracle_comparison(L, n_points=20, n_terms=20_000, seed=7)
    np.testing.assert_allclose(fast, slow, rtol=1e-9)


def test_on_axis_slow_oracle_converges_towards_accelerated():
    qp = QuasiPeriodicity(0.37 * np.pi / L, L)
    x, y = np.array([2.0, 0.0]), np.array([-1.0, 0.0])
    exact = qp_green(x, y, qp)
    errs = [abs(qp_green_spectral(x, y, qp, n) - exact) for n in (1_000, 10_000, 100_000)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-5 * abs(exact)


@settings(max_examples=30, deadline=None)
@given(x1=coords, x2=st.floats(-2, 2), a=alpha_frac, m=st.integers(-3, 3))
def test_quasiperiodicity(x1, x2, a, m):
    qp = QuasiPeriodicity(a, L)
    x, y = np.array([x1, x2]), np.array([0.3, -0.7])
    if np.hypot(*(x - y)) < 1e-3:
        return
    shifted = qp_green(x + [m * L, 0.0], y, qp)
    np.testing.assert_allclose(shifted, np.exp(1j * a * m * L) * qp_green(x, y, qp), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("eta", [0.08, 0.2, 0.5])
def test_independent_of_ewald_split(eta, rng):
    qp = QuasiPeriodicity(0.61 * np.pi / L, L)
    x, y = rng.uniform(-6, 6, (30, 2)), rng.uniform(-6, 6, (30, 2))
    np.testing.assert_allclose(qp_green(x, y, qp, GreenParams(eta=eta)), qp_green(x, y, qp), rtol=1e-9, atol=1e-12)


def test_gradient_matches_finite_difference(rng):
    qp = QuasiPeriodicity(-0.43 * np.pi / L, L)
    x, y = rng.uniform(-4, 4, (25, 2)), rng.uniform(-4, 4, (25, 2))
    g = qp_green_gradient(x, y, qp)
    h = 1e-5
    for k, e in enumerate(np.eye(2)):
        fd = (qp_green(x + h * e, y, qp) - qp_green(x - h * e, y, qp)) / (2 * h)
        np.testing.assert_allclose(g[..., k], fd, rtol=1e-6, atol=1e-9)


def test_regular_part_is_difference_and_smooth(rng):
    qp = QuasiPeriodicity(0.2 * np.pi / L, L)
    x, y = rng.uniform(-3, 3, (20, 2)), rng.uniform(-3, 3, (20, 2))
    np.testing.assert_allclose(qp_green_regular(x, y, qp) + free_green_2d(x, y), qp_green(x, y, qp), atol=1e-12)
    gr = qp_green_regular_gradient(x, y, qp) + free_green_gradient(x, y)
    np.testing.assert_allclose(gr, qp_green_gradient(x, y, qp), atol=1e-11)
    # finite at coincidence, and continuous there
    z = np.zeros(2)
    near = qp_green_regular(np.array([1e-6, 0.0]), z, qp)
    assert abs(qp_green_regular(z, z, qp) - near) < 1e-6


def test_conjugate_alpha_symmetry(rng):
    a = 0.55 * np.pi / L
    x, y = rng.uniform(-5, 5, (10, 2)), rng.uniform(-5, 5, (10, 2))
    np.testing.assert_allclose(qp_green(x, y, QuasiPeriodicity(-a, L)),
                               np.conj(qp_green(x, y, QuasiPeriodicity(a, L))), rtol=1e-10, atol=1e-12)
