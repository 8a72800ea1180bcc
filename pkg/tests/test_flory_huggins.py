import math

import mpmath
import numpy as np
import pytest
from scipy.optimize import brentq

from tools.errors import ConstructionError, PotentialDomainError, ValidationError
from tools.flory_huggins import (
    GUARD_WIDTH,
    PotentialParams,
    build_modified_potential,
    find_u_theta,
    find_u_theta_report,
    modified_second_derivative,
    modified_values,
    potential_values,
    spinodal_edge,
    w1_values,
    w2_values,
    w_prime,
    w_second,
    w_value,
)

TABLE_U_THETA = [(0.3, 0.997414), (0.5, 0.957504), (0.7, 0.828635), (0.9, 0.525430), (0.95, 0.379485)]


def mp_w(u, theta):
    mpmath.mp.dps = 40
    u = mpmath.mpf(u)
    return theta / 2 * ((1 - u) * mpmath.log(1 - u) + (1 + u) * mpmath.log(1 + u)) + (1 - u * u) / 2


@pytest.mark.parametrize("theta", [0.3, 0.7, 0.95])
def test_w_matches_high_precision(theta):
    for u in (-0.999, -0.5, -1e-3, 0.2, 0.8, 0.9999):
        assert w_value(u, PotentialParams(theta)) == pytest.approx(float(mp_w(u, mpmath.mpf(theta))), rel=1e-13)


def test_w_at_zero_and_endpoints():
    p = PotentialParams(0.7)
    assert w_value(0.0, p) == 0.5
    assert w_value(1.0, p) == pytest.approx(0.7 * math.log(2.0), rel=1e-15)
    assert w_value(-1.0, p) == pytest.approx(0.7 * math.log(2.0), rel=1e-15)
    assert w_prime(0.0, p) == 0.0
    assert w_second(0.0, p) == pytest.approx(-0.3)


def test_values_are_even_and_odd():
    p = PotentialParams(0.6)
    u = np.linspace(0.0, 0.99, 50)
    v_pos = potential_values(u, p)
    v_neg = potential_values(-u, p)
    np.testing.assert_array_equal(v_pos.w, v_neg.w)
    np.testing.assert_array_equal(v_pos.dw, -v_neg.dw)
    np.testing.assert_array_equal(v_pos.d2w, v_neg.d2w)


def test_decomposition():
    u = np.linspace(-0.95, 0.95, 21)
    p = PotentialParams(0.7)
    w1, w2 = w1_values(u, 0.7), w2_values(u)
    np.testing.assert_allclose(w1.w - w2.w, w_value(u, p), rtol=0, atol=1e-15)
    np.testing.assert_allclose(w1.dw - w2.dw, w_prime(u, p), rtol=0, atol=1e-15)
    np.testing.assert_allclose(w1.d2w - w2.d2w, w_second(u, p), rtol=0, atol=1e-13)


def test_derivatives_match_finite_differences():
    p = PotentialParams(0.7)
    u = np.linspace(-0.99, 0.99, 199)
    step = 1e-6
    fd1 = (w_value(u + step, p) - w_value(u - step, p)) / (2 * step)
    fd2 = (w_prime(u + step, p) - w_prime(u - step, p)) / (2 * step)
    np.testing.assert_allclose(fd1, w_prime(u, p), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(fd2, w_second(u, p), rtol=1e-6, atol=1e-7)


def test_strict_guard_raises_and_clamped_guard_is_finite():
    p = PotentialParams(0.7)
    with pytest.raises(PotentialDomainError):
        w_prime(1.0, p)
    with pytest.raises(PotentialDomainError):
        w_value(np.array([0.2, 1.5]), p)
    assert math.isfinite(w_prime(1.0, p, guard="clamped"))
    edge = 1.0 - GUARD_WIDTH
    assert w_prime(1.0, p, guard="clamped") == pytest.approx(0.7 * math.atanh(edge) - edge, rel=1e-12)
    with pytest.raises(ValidationError):
        w_prime(0.5, p, guard="loose")


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.2, 1.2, float("nan")])
def test_invalid_theta(theta):
    with pytest.raises(ValidationError):
        PotentialParams(theta)


@pytest.mark.parametrize("theta,expected", TABLE_U_THETA)
def test_u_theta_reference_values(theta, expected):
    assert find_u_theta(PotentialParams(theta)) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("theta", [0.1, 0.3, 0.5, 0.99, 0.999])
def test_u_theta_matches_bisection(theta):
    p = PotentialParams(theta)
    oracle = brentq(lambda x: theta * math.atanh(x) - x, spinodal_edge(p), 1.0 - 1e-15, xtol=1e-15)
    rep = find_u_theta_report(p)
    assert rep.root == pytest.approx(oracle, abs=1e-8)
    assert rep.residual < 1e-6
    assert rep.bracket[0] <= rep.root <= rep.bracket[1]
    assert math.sqrt(1 - theta) < rep.root < 1.0


def test_u_theta_is_below_one_for_small_theta():
    root = find_u_theta(PotentialParams(0.1))
    assert root < 1.0
    assert math.isfinite(w_prime(root, PotentialParams(0.1)))


@pytest.mark.parametrize("theta", [0.3, 0.7, 0.9])
def test_w_second_is_negative_exactly_inside_the_spinodal(theta):
    p = PotentialParams(theta)
    edge = spinodal_edge(p)
    u = np.linspace(-0.999, 0.999, 20001)
    away = np.abs(np.abs(u) - edge) > 1e-6
    concave = w_second(u, p) < 0
    np.testing.assert_array_equal(concave[away], (np.abs(u) < edge)[away])


@pytest.fixture(scope="module")
def modified():
    return build_modified_potential(PotentialParams(0.7), C=2.0)


def test_modified_construction(modified):
    assert modified.u_theta < modified.u_hat < 1.0
    assert modified.u_hat >= math.sqrt(1 - 0.7 / 2.0)
    assert modified.k >= 1
    assert 0.7 * sum(modified.u_hat ** (2 * j + 1) / (2 * j + 1) for j in range(modified.k + 1)) > 2.0 - 1e-12
    assert modified.derivative_jump > 0


def test_modified_equals_exact_inside_window(modified):
    p = PotentialParams(0.7)
    u = np.linspace(-modified.u_hat, modified.u_hat, 1001)
    wt, dwt = modified_values(u, modified)
    np.testing.assert_allclose(wt, w_value(u, p), rtol=0, atol=1e-14)
    np.testing.assert_allclose(dwt, w_prime(u, p, guard="clamped"), rtol=0, atol=1e-14)


def test_modified_is_below_exact_outside_window(modified):
    p = PotentialParams(0.7)
    u = np.linspace(modified.u_hat, 1.0, 50)[5:]
    wt, _ = modified_values(u, modified)
    assert np.all(wt < w_value(u, p))


def test_modified_has_exactly_two_minimizers(modified):
    u = np.linspace(-2.0, 2.0, 400001)
    wt, _ = modified_values(u, modified)
    step = u[1] - u[0]
    pos = u > 0
    assert abs(u[pos][np.argmin(wt[pos])] - modified.u_theta) <= step
    assert abs(u[~pos][np.argmin(wt[~pos])] + modified.u_theta) <= step
    assert wt.min() == pytest.approx(w_value(modified.u_theta, PotentialParams(0.7)), abs=1e-9)


@pytest.mark.parametrize("theta", [0.5, 0.9])
def test_modified_minimizers_for_other_temperatures(theta):
    m = build_modified_potential(PotentialParams(theta), C=1.5, slack=1.1)
    assert m.u_theta < m.u_hat < 1.0
    u = np.linspace(-2.0, 2.0, 400001)
    wt, _ = modified_values(u, m)
    step = u[1] - u[0]
    pos = u > 0
    assert abs(u[pos][np.argmin(wt[pos])] - m.u_theta) <= step
    assert abs(u[~pos][np.argmin(wt[~pos])] + m.u_theta) <= step


def test_modified_is_even_and_finite_beyond_one(modified):
    u = np.array([1.2, 1.5, 2.0])
    wt, dwt = modified_values(u, modified)
    wt_neg, dwt_neg = modified_values(-u, modified)
    assert np.all(np.isfinite(wt))
    np.testing.assert_array_equal(wt, wt_neg)
    np.testing.assert_array_equal(dwt, -dwt_neg)
    assert np.all(modified_second_derivative(np.linspace(modified.u_hat + 1e-9, 2.0, 20), modified) > 0)


def test_modified_scalar_and_array_shapes(modified):
    w0, dw0 = modified_values(0.0, modified)
    assert isinstance(w0, float) and w0 == 0.5 and dw0 == 0.0
    wt, dwt = modified_values(np.zeros((3, 4)), modified)
    assert wt.shape == dwt.shape == (3, 4)


def test_large_c_is_not_representable():
    with pytest.raises(ConstructionError):
        build_modified_potential(PotentialParams(0.7), C=100.0)
    with pytest.raises(ConstructionError):
        build_modified_potential(PotentialParams(0.7), C=10.0)


def test_truncation_cap():
    with pytest.raises(ConstructionError):
        build_modified_potential(PotentialParams(0.3), C=2.0)


def test_invalid_c():
    with pytest.raises(ValidationError):
        build_modified_potential(PotentialParams(0.7), C=1.0)
