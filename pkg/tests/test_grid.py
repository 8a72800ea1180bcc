import math

import numpy as np
import pytest

from agents.solver_agent import DEFAULT_L
from tools.errors import ValidationError
from tools.grid import (
    GridGeometry,
    ScalarField,
    apply_laplacian,
    build_grid,
    continuum_lambda1,
    discrete_lambda1,
    edge_gradient_sum,
    eigenfunction,
    inf_norm,
    laplacian_array,
    node_coordinates,
    sample,
    trapezoid_weights,
    zeros,
)
from tools.prng import node_uniforms


def dense_negative_laplacian(g: GridGeometry) -> np.ndarray:
    n = g.N - 1
    eye = np.eye(n)
    second = (2 * eye - np.eye(n, k=1) - np.eye(n, k=-1)) / g.h ** 2
    return np.kron(second, eye) + np.kron(eye, second)


@pytest.mark.parametrize("N", [0, 3, 4.5, True])
def test_grid_rejects_small_or_non_integer_n(N):
    with pytest.raises(ValidationError):
        GridGeometry(1.0, N)


@pytest.mark.parametrize("L", [0.0, -1.0, float("inf")])
def test_grid_rejects_bad_length(L):
    with pytest.raises(ValidationError):
        GridGeometry(L, 8)


def test_geometry_properties():
    g = GridGeometry(2.0, 8)
    assert g.h == 0.25
    assert g.shape == (9, 9)
    X, Y = node_coordinates(g)
    assert X[8, 0] == 2.0 and Y[0, 8] == 2.0 and X[0, 5] == 0.0


def test_field_boundary_is_zeroed_and_read_only(coarse_grid):
    u = ScalarField(coarse_grid, np.ones(coarse_grid.shape))
    assert np.all(u.values[0, :] == 0) and np.all(u.values[:, -1] == 0)
    assert np.all(u.interior == 1.0)
    with pytest.raises(ValueError):
        u.values[3, 3] = 2.0
    assert u.with_values(np.full(coarse_grid.shape, 0.5)).values[0, 0] == 0.0


def test_field_rejects_bad_shape_and_non_finite(coarse_grid):
    with pytest.raises(ValidationError):
        ScalarField(coarse_grid, np.zeros((4, 4)))
    vals = np.zeros(coarse_grid.shape)
    vals[2, 3] = np.nan
    with pytest.raises(ValidationError, match=r"\(2, 3\)"):
        ScalarField(coarse_grid, vals)


def test_negation_and_scaling(coarse_grid):
    u = eigenfunction(coarse_grid)
    np.testing.assert_array_equal((-u).values, -u.values)
    assert u.scaled(0.5).max_value == pytest.approx(0.5 * u.max_value)
    assert inf_norm(zeros(coarse_grid)) == 0.0


def test_eigenfunction_peak_and_boundary():
    g = GridGeometry(DEFAULT_L, 16)
    phi = eigenfunction(g)
    assert phi.values[8, 8] == pytest.approx(1.0)
    assert phi.min_value == 0.0


def test_sample_rejects_non_finite(coarse_grid):
    with pytest.raises(ValidationError):
        sample(coarse_grid, lambda x, y: 1.0 / (x - 1.0 * coarse_grid.h))


@pytest.mark.parametrize("N", [8, 32, 128])
def test_laplacian_eigenpair(N):
    g = GridGeometry(DEFAULT_L, N)
    phi = eigenfunction(g)
    lap = apply_laplacian(phi)
    np.testing.assert_allclose(lap.values, -discrete_lambda1(g) * phi.values, rtol=0, atol=1e-10)


def test_laplacian_out_buffer_keeps_zero_boundary(coarse_grid):
    vals = np.random.default_rng(0).random(coarse_grid.shape)
    out = np.full(coarse_grid.shape, 7.0)
    laplacian_array(vals, coarse_grid.h, out=out)
    assert np.all(out[0, :] == 0) and np.all(out[:, 0] == 0)


def test_laplacian_is_linear(fine_grid):
    u = ScalarField(fine_grid, node_uniforms(21, fine_grid.shape))
    v = ScalarField(fine_grid, 2.0 * node_uniforms(22, fine_grid.shape) - 1.0)
    a, b = 0.7, -1.3
    combined = ScalarField(fine_grid, a * u.values + b * v.values)
    lhs = apply_laplacian(combined).values
    rhs = a * apply_laplacian(u).values + b * apply_laplacian(v).values
    scale = np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale


def test_discrete_lambda1_increases_towards_continuum():
    values = [discrete_lambda1(GridGeometry(DEFAULT_L, N)) for N in (16, 32, 64, 128)]
    assert all(lo < hi for lo, hi in zip(values, values[1:]))
    assert values[-1] < continuum_lambda1(GridGeometry(DEFAULT_L, 128))
    assert values[0] == pytest.approx(0.99679, abs=1e-5)


def test_discrete_lambda1_fine_grid():
    g = GridGeometry(DEFAULT_L, 128)
    assert discrete_lambda1(g) == pytest.approx(0.99995, abs=1e-5)
    assert discrete_lambda1(g) < continuum_lambda1(g)
    assert continuum_lambda1(g) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("N", [4, 8, 16, 32])
def test_discrete_lambda1_matches_dense_eigensolver(N):
    g = GridGeometry(DEFAULT_L, N)
    smallest = np.linalg.eigvalsh(dense_negative_laplacian(g))[0]
    assert discrete_lambda1(g) == pytest.approx(smallest, abs=1e-8)


def test_discrete_green_identity(fine_grid):
    phi = eigenfunction(fine_grid)
    h2 = fine_grid.h ** 2
    assert edge_gradient_sum(phi.values) == pytest.approx(discrete_lambda1(fine_grid) * np.sum(phi.values ** 2) * h2, rel=1e-10)
    u = ScalarField(fine_grid, node_uniforms(3, fine_grid.shape))
    rhs = -np.sum(u.values * laplacian_array(u.values, fine_grid.h)) * h2
    assert edge_gradient_sum(u.values) == pytest.approx(rhs, rel=1e-10)


def test_trapezoid_weights_integrate_area(fine_grid):
    w = trapezoid_weights(fine_grid)
    assert w[0, 0] == 0.25 and w[0, 3] == 0.5 and w[3, 3] == 1.0
    assert np.sum(w) * fine_grid.h ** 2 == pytest.approx(fine_grid.area, rel=1e-14)


def test_trapezoid_integrals_of_eigenfunction(fine_grid):
    phi = eigenfunction(fine_grid).values
    w = trapezoid_weights(fine_grid) * fine_grid.h ** 2
    L2 = fine_grid.area
    assert np.sum(phi ** 2 * w) == pytest.approx(L2 / 4, rel=1e-12)
    assert np.sum(phi ** 4 * w) == pytest.approx(9 * L2 / 64, rel=1e-12)


class TestNodeUniforms:
    def test_range_and_determinism(self):
        a = node_uniforms(1, (33, 33))
        assert np.all((a > 0) & (a < 1))
        np.testing.assert_array_equal(a, node_uniforms(1, (33, 33)))

    def test_seeds_differ(self):
        assert not np.array_equal(node_uniforms(1, (9, 9)), node_uniforms(2, (9, 9)))

    def test_value_depends_only_on_seed_and_index(self):
        np.testing.assert_array_equal(node_uniforms(5, (9, 9)), node_uniforms(5, (17, 17))[:9, :9])

    def test_roughly_uniform(self):
        a = node_uniforms(7, (129, 129))
        assert abs(a.mean() - 0.5) < 0.01
        assert abs(a.var() - 1 / 12) < 0.005

    def test_large_seed_wraps(self):
        assert np.all(np.isfinite(node_uniforms(2 ** 70 + 3, (4, 4))))


def test_build_grid_spacing():
    g = build_grid(DEFAULT_L, 128)
    assert g.h == pytest.approx(0.0347101, abs=1e-7)
    assert build_grid(1.0, 4).h == 0.25
    assert build_grid(DEFAULT_L, 64).h == pytest.approx(2 * g.h, rel=1e-15)
    with pytest.raises(ValidationError):
        build_grid(1.0, 3)
