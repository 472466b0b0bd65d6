"""Tests for points, charts, frames and quadrature grids on S^3."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nirenberg_s3.core.errors import DomainError, PreconditionError, ResourceBudgetError
from nirenberg_s3.core.geometry import (
    S3_AREA, HypersphericalCoords, SpherePoint, build_grid, chart_distance_squared, conformal_factor,
    exp_map, geodesic_distance, givens_rotation, random_rotation, sample_points, sphere_derivatives,
    sphere_moment, sphere_to_stereographic, stereographic_to_sphere, tangent_frame,
)
from nirenberg_s3.core.polynomial import AmbientPolynomial

coords = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False)


def test_sphere_point_validation():
    with pytest.raises(DomainError):
        SpherePoint(np.array([1.0, 1.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        SpherePoint.from_vector([0.0, 0.0, 0.0, 0.0])
    p = SpherePoint.from_vector([0.0, 0.0, 3.0, 4.0])
    np.testing.assert_allclose(p.x, [0.0, 0.0, 0.6, 0.8])
    assert (-p).isclose(SpherePoint.from_vector([0.0, 0.0, -3.0, -4.0]))


def test_geodesic_distance_axes():
    e1, e4 = SpherePoint.axis(1), SpherePoint.axis(4)
    assert geodesic_distance(e1, e4) == pytest.approx(math.pi / 2)
    assert geodesic_distance(e4, -e4) == pytest.approx(math.pi)
    assert geodesic_distance(e4, e4) == 0.0


@given(st.tuples(coords, coords, coords))
@settings(max_examples=100, deadline=None)
def test_stereographic_round_trip(y):
    y = np.array(y)
    p = stereographic_to_sphere(y)
    np.testing.assert_allclose(sphere_to_stereographic(p), y, atol=1e-9 * (1 + y @ y))


def test_stereographic_north_pole_undefined():
    with pytest.raises(DomainError):
        sphere_to_stereographic(SpherePoint.axis(4))


def test_stereographic_origin_is_south_pole():
    np.testing.assert_allclose(stereographic_to_sphere([0.0, 0.0, 0.0]).x, [0, 0, 0, -1])
    assert conformal_factor([0.0, 0.0, 0.0]) == 2.0


def test_chart_distance_matches_projection():
    pts = sample_points(20, seed=3)
    south = np.array([0.0, 0.0, 0.0, -1.0])
    for x in pts:
        y = sphere_to_stereographic(x)
        assert chart_distance_squared(x, south) == pytest.approx(y @ y, rel=1e-10)


def test_hyperspherical_round_trip():
    c = HypersphericalCoords(0.7, 2.1, 5.0)
    back = HypersphericalCoords.from_point(c.to_point())
    np.testing.assert_allclose([back.chi, back.theta, back.phi], [0.7, 2.1, 5.0], atol=1e-12)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=50, deadline=None)
def test_tangent_frame_orthonormal(seed):
    x = sample_points(1, seed)[0]
    E = tangent_frame(x)
    np.testing.assert_allclose(E.T @ E, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(x @ E, np.zeros(3), atol=1e-12)


def test_exp_map_distance():
    p = SpherePoint.axis(4)
    v = np.array([0.3, -0.4, 0.0, 0.0])
    q = exp_map(p, v)
    assert geodesic_distance(p, q) == pytest.approx(0.5)


def test_givens_rotation():
    R = givens_rotation(1, 4, 0.3)
    np.testing.assert_allclose(R @ R.T, np.eye(4), atol=1e-15)
    with pytest.raises(PreconditionError):
        givens_rotation(2, 2, 0.1)
    Q = random_rotation(seed=7)
    assert np.linalg.det(Q) == pytest.approx(1.0)


@pytest.mark.parametrize("exps, expected", [
    ((0, 0, 0, 0), S3_AREA),
    ((2, 0, 0, 0), S3_AREA / 4.0),
    ((0, 0, 0, 4), S3_AREA / 8.0),
    ((1, 0, 0, 1), 0.0),
])
def test_sphere_moment(exps, expected):
    assert sphere_moment(exps) == pytest.approx(expected, rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("exps", [(2, 0, 0, 4), (0, 2, 2, 2), (1, 1, 0, 0), (0, 0, 6, 0), (4, 2, 0, 0)])
def test_grid_integrates_monomials(exps):
    grid = build_grid(3)
    vals = np.prod(grid.nodes ** np.array(exps), axis=1)
    assert grid.integrate(vals) == pytest.approx(sphere_moment(exps), abs=1e-13)


def test_grid_budget():
    with pytest.raises(ResourceBudgetError) as err:
        build_grid(40, max_nodes=1000)
    assert err.value.required == 41 * 41 * 82


def test_sphere_derivatives_quadratic_oracle(K_quadratic):
    lam = np.array([0.1, 0.2, 0.4, 0.8])
    for i in range(4):
        e = np.zeros(4)
        e[i] = 1.0
        d = sphere_derivatives(K_quadratic, e)
        assert d.grad_norm == pytest.approx(0.0, abs=1e-14)
        assert d.value == pytest.approx(3.0 + lam[i])
        expected = np.sort(2.0 * (np.delete(lam, i) - lam[i]))
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(d.hessian)), expected, atol=1e-13)
        assert d.laplacian == pytest.approx(2.0 * lam.sum() - 8.0 * lam[i])


def test_laplacian_of_linear_function():
    # x4 restricted to S^3 is a degree-1 harmonic: Lap = -3 x4
    K = AmbientPolynomial.from_expression("x4")
    for x in sample_points(5, seed=11):
        assert sphere_derivatives(K, x).laplacian == pytest.approx(-3.0 * x[3], abs=1e-13)
