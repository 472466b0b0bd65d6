"""
Tests for the reduced model: gradient components, the convex function F,
its critical rates, and the bubble decomposition of a computed solution.
"""

import math

import numpy as np
import pytest

from nirenberg_s3.core.bubbles import BubbleParams, bubble_spectrum
from nirenberg_s3.core.errors import DomainError, InfeasibleConfigurationError, PreconditionError
from nirenberg_s3.core.geometry import SpherePoint, exp_map, tangent_frame
from nirenberg_s3.core.morse import CriticalPointRecord, PointClass, make_record
from nirenberg_s3.core.reduced import (
    GAMMA6_LIMIT, ErrorBudget, ReducedConfig, axis_bubble, decompose_solution, gamma_6,
    reduced_energy_F, reduced_gradient, reduced_model_height_constant, single_point_constant,
    solve_F_critical,
)
from nirenberg_s3.core.spectral import HarmonicSpectrum

E4 = np.array([0.0, 0.0, 0.0, 1.0])


@pytest.fixture
def top_record(K_axis):
    return make_record(K_axis, E4, tol_hess=1e-8)


def test_gamma_6_limit():
    assert GAMMA6_LIMIT == pytest.approx(2.0 * math.pi ** 2, rel=1e-12)
    assert gamma_6(1.0) == pytest.approx(4.0 * math.pi ** 2 / 3.0, rel=1e-12)
    assert gamma_6(0.5) == pytest.approx(gamma_6(1.0) / 8.0)


@pytest.mark.parametrize("tau", [1e-1, 1e-2, 1e-3])
def test_single_point_critical_rate(top_record, tau):
    pred = solve_F_critical([top_record], tau=tau, restarts=10)
    assert pred.k == 1
    assert pred.t_star[0] * math.sqrt(2.0 * tau) == pytest.approx(1.0, rel=1e-10)
    assert pred.hessian_eigs[0] > 0.0
    assert pred.restart_spread <= 1e-8
    assert pred.mu_pred[0] == pytest.approx(4.0 / 9.0, rel=1e-12)
    assert pred.reduced_constant[0] == pytest.approx(1.0 / 18.0, rel=1e-12)
    assert pred.point_constant[0] == pytest.approx(4.0 / 9.0, rel=1e-12)


def test_critical_rate_scales_like_inverse_root_tau(top_record):
    a = solve_F_critical([top_record], tau=1e-2, restarts=4).t_star[0]
    b = solve_F_critical([top_record], tau=1e-4, restarts=4).t_star[0]
    assert b / a == pytest.approx(10.0, rel=1e-10)


def test_raw_points_need_K(K_axis):
    with pytest.raises(PreconditionError):
        solve_F_critical([E4], tau=0.01, restarts=2)
    pred = solve_F_critical([E4], K=K_axis, tau=0.01, restarts=2)
    assert pred.points == [[0.0, 0.0, 0.0, 1.0]]


def test_k_plus_point_is_infeasible(K_axis):
    with pytest.raises(InfeasibleConfigurationError):
        solve_F_critical([-E4], K=K_axis, tau=0.01, restarts=2)


def test_negative_mu_is_infeasible(K_quadratic):
    e3 = make_record(K_quadratic, np.array([0.0, 0.0, 1.0, 0.0]), tol_hess=1e-8)
    e4 = make_record(K_quadratic, E4, tol_hess=1e-8)
    with pytest.raises(InfeasibleConfigurationError):
        solve_F_critical([e3, e4], tau=0.01, restarts=2)


def test_prediction_bubbles(top_record):
    pred = solve_F_critical([top_record], tau=0.02, restarts=2)
    (b,) = pred.bubbles()
    assert b.t == pytest.approx(5.0)
    assert b.alpha == pytest.approx(1.0 / 3.0)
    d = pred.to_dict()
    assert d["k"] == 1 and d["point_constant"] == [pytest.approx(4.0 / 9.0)]


def test_F_minimum_is_where_the_gradient_vanishes(top_record):
    tau = 0.01
    pred = solve_F_critical([top_record], tau=tau, restarts=2)
    M = np.array([[1.0 / 9.0]])
    s = pred.s_star[0]
    f0 = reduced_energy_F([s], tau, [3.0], M)
    assert f0 < reduced_energy_F([1.01 * s], tau, [3.0], M)
    assert f0 < reduced_energy_F([0.99 * s], tau, [3.0], M)
    assert pred.F_value == pytest.approx(f0)


def test_height_constants():
    np.testing.assert_allclose(reduced_model_height_constant([3.0], [-3.0]), [1.0 / 18.0])
    np.testing.assert_allclose(single_point_constant([3.0], [-3.0]), [4.0 / 9.0])


def test_reduced_config_validation(K_axis):
    with pytest.raises(DomainError):
        ReducedConfig.from_points(K_axis, [E4], tau=2.5)
    with pytest.raises(PreconditionError):
        ReducedConfig((E4,), (3.0,), (-3.0,), 0.1, (1.0, 1.0), (3.0,))
    cfg = ReducedConfig.from_points(K_axis, [E4], tau=0.01)
    assert cfg.alphas == pytest.approx((1.0 / 3.0,))
    assert cfg.rates == pytest.approx((10.0,))
    assert cfg.check() == []
    bad = ReducedConfig.from_points(K_axis, [E4], tau=0.01, alphas=[2.0], rates=[1000.0])
    assert len(bad.check()) == 2
    with pytest.raises(PreconditionError, match="t_0"):
        reduced_gradient(bad)


def test_reduced_gradient_vanishes_at_the_critical_rate(K_axis):
    tau = 0.01
    t_star = 1.0 / math.sqrt(2.0 * tau)
    grad = reduced_gradient(ReducedConfig.from_points(K_axis, [E4], tau, rates=[t_star]))
    assert grad.d_alpha == pytest.approx([0.0], abs=1e-14)
    assert grad.d_t[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(grad.d_P, 0.0, atol=1e-14)
    # below t* the curvature term wins
    grad_low = reduced_gradient(ReducedConfig.from_points(K_axis, [E4], tau, rates=[0.5 * t_star]))
    assert grad_low.d_t[0] < 0.0


def test_reduced_gradient_moves_off_critical_points(K_axis):
    P = np.array([0.0, 0.0, 0.6, 0.8])
    grad = reduced_gradient(ReducedConfig.from_points(K_axis, [P], 0.01))
    assert np.linalg.norm(grad.d_P) > 0.0
    assert abs(grad.d_P[0] @ P) < 1e-12


def test_error_budget():
    budget = ErrorBudget.evaluate(0.01, 0.1, 0.0)
    assert set(budget.orders) == {"alpha", "t", "P"}
    assert budget.magnitudes["P"] > budget.magnitudes["t"]


def test_decompose_recovers_zonal_bubble():
    exact = BubbleParams(SpherePoint.axis(4), 4.0, 1.0 / 3.0)
    v = bubble_spectrum(exact, 64, layout="zonal")
    res = decompose_solution(v, 1, [BubbleParams(SpherePoint.axis(4), 3.0, 0.3)])
    assert res.converged
    assert res.fit[0].t == pytest.approx(4.0, rel=1e-8)
    assert res.fit[0].alpha == pytest.approx(1.0 / 3.0, rel=1e-8)
    assert res.remainder_norm < 1e-8
    assert res.history[0] > res.history[-1]


def test_decompose_recovers_full_bubble():
    P = SpherePoint.from_vector([0.2, -0.1, 0.3, 0.9])
    exact = BubbleParams(P, 2.5, 0.5)
    v = bubble_spectrum(exact, 24)
    start = BubbleParams(exp_map(P, 0.05 * tangent_frame(P)[:, 0]), 2.2, 0.45)
    res = decompose_solution(v, 1, [start])
    assert res.converged
    assert res.fit[0].P.isclose(P, 1e-7)
    assert res.fit[0].t == pytest.approx(2.5, rel=1e-7)
    assert res.remainder_norm < 1e-7


def test_decompose_remainder_is_orthogonal():
    b = BubbleParams(SpherePoint.axis(4), 3.0, 0.4)
    v = bubble_spectrum(b, 48, layout="zonal") + HarmonicSpectrum.constant(0.05, 48, "zonal")
    res = decompose_solution(v, 1, [b])
    assert res.remainder_norm > 0.0
    assert res.orthogonality < 1e-8


def test_decompose_needs_k_initial_bubbles():
    v = HarmonicSpectrum.constant(1.0, 8, "zonal")
    with pytest.raises(PreconditionError):
        decompose_solution(v, 2, [BubbleParams(SpherePoint.axis(4), 2.0)])


def test_axis_bubble_snaps_to_nearer_pole():
    b = BubbleParams(SpherePoint.from_vector([0.1, 0.0, 0.2, -0.9]), 3.0, 0.5)
    snapped = axis_bubble(b)
    assert snapped.P.isclose(-SpherePoint.axis(4))
    assert snapped.t == 3.0 and snapped.alpha == 0.5


def _synthetic_minus_point(x, laplacian=-10.0):
    return CriticalPointRecord(location=np.asarray(x, dtype=float), grad_norm=0.0,
                               hessian_eigs=(-4.0, -3.0, -3.0), morse_index=3, laplacian=laplacian,
                               k_value=1.0, point_class=PointClass.K_MINUS)


@pytest.mark.parametrize("c_mu", [1.0, 0.25])
def test_two_point_height_prediction_divides_by_c_mu(c_mu):
    # M = [[10, -3], [-3, 10]] for antipodal points with K = 1 and Lap K = -10
    pair = [_synthetic_minus_point(E4), _synthetic_minus_point(-E4)]
    pred = solve_F_critical(pair, tau=0.01, c_mu=c_mu, restarts=3)
    np.testing.assert_allclose(pred.lambdas, [1.0, 1.0], rtol=1e-10)
    np.testing.assert_allclose(pred.mu_pred, [7.0 / c_mu, 7.0 / c_mu], rtol=1e-10)
