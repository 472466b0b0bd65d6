"""
Tests for the Newton solver, its discretisations and the blow-up diagnostics.
"""

import numpy as np
import pytest

from nirenberg_s3.core.bubbles import BubbleParams, eval_bubble
from nirenberg_s3.core.continuation import nearest_candidate
from nirenberg_s3.core.errors import DomainError, PreconditionError
from nirenberg_s3.core.geometry import SpherePoint, random_rotation, sample_points
from nirenberg_s3.core.polynomial import AmbientPolynomial
from nirenberg_s3.core.solver import (
    SolverOptions, SolverState, ZonalDiscretization, axisym_solve, bubble_ray_critical_rate, bubble_seed,
    constant_seed, diagnostics,
    energy, energy_stationarity, jacobian_fd_slope, make_discretization, newton_solve, residual,
)
from nirenberg_s3.core import solver as solver_module
from nirenberg_s3.core.spectral import HarmonicSpectrum, evaluate_spectrum

E4 = np.array([0.0, 0.0, 0.0, 1.0])


def test_constant_solution_has_zero_residual():
    K = AmbientPolynomial.constant(2.0)
    tau = 0.2
    v = constant_seed(K, tau, 4)
    assert v.coeffs[0] > 0.0
    np.testing.assert_allclose(evaluate_spectrum(v, E4), 2.0 ** (-1.0 / (1.0 - tau)))
    assert np.linalg.norm(residual(v, tau, K).coeffs) < 1e-12


def test_newton_recovers_constant_solution(K_const):
    tau = 0.2
    v0 = constant_seed(K_const, tau, 4) * 1.1
    state = newton_solve(v0, tau, K_const)
    assert state.converged and state.positive
    np.testing.assert_allclose(evaluate_spectrum(state.v, E4), 1.0, rtol=1e-9)
    assert state.residual_norm <= SolverOptions().rtol * state.scale
    assert state.history[0] > state.history[-1]
    assert state.to_dict()["layout"] == "full"


def test_newton_rejects_tau_outside_range(K_const):
    v0 = constant_seed(K_const, 0.5, 2)
    with pytest.raises(DomainError):
        newton_solve(v0, 0.0, K_const)
    with pytest.raises(DomainError):
        newton_solve(v0, 2.0, K_const)


def test_zonal_solve_axis_example(K_axis):
    tau = 0.5
    state = axisym_solve(K_axis, tau, constant_seed(K_axis, tau, 32, "zonal"))
    assert state.converged and state.positive
    assert state.layout == "zonal"
    # the solution leans towards the maximum of K
    top, bottom = evaluate_spectrum(state.v, np.stack([E4, -E4]))
    assert top > bottom
    assert energy_stationarity(state, K_axis) <= 1e-6


def test_unconverged_gmres_is_counted(K_axis, monkeypatch):
    real_gmres = solver_module.gmres

    def stalled(*args, **kwargs):
        x, _ = real_gmres(*args, **kwargs)
        return x, 7

    monkeypatch.setattr(solver_module, "gmres", stalled)
    tau = 0.5
    opts = SolverOptions(dense_max_zonal=0)
    state = axisym_solve(K_axis, tau, constant_seed(K_axis, tau, 16, "zonal"), opts)
    assert state.converged
    assert state.gmres_failures == state.newton_iters > 0
    assert state.to_dict()["gmres_failures"] == state.gmres_failures


def test_axisym_solve_preconditions(K_axis):
    with pytest.raises(PreconditionError):
        axisym_solve(K_axis, 0.5, constant_seed(K_axis, 0.5, 8, "full"))
    K = AmbientPolynomial.from_expression("x1 + 2")
    with pytest.raises(PreconditionError):
        axisym_solve(K, 0.5, constant_seed(K, 0.5, 8, "zonal"))


def test_zonal_discretisation_rejects_non_zonal_K():
    with pytest.raises(PreconditionError):
        ZonalDiscretization(AmbientPolynomial.from_expression("x2 + 3"), 8)
    with pytest.raises(PreconditionError):
        make_discretization(AmbientPolynomial.constant(1.0), 4, "mixed")


def test_zonal_transforms_round_trip(K_axis, rng):
    disc = make_discretization(K_axis, 16, "zonal")
    c = rng.standard_normal(17)
    np.testing.assert_allclose(disc.analyze(disc.synthesize(c)), c, atol=1e-12)
    S = disc.synthesis_matrix
    np.testing.assert_allclose(S @ c, disc.synthesize(c), atol=1e-12)


def test_zonal_synthesis_matches_basis(K_axis, rng):
    L = 10
    disc = make_discretization(K_axis, L, "zonal")
    v = HarmonicSpectrum(L, rng.standard_normal(L + 1), "zonal")
    np.testing.assert_allclose(disc.synthesize(v.coeffs), evaluate_spectrum(v, disc.nodes), atol=1e-12)


def test_jacobian_matches_finite_differences(K_axis):
    v = constant_seed(K_axis, 0.5, 4)
    rng = np.random.default_rng(0)
    v = v + v.with_coeffs(0.01 * rng.standard_normal(v.coeffs.size) / (v.degrees() + 1.0) ** 2)
    res = jacobian_fd_slope(v, 0.5, K_axis)
    assert res["slope"] >= 1.9
    assert res["errors"][-1] < res["errors"][0]


def test_energy_of_constant_solution():
    K = AmbientPolynomial.constant(1.0)
    tau = 0.5
    v = constant_seed(K, tau, 2)
    # v = 1: 1/2 |S^3| - |S^3| / (3 - tau)
    area = 2.0 * np.pi ** 2
    assert energy(v, tau, K) == pytest.approx(0.5 * area - area / (3.0 - tau), rel=1e-12)


def test_bubble_seed_sums_bubbles():
    b1 = BubbleParams(SpherePoint.axis(4), 2.0, 0.5)
    b2 = BubbleParams(-SpherePoint.axis(4), 3.0, 0.25)
    v = bubble_seed([b1, b2], 48, "zonal")
    x = np.array([0.0, 0.0, 0.6, 0.8])
    assert float(evaluate_spectrum(v, x)[0]) == pytest.approx(eval_bubble(b1, x) + eval_bubble(b2, x), rel=1e-10)


def test_flat_state_diagnostics(K_const):
    v = constant_seed(K_const, 0.3, 6)
    state = SolverState(tau=0.3, v=v, residual_norm=0.0, newton_iters=0, positive=True, L=6)
    diag = diagnostics(state, K_const)
    assert diag.flat
    assert len(diag.peaks) == 1
    assert not diag.peaks[0].concentrating
    assert diag.mean == pytest.approx(1.0)
    assert diag.resolution_ok


def test_concentrated_state_diagnostics(K_axis):
    tau = 0.01
    v = bubble_seed([BubbleParams(SpherePoint.axis(4), 6.0, 1.0 / 3.0)], 64, "zonal")
    state = SolverState(tau=tau, v=v, residual_norm=0.0, newton_iters=0, positive=True, L=64)
    diag = diagnostics(state, K_axis, expected_k=1, critical_points=[E4, -E4])
    top = diag.peaks[0]
    np.testing.assert_allclose(top.location, E4, atol=1e-6)
    assert top.height == pytest.approx(2.0, rel=1e-6)
    assert top.t_hat == pytest.approx(6.0, rel=1e-6)
    assert top.tau_m2 == pytest.approx(tau * 4.0, rel=1e-6)
    assert top.concentrating
    assert top.distance == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(diag.lambda_hat, [1.0 / 3.0], rtol=1e-8)
    assert diag.resolution_ok
    assert not diag.warnings
    assert top.profile_error <= 0.02


@pytest.mark.parametrize("t", [2.0, 4.0, 8.0, 16.0])
def test_exact_bubble_matches_rescaled_profile(K_const, t):
    L = 64
    v = bubble_seed([BubbleParams(SpherePoint.axis(4), t, 1.0)], L, "zonal")
    state = SolverState(tau=0.1, v=v, residual_norm=0.0, newton_iters=0, positive=True, L=L)
    peak = diagnostics(state, K_const).peaks[0]
    np.testing.assert_allclose(peak.location, E4, atol=1e-6)
    # truncation of the degree-L tail
    assert peak.height == pytest.approx(t, rel=5e-3)
    assert peak.profile_error <= 0.02


def test_full_layout_peak_is_refined_off_the_grid(K_const):
    P = SpherePoint.from_vector([0.3, -0.2, 0.5, 0.8])
    L, t = 12, 2.0
    v = bubble_seed([BubbleParams(P, t, 1.0)], L, "full")
    state = SolverState(tau=0.1, v=v, residual_norm=0.0, newton_iters=0, positive=True, L=L)
    diag = diagnostics(state, K_const)
    top = diag.peaks[0]
    np.testing.assert_allclose(top.location, P.x, atol=1e-6)
    assert top.height == pytest.approx(t, rel=1e-4)
    assert top.profile_error <= 0.02
    assert diag.resolution_ok


def test_peak_ratios_follow_bubble_rates(K_axis):
    top = BubbleParams(SpherePoint.axis(4), 12.0, 1.0 / 3.0)
    bottom = BubbleParams(SpherePoint([0.0, 0.0, 0.0, -1.0]), 8.0, 1.0)
    v = bubble_seed([top, bottom], 64, layout="zonal")
    state = SolverState(tau=0.05, v=v, residual_norm=0.0, newton_iters=0, positive=True, L=64)
    diag = diagnostics(state, K_axis)
    assert len(diag.peaks) == 2
    # heights t / K(q); the higher peak (bottom) comes first
    assert diag.peaks[0].location[3] < 0.0
    np.testing.assert_allclose(diag.lambda_hat, [1.0, 8.0 / (1.0 * 12.0)], rtol=5e-2)


def test_diagnostics_warns_on_missing_peaks(K_axis):
    v = bubble_seed([BubbleParams(SpherePoint.axis(4), 6.0, 1.0 / 3.0)], 64, "zonal")
    state = SolverState(tau=0.01, v=v, residual_norm=0.0, newton_iters=0, positive=True, L=64)
    assert diagnostics(state, K_axis, expected_k=2).warnings


def test_under_resolved_peak_is_flagged(K_axis):
    v = bubble_seed([BubbleParams(SpherePoint.axis(4), 9.0, 1.0 / 3.0)], 16, "zonal")
    state = SolverState(tau=0.01, v=v, residual_norm=0.0, newton_iters=0, positive=True, L=16)
    assert not diagnostics(state, K_axis).resolution_ok


@pytest.mark.slow
def test_full_and_zonal_agree_at_tau_one_fifth(K_axis):
    tau, L = 0.2, 12
    zonal = axisym_solve(K_axis, tau, constant_seed(K_axis, tau, L, "zonal"))
    full = newton_solve(constant_seed(K_axis, tau, L, "full"), tau, K_axis)
    diff = full.v - zonal.v.to_full()
    assert diff.l2_norm() <= 1e-6 * zonal.v.l2_norm()


@pytest.mark.slow
def test_solutions_are_rotation_equivariant(K_axis):
    tau, L = 0.5, 6
    R = random_rotation(11)
    base = newton_solve(constant_seed(K_axis, tau, L), tau, K_axis)
    KR = K_axis.rotated(R)
    turned = newton_solve(constant_seed(KR, tau, L), tau, KR)
    x = sample_points(30, seed=2)
    np.testing.assert_allclose(evaluate_spectrum(turned.v, x), evaluate_spectrum(base.v, x @ R.T), rtol=1e-7)


def test_bubble_ray_rate_follows_the_single_point_height_law(K_axis):
    tau = 0.01
    t = bubble_ray_critical_rate(K_axis, tau, L=256)
    # t^2 = -4 Lap K / (tau K) = 4 / tau at e4
    assert t * np.sqrt(tau) / 2.0 == pytest.approx(1.0, abs=0.2)
    height = tau * (t / 3.0) ** 2
    candidates = {"single_point": 4.0 / 9.0, "reduced_model": 1.0 / 18.0}
    assert nearest_candidate(height, candidates)[0] == "single_point"
