"""
Tests for the critical-point inventory, the interaction matrix and Index(K).
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nirenberg_s3.core.errors import DegenerateKError, DomainError, PreconditionError
from nirenberg_s3.core.geometry import random_rotation
from nirenberg_s3.core.morse import (
    PointClass, build_matrix_M, charpoly_min_eig, check_positive, closed_form_index, find_critical_points,
    index_along_path, index_of_K, make_record, morse_euler_sum, pairwise_laplacian_condition,
    riemannian_newton,
)
from nirenberg_s3.core.polynomial import AmbientPolynomial


def _by_location(records, v):
    v = np.asarray(v, dtype=float)
    return next(r for r in records if np.allclose(r.location, v, atol=1e-8))


def test_axis_example_critical_points(K_axis):
    records = find_critical_points(K_axis, n_starts=32)
    assert len(records) == 2
    top = _by_location(records, [0, 0, 0, 1])
    bottom = _by_location(records, [0, 0, 0, -1])
    assert top.point_class is PointClass.K_MINUS
    assert bottom.point_class is PointClass.K_PLUS
    assert top.morse_index == 3 and bottom.morse_index == 0
    assert top.laplacian == pytest.approx(-3.0, abs=1e-10)
    assert top.k_value == pytest.approx(3.0)
    # K^- points come first
    assert records[0] is top


def test_axis_example_index(K_axis):
    report = index_of_K(K_axis, n_starts=32)
    assert report.index == -2
    assert report.closed_form_index == -2
    assert report.pairwise_condition_holds
    assert report.morse_euler == 0
    assert len(report.K_minus) == 1
    assert report.subsets[0].mu == pytest.approx(1.0 / 9.0, rel=1e-10)
    assert report.in_A
    assert not report.warnings


def test_quadratic_oracle(K_quadratic):
    lambdas = np.array([0.1, 0.2, 0.4, 0.8])
    records = find_critical_points(K_quadratic, n_starts=128)
    assert len(records) == 8
    assert morse_euler_sum(records) == 0
    for i in range(4):
        e = np.eye(4)[i]
        for r in (_by_location(records, e), _by_location(records, -e)):
            expected = sorted(2.0 * (lambdas[j] - lambdas[i]) for j in range(4) if j != i)
            np.testing.assert_allclose(r.hessian_eigs, expected, atol=1e-9)
            assert r.laplacian == pytest.approx(2.0 * lambdas.sum() - 8.0 * lambdas[i], abs=1e-9)
            assert r.k_value == pytest.approx(3.0 + lambdas[i])
    kminus = [r for r in records if r.point_class is PointClass.K_MINUS]
    assert len(kminus) == 4
    assert pairwise_laplacian_condition(kminus)


def test_quadratic_index_matches_closed_form(K_quadratic):
    report = index_of_K(K_quadratic, n_starts=128)
    assert report.closed_form_index == -1
    assert report.index == -1
    assert len(report.subsets) == 2 ** 4 - 1
    # every pair of K^- points interacts too strongly for a positive mu
    assert all(s.mu < 0.0 and s.contribution == 0 for s in report.subsets if s.k >= 2)


@pytest.mark.parametrize("seed", [1, 2])
def test_index_is_rotation_invariant(K_quadratic, seed):
    R = random_rotation(seed)
    assert index_of_K(K_quadratic.rotated(R), n_starts=128, seed=seed).index == -1


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_index_is_scale_invariant(K_axis, c):
    assert index_of_K(K_axis.scaled(c), n_starts=32).index == -2


def test_constant_K_is_degenerate():
    K = AmbientPolynomial.from_expression("2")
    with pytest.raises(DegenerateKError):
        index_of_K(K, n_starts=4)
    with pytest.raises(DegenerateKError):
        find_critical_points(K, n_starts=4, strict=True)


def test_nonpositive_K_is_rejected():
    with pytest.raises(DomainError):
        check_positive(AmbientPolynomial.from_expression("x4"))
    assert check_positive(AmbientPolynomial.from_expression("x4 + 2")) >= 1.0 - 1e-12


def test_riemannian_newton_converges_quadratically(K_axis):
    x, ok = riemannian_newton(K_axis, np.array([0.1, -0.2, 0.05, 1.0]))
    assert ok
    np.testing.assert_allclose(x, [0, 0, 0, 1], atol=1e-10)


def test_matrix_rejects_k_plus(K_axis):
    records = find_critical_points(K_axis, n_starts=32)
    with pytest.raises(PreconditionError):
        build_matrix_M(records)
    with pytest.raises(PreconditionError):
        build_matrix_M([])


def test_matrix_entries(K_quadratic):
    e3 = make_record(K_quadratic, np.array([0.0, 0.0, 1.0, 0.0]), tol_hess=1e-8)
    e4 = make_record(K_quadratic, np.array([0.0, 0.0, 0.0, 1.0]), tol_hess=1e-8)
    M = build_matrix_M([e3, e4])
    assert M.entries[0, 0] == pytest.approx(0.2 / 3.4 ** 3)
    assert M.entries[1, 1] == pytest.approx(3.4 / 3.8 ** 3)
    # orthogonal points: G = 1
    assert M.entries[0, 1] == pytest.approx(-6.0 / (3.4 * 3.8))
    assert M.mu_min == pytest.approx(np.linalg.eigvalsh(M.entries)[0])
    assert M.mu_min < 0.0
    assert M.to_dict()["mu_min"] == M.mu_min


def test_matrix_rejects_coincident_points(K_axis):
    top = make_record(K_axis, np.array([0.0, 0.0, 0.0, 1.0]), tol_hess=1e-8)
    with pytest.raises(DomainError):
        build_matrix_M([top, top])


def test_closed_form_index_formula(K_quadratic):
    records = find_critical_points(K_quadratic, n_starts=128)
    assert closed_form_index(records) == -1 + 2 * (+1) + 2 * (-1)


def test_report_serialises(K_axis):
    d = index_of_K(K_axis, n_starts=32).to_dict()
    assert d["statistics"]["index"] == -2
    assert d["meta"]["n_K_minus"] == 1
    assert d["critical_points"][0]["class"] == "K_MINUS"


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=3), st.integers(min_value=0, max_value=10_000))
def test_charpoly_min_eig_matches_eigvalsh(k, seed):
    A = np.random.default_rng(seed).standard_normal((k, k))
    M = A + A.T
    assert charpoly_min_eig(M) == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-10)


def test_charpoly_min_eig_limits():
    assert charpoly_min_eig(2.0 * np.eye(3)) == pytest.approx(2.0)
    with pytest.raises(PreconditionError):
        charpoly_min_eig(np.eye(4))


def _random_morse_polynomial(seed):
    """Rotated diagonal quadratic with distinct weights plus a small cubic perturbation."""
    rng = np.random.default_rng(seed)
    lambdas = np.sort(rng.uniform(0.1, 1.0, 4))
    K = AmbientPolynomial.quadratic_form(4.0, lambdas).rotated(random_rotation(seed))
    a, b = rng.uniform(-0.02, 0.02, 2)
    cubic = AmbientPolynomial.from_expression(f"{a:.6f}*x1*x2*x3 + {b:.6f}*x4**3")
    return AmbientPolynomial(K.terms + cubic.terms)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_morse_euler_sum_on_random_polynomials(seed):
    records = find_critical_points(_random_morse_polynomial(seed), n_starts=256, seed=seed)
    assert all(r.is_morse for r in records)
    assert morse_euler_sum(records) == 0


def test_flat_laplacian_point_keeps_index_and_leaves_A():
    # +-e4 have Hessian eigenvalues (-6, 2, 4) but Lap K = 0
    K = AmbientPolynomial.from_expression("4 + x1^2 + 2*x2^2 - 3*x3^2")
    records = find_critical_points(K, n_starts=128)
    assert len(records) == 8
    assert all(r.is_morse for r in records)
    flat = [r for r in records if r.flat_laplacian]
    assert len(flat) == 2
    top = _by_location(records, [0, 0, 0, 1])
    assert top.point_class is PointClass.DEGENERATE
    assert top.morse_index == 1
    np.testing.assert_allclose(top.hessian_eigs, [-6.0, 2.0, 4.0], atol=1e-9)

    report = index_of_K(K, records)
    assert len(report.K_minus) == 4
    assert report.index == -1
    assert report.closed_form_index == -1
    assert not report.in_A
    assert report.laplacian_margin < 1e-8
    assert [id(r) for r in report.flat_points] == [id(r) for r in flat]
    n = len(report.K_minus)
    assert sorted(report.H_configs) == [(n,), (n + 1,)]
    assert any("Lap K" in w for w in report.warnings)
    assert report.to_dict()["meta"]["n_flat_laplacian"] == 2


def _cap_pair_K(a):
    # K^- = {e4, -e4}; mu of the antipodal pair is 4.8 a - 3
    return AmbientPolynomial.quadratic_form(1.0, [-0.9 * a, -0.8 * a, -0.7 * a, 0.0])


def test_antipodal_pair_switches_on_with_the_laplacian():
    below = index_of_K(_cap_pair_K(0.5), n_starts=128)
    above = index_of_K(_cap_pair_K(0.8), n_starts=128)
    assert [r.morse_index for r in below.K_minus] == [3, 3]
    assert below.index == -3 and above.index == -4
    pair = next(s for s in above.subsets if s.k == 2)
    assert pair.mu == pytest.approx(4.8 * 0.8 - 3.0, rel=1e-8)
    assert below.existence_guaranteed and above.existence_guaranteed
    # 4.8 a < 3 is also the pairwise Laplacian condition on the antipodal pair
    assert below.pairwise_condition_holds and below.closed_form_index == -3
    assert not above.pairwise_condition_holds and above.closed_form_index is None
    assert above.to_dict()["statistics"]["existence_guaranteed"] is True


def test_index_along_path_brackets_the_mu_crossing():
    path = index_along_path(_cap_pair_K(0.5), _cap_pair_K(0.8), n_steps=5, n_bisect=4, n_starts=128)
    assert [p.index for p in path.samples] == [-3, -3, -3, -4, -4, -4]
    assert all(p.in_A for p in path.samples)
    (jump,) = path.jumps
    # a = 0.5 + 0.3 s crosses 0.625 at s = 5/12
    assert jump.s_lo <= 5.0 / 12.0 <= jump.s_hi
    assert jump.s_hi - jump.s_lo == pytest.approx(0.2 / 16)
    assert (jump.index_lo, jump.index_hi) == (-3, -4)
    assert jump.subsets == ((0, 1),)
    assert path.to_dict()["jumps"][0]["subsets"] == [[0, 1]]


def test_index_along_path_without_crossing(K_quadratic):
    path = index_along_path(K_quadratic, K_quadratic.scaled(2.0), n_steps=2, n_starts=128)
    assert path.jumps == []
    assert len({p.index for p in path.samples}) == 1
