"""
Tests for tau continuation, the branch tracker and the branch summaries.
"""

import math

import numpy as np
import pytest

from nirenberg_s3.core.bubbles import BubbleParams
from nirenberg_s3.core.config import config
from nirenberg_s3.core.continuation import (
    BRANCH_STATUSES, BranchPoint, BranchTracker, cauchy_spread, continuation, nearest_candidate,
    richardson_limit, summarize_branch, tau_schedule,
)
from nirenberg_s3.core.errors import DomainError, PreconditionError
from nirenberg_s3.core.geometry import SpherePoint
from nirenberg_s3.core.morse import make_record
from nirenberg_s3.core.reduced import solve_F_critical
from nirenberg_s3.core.solver import BlowupDiagnostics, Peak, SolverState, bubble_seed, constant_seed
from nirenberg_s3.core.spectral import HarmonicSpectrum

E4 = np.array([0.0, 0.0, 0.0, 1.0])


def _point(tau, height, t_star=None, location=E4):
    """A synthetic branch point with one concentrating peak of the given height."""
    v = HarmonicSpectrum.constant(1.0, 4, "zonal")
    state = SolverState(tau=tau, v=v, residual_norm=0.0, newton_iters=3, positive=True, L=4)
    peak = Peak(location=np.asarray(location, dtype=float), height=height, tau_m2=tau * height ** 2,
                profile_error=0.0, t_hat=3.0 * height, k_value=3.0, concentrating=True)
    diag = BlowupDiagnostics([peak], np.array([1.0 / 3.0]), True, False, 1.0)
    return BranchPoint(tau, state, diag, None, t_star)


def test_tau_schedule():
    taus = tau_schedule(0.5, 0.005, 5)
    assert taus[0] == pytest.approx(0.5) and taus[-1] == pytest.approx(0.005)
    np.testing.assert_allclose(taus[1:] / taus[:-1], taus[1] / taus[0])
    with pytest.raises(DomainError):
        tau_schedule(0.01, 0.5, 5)
    with pytest.raises(DomainError):
        tau_schedule(0.5, 0.0, 5)


def test_richardson_limit_of_a_linear_law():
    taus = np.array([0.04, 0.02, 0.01, 0.005])
    assert richardson_limit(taus, 2.0 + 3.0 * taus) == pytest.approx(2.0)
    assert richardson_limit([0.1], [7.0]) == 7.0


def test_cauchy_spread():
    assert cauchy_spread([5.0, 1.0, 1.0, 1.0]) == 0.0
    assert cauchy_spread([1.0, 1.1, 0.9]) == pytest.approx(0.2)


def test_nearest_candidate():
    candidates = {"reduced": 1.0 / 18.0, "single-point": 4.0 / 9.0}
    name, rel = nearest_candidate(0.06, candidates)
    assert name == "reduced"
    assert rel == pytest.approx(0.06 * 18.0 - 1.0)
    assert nearest_candidate(0.4, candidates)[0] == "single-point"


def test_summary_of_a_square_root_law():
    taus = np.geomspace(0.1, 0.001, 9)
    points = [_point(t, 0.5 / math.sqrt(t), t_star=1.0 / math.sqrt(2.0 * t)) for t in taus]
    s = summarize_branch(points, target=E4)
    assert s["n_points"] == 9
    assert s["log_m_slope"] == pytest.approx(-0.5, abs=1e-10)
    assert s["tau_m2_richardson"] == pytest.approx(0.25)
    assert s["tau_m2_cauchy_spread"] == pytest.approx(0.0, abs=1e-12)
    assert s["tau_log_m_decreasing"]
    assert s["final_peak_distance"] == pytest.approx(0.0, abs=1e-12)
    # t_hat = 3 m = 1.5 / sqrt(tau) against t* = 1 / sqrt(2 tau)
    assert s["t_ratio_min"] == pytest.approx(1.5 * math.sqrt(2.0))
    assert "remainder_exponent" not in s


def test_summary_of_an_empty_branch():
    assert summarize_branch([]) == {"n_points": 0}


def test_tracker_status_bookkeeping(K_axis):
    tracker = BranchTracker(K_axis)
    branch = tracker.add_branch("b", constant_seed(K_axis, 0.5, 8, "zonal"))
    assert branch.status == "pending"
    tracker.update_branch_status("b", "failed", "because")
    assert branch.status == "failed" and branch.message == "because"
    with pytest.raises(PreconditionError):
        tracker.update_branch_status("b", "lost")
    msg, ok = tracker.run_branch("missing", [0.5])
    assert not ok and "missing" in msg
    assert set(BRANCH_STATUSES) >= {"pending", "running", "completed", "failed", "resolution-limited"}


def test_short_zonal_continuation(K_axis):
    seed = constant_seed(K_axis, 0.5, 64, "zonal")
    points = continuation(0.5, 0.25, 3, K_axis, seed, critical_points=[E4, -E4])
    assert [p.tau for p in points] == pytest.approx([0.5, 0.5 / math.sqrt(2.0), 0.25])
    assert all(p.state.converged and p.state.positive for p in points)
    heights = [p.top.height for p in points]
    # heights grow as tau decreases
    assert heights == sorted(heights)
    assert points[-1].top.nearest_critical == pytest.approx(list(E4))


def test_tracker_runs_every_branch(K_axis):
    taus = tau_schedule(0.5, 0.3, 2)
    tracker = BranchTracker(K_axis, critical_points=[E4])
    tracker.add_branch("constant", constant_seed(K_axis, 0.5, 32, "zonal"))
    seed = bubble_seed([BubbleParams(SpherePoint.axis(4), 1.5, 0.15)], 32, "zonal")
    seed = seed + HarmonicSpectrum.constant(0.1, 32, "zonal")
    tracker.add_branch("bubble", seed, kind="bubble", expected_k=1,
                       t_star_fn=lambda tau: 1.0 / math.sqrt(2.0 * tau))
    results = tracker.run_all(taus)
    assert set(results) == {"constant", "bubble"}
    for name, (msg, ok) in results.items():
        assert ok, msg
        assert tracker.branches[name].status == "completed"
        assert tracker.branches[name].largest_trustworthy_tau == pytest.approx(0.3)
    assert tracker.branches["bubble"].points[-1].t_star == pytest.approx(1.0 / math.sqrt(0.6))


@pytest.mark.slow
def test_blowup_laws_along_the_bubble_branch(K_axis):
    """Zonal continuation of the single-bubble branch of x4 + 2 from tau = 0.5 to 0.005."""
    L = 512
    tau0 = 0.5
    pred = solve_F_critical([make_record(K_axis, E4, tol_hess=1e-8)], tau=tau0, restarts=4)
    seed = bubble_seed(pred.bubbles(), L, "zonal")
    t0 = float(pred.t_star[0])
    points = continuation(tau0, 0.005, 40, K_axis, seed, expected_k=1, critical_points=[E4, -E4],
                          t_star_fn=lambda tau: t0 * math.sqrt(tau0 / tau))
    s = summarize_branch(points, target=E4)
    assert s["final_peak_distance"] <= 1e-3
    assert s["log_m_slope"] == pytest.approx(-0.5, abs=0.05)
    assert s["tau_m2_cauchy_spread"] <= 0.05
    assert s["tau_log_m_decreasing"]
    assert 1.0 / 3.0 <= s["t_ratio_min"] and s["t_ratio_max"] <= 3.0
    assert s["remainder_constant"] > 0.0
    assert s["remainder_exponent"] >= 0.9


def test_failed_first_solve_reports_no_bisections(K_axis, monkeypatch):
    tracker = BranchTracker(K_axis)
    tracker.add_branch("b", constant_seed(K_axis, 0.5, 8, "zonal"))
    monkeypatch.setattr(tracker, "_solve", lambda v0, tau: None)
    msg, ok = tracker.run_branch("b", [0.5, 0.4])
    assert not ok
    assert "initial solve at tau=0.5" in msg
    assert "bisection" not in tracker.branches["b"].message
    assert tracker.bisections == 0


def test_failed_step_reports_bisection_count(K_axis, monkeypatch):
    tracker = BranchTracker(K_axis, decompose=False)
    tracker.add_branch("b", constant_seed(K_axis, 0.5, 8, "zonal"))

    def first_only(v0, tau):
        if tau != 0.5:
            return None
        return SolverState(tau=tau, v=v0, residual_norm=0.0, newton_iters=0, positive=True, L=v0.L)

    monkeypatch.setattr(tracker, "_solve", first_only)
    msg, ok = tracker.run_branch("b", [0.5, 0.4])
    assert ok
    assert tracker.branches["b"].status == "completed"
    assert tracker.bisections == config.MAX_BISECTIONS
    assert f"after {config.MAX_BISECTIONS} bisections" in msg
