#!/usr/bin/env python3
"""
Branch tracking in tau for the subcritical problem.

BranchTracker keeps named branches with a processing status, advances each
one along a geometric tau schedule with warm-started Newton solves, and
summarises the blow-up laws measured along it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bubbles import BubbleParams
from .config import config
from .errors import (
    BifurcationSuspectError, DomainError, FitError, NirenbergError, PositivityError, PreconditionError,
    ResolutionError,
)
from .geometry import SpherePoint
from .polynomial import AmbientPolynomial
from .reduced import DecompositionResult, axis_bubble, decompose_solution
from .solver import BlowupDiagnostics, SolverOptions, SolverState, diagnostics, newton_solve
from .spectral import HarmonicSpectrum

logger = logging.getLogger(__name__)

BRANCH_STATUSES = ("pending", "running", "completed", "failed", "resolution-limited")


@dataclass
class BranchPoint:
    tau: float
    state: SolverState
    diagnostics: BlowupDiagnostics
    decomposition: Optional[DecompositionResult] = None
    t_star: Optional[float] = None

    @property
    def top(self):
        return self.diagnostics.peaks[0] if self.diagnostics.peaks else None

    @property
    def fitted_rate(self) -> float:
        if self.decomposition is not None:
            return float(self.decomposition.fit[0].t)
        top = self.top
        return float(top.t_hat) if top is not None else float("nan")


@dataclass
class Branch:
    name: str
    seed: HarmonicSpectrum
    kind: str = "constant"
    expected_k: Optional[int] = None
    init_bubbles: List[BubbleParams] = field(default_factory=list)
    status: str = "pending"
    points: List[BranchPoint] = field(default_factory=list)
    largest_trustworthy_tau: Optional[float] = None
    message: str = ""
    t_star_fn: Optional[Callable[[float], float]] = None


def tau_schedule(tau_start: float, tau_end: float, n_steps: int) -> np.ndarray:
    if not (tau_start > tau_end > 0.0):
        raise DomainError(f"need tau_start > tau_end > 0, got {tau_start}, {tau_end}")
    return np.geomspace(tau_start, tau_end, max(int(n_steps), 2))


class BranchTracker:
    """Named solution branches and their continuation in tau."""

    def __init__(self, K: AmbientPolynomial, opts: Optional[SolverOptions] = None,
                 critical_points: Optional[Sequence] = None,
                 t_star_fn: Optional[Callable[[float], float]] = None,
                 decompose: bool = True):
        self.K = K
        self.opts = SolverOptions() if opts is None else opts
        self.critical_points = list(critical_points) if critical_points else None
        self.t_star_fn = t_star_fn
        self.decompose = decompose
        self.branches: Dict[str, Branch] = {}
        self.bisections = 0

    def add_branch(self, name: str, seed: HarmonicSpectrum, kind: str = "constant",
                   expected_k: Optional[int] = None, init_bubbles: Sequence[BubbleParams] = (),
                   t_star_fn: Optional[Callable[[float], float]] = None) -> Branch:
        branch = Branch(name, seed, kind, expected_k, list(init_bubbles), t_star_fn=t_star_fn)
        self.branches[name] = branch
        return branch

    def update_branch_status(self, name: str, status: str, message: str = None):
        """Update a branch's processing status."""
        if status not in BRANCH_STATUSES:
            raise PreconditionError(f"unknown branch status {status!r}")
        if name in self.branches:
            self.branches[name].status = status
            if message:
                self.branches[name].message = message

    # ------------------------------------------------------------------
    # Single steps
    # ------------------------------------------------------------------

    def _solve(self, v0: HarmonicSpectrum, tau: float) -> Optional[SolverState]:
        try:
            state = newton_solve(v0, tau, self.K, self.opts)
        except (PositivityError, BifurcationSuspectError) as e:
            logger.warning("step to tau=%g failed: %s", tau, e)
            return None
        return state if state.converged else None

    def _advance(self, v_prev: HarmonicSpectrum, tau_prev: float, tau: float,
                 depth: int = 0) -> List[Tuple[float, SolverState]]:
        """Reach tau from tau_prev, bisecting the step in log tau on failure."""
        state = self._solve(v_prev, tau)
        if state is not None:
            return [(tau, state)]
        if depth >= config.MAX_BISECTIONS:
            return []
        mid = math.sqrt(tau_prev * tau)
        self.bisections += 1
        logger.info("bisecting tau step %g -> %g at %g", tau_prev, tau, mid)
        first = self._advance(v_prev, tau_prev, mid, depth + 1)
        if not first:
            return []
        rest = self._advance(first[-1][1].v, mid, tau, depth + 1)
        return first + rest if rest else []

    def _decompose(self, branch: Branch, state: SolverState, diag: BlowupDiagnostics) -> Optional[DecompositionResult]:
        conc = [p for p in diag.peaks if p.concentrating]
        k = branch.expected_k or len(conc)
        if not self.decompose or k == 0:
            return None
        if branch.points and branch.points[-1].decomposition is not None:
            init = branch.points[-1].decomposition.fit
        elif len(conc) >= k:
            init = [BubbleParams(SpherePoint.from_vector(p.location), max(p.t_hat, 1.0), 1.0 / p.k_value)
                    for p in conc[:k]]
        elif len(branch.init_bubbles) == k:
            init = branch.init_bubbles
        else:
            return None
        if state.layout == "zonal":
            init = [axis_bubble(b) for b in init]
        try:
            return decompose_solution(state.v, k, init)
        except (FitError, NirenbergError) as e:
            logger.warning("decomposition failed at tau=%g: %s", state.tau, e)
            return None

    # ------------------------------------------------------------------
    # Continuation
    # ------------------------------------------------------------------

    def run_branch(self, name: str, taus: Sequence[float]) -> Tuple[str, bool]:
        """
        Continue one branch through the schedule.

        Returns:
            (message, success)
        """
        branch = self.branches.get(name)
        if branch is None:
            return f"❌ unknown branch {name}", False
        self.update_branch_status(name, "running")
        limit = branch.seed.L / config.RESOLUTION_DIVISOR
        t_star_fn = branch.t_star_fn or self.t_star_fn
        v, tau_prev = branch.seed, None
        for tau in taus:
            tau = float(tau)
            self.bisections = 0
            if tau_prev is None:
                steps = [(tau, s) for s in [self._solve(v, tau)] if s is not None]
            else:
                steps = self._advance(v, tau_prev, tau)
            if not steps:
                if tau_prev is None:
                    msg = f"initial solve at tau={tau:g} failed from the seed"
                else:
                    msg = f"step to tau={tau:g} failed after {self.bisections} bisections"
                self.update_branch_status(name, "failed" if not branch.points else "completed", msg)
                logger.warning("branch %s: %s", name, msg)
                return f"⚠️ branch {name}: {msg}", bool(branch.points)
            for t_reached, state in steps:
                diag = diagnostics(state, self.K, branch.expected_k, self.critical_points)
                point = BranchPoint(t_reached, state, diag, self._decompose(branch, state, diag),
                                    t_star_fn(t_reached) if t_star_fn else None)
                conc = any(p.concentrating for p in diag.peaks)
                if conc and point.fitted_rate > limit:
                    msg = (f"fitted rate {point.fitted_rate:.3g} exceeds L/{config.RESOLUTION_DIVISOR:g}"
                           f" = {limit:.3g} at tau={t_reached:g}")
                    self.update_branch_status(name, "resolution-limited", msg)
                    logger.warning("branch %s: %s", name, msg)
                    return (f"⚠️ branch {name} resolution-limited; largest trustworthy tau = "
                            f"{branch.largest_trustworthy_tau}", True)
                branch.points.append(point)
                branch.largest_trustworthy_tau = t_reached
                if not state.positive:
                    self.update_branch_status(name, "failed", f"sign change at tau={t_reached:g}")
                    return f"❌ branch {name}: sign change at tau={t_reached:g}", False
            v, tau_prev = steps[-1][1].v, steps[-1][0]
            logger.info("branch %s: tau=%g done (%d points)", name, tau_prev, len(branch.points))
        self.update_branch_status(name, "completed", f"{len(branch.points)} points")
        return f"✅ branch {name}: {len(branch.points)} points down to tau={tau_prev:g}", True

    def run_all(self, taus: Sequence[float]) -> Dict[str, Tuple[str, bool]]:
        return {name: self.run_branch(name, taus) for name in list(self.branches)}


def continuation(tau_start: float, tau_end: float, n_steps: int, K: AmbientPolynomial,
                 branch_init: HarmonicSpectrum, opts: Optional[SolverOptions] = None,
                 expected_k: Optional[int] = None, **tracker_kwargs) -> List[BranchPoint]:
    """
    Warm-started continuation of one branch over a geometric tau schedule.

    Raises:
        ResolutionError: the fitted rate left the trustworthy range L/4
    """
    tracker = BranchTracker(K, opts, **tracker_kwargs)
    tracker.add_branch("main", branch_init, expected_k=expected_k)
    msg, _ = tracker.run_branch("main", tau_schedule(tau_start, tau_end, n_steps))
    branch = tracker.branches["main"]
    if branch.status == "resolution-limited":
        raise ResolutionError(f"{msg} ({branch.message})",
                              required_order=int(4 * config.RESOLUTION_DIVISOR * branch.seed.L))
    return branch.points


# ============================================================================
# Branch summaries
# ============================================================================

def richardson_limit(taus: Sequence[float], values: Sequence[float], n_last: int = 4) -> float:
    """Intercept at tau = 0 of a straight-line fit in tau over the last points."""
    t = np.asarray(taus, dtype=float)[-n_last:]
    y = np.asarray(values, dtype=float)[-n_last:]
    if t.size < 2:
        return float(y[-1]) if y.size else float("nan")
    return float(np.polyfit(t, y, 1)[1])


def cauchy_spread(values: Sequence[float], n_last: int = 3) -> float:
    y = np.asarray(values, dtype=float)[-n_last:]
    return float((y.max() - y.min()) / abs(y.mean())) if y.size else float("nan")


def nearest_candidate(value: float, candidates: Dict[str, float]) -> Tuple[str, float]:
    """Name of the closest candidate and the relative distance to it."""
    name = min(candidates, key=lambda k: abs(value - candidates[k]) / abs(candidates[k]))
    return name, abs(value - candidates[name]) / abs(candidates[name])


def summarize_branch(points: Sequence[BranchPoint], target: Optional[Sequence[float]] = None) -> Dict[str, object]:
    """
    Blow-up laws along a branch: last-decade slope of log m against log tau,
    Richardson limit and Cauchy spread of tau m^2, the |tau log m| trend, the
    t_hat/t* range and the remainder fit against tau |log tau|.
    """
    pts = [p for p in points if p.top is not None]
    if not pts:
        return {"n_points": 0}
    taus = np.array([p.tau for p in pts])
    m = np.array([p.top.height for p in pts])
    tm2 = taus * m ** 2
    out: Dict[str, object] = {
        "n_points": len(pts), "tau_min": float(taus.min()), "concentrating": bool(pts[-1].top.concentrating),
    }

    decade = taus <= 10.0 * taus.min()
    if decade.sum() >= 2:
        out["log_m_slope"] = float(np.polyfit(np.log(taus[decade]), np.log(m[decade]), 1)[0])
    out["tau_m2"] = tm2.tolist()
    out["tau_m2_richardson"] = richardson_limit(taus, tm2)
    out["tau_m2_cauchy_spread"] = cauchy_spread(tm2)
    tlogm = np.abs(taus * np.log(m))
    out["tau_log_m"] = tlogm.tolist()
    out["tau_log_m_decreasing"] = bool(np.all(np.diff(tlogm[-min(len(tlogm), 5):]) <= 0.0))

    ratios = [p.fitted_rate / p.t_star for p in pts if p.t_star]
    if ratios:
        out["t_ratio_min"], out["t_ratio_max"] = float(min(ratios)), float(max(ratios))

    if target is not None:
        d = [float(np.arccos(np.clip(p.top.location @ np.asarray(target), -1.0, 1.0))) for p in pts]
        out["peak_distance"] = d
        out["final_peak_distance"] = d[-1]

    rem = [(p.tau, p.decomposition.remainder_norm) for p in pts
           if p.decomposition is not None and p.decomposition.remainder_norm > 0]
    if len(rem) >= 2:
        x = np.log([t * abs(math.log(t)) for t, _ in rem])
        y = np.log([r for _, r in rem])
        slope, intercept = np.polyfit(x, y, 1)
        out["remainder_exponent"] = float(slope)
        out["remainder_constant"] = float(math.exp(intercept))
    return out
