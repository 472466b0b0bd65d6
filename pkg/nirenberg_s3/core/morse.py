#!/usr/bin/env python3
"""
Critical points of K on S^3, the interaction matrix M and Index(K).

Index(K) = -1 + sum over nonempty subsets S of K^- with mu(M(S)) > 0 of
(-1)^(k - 1 + sum_{q in S} i(q)).
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigvalsh
from scipy.stats import norm, qmc

from .config import config
from .errors import DegenerateKError, DomainError, PreconditionError
from .geometry import geodesic_distance, sample_points, sphere_derivatives
from .polynomial import AmbientPolynomial
from .bubbles import greens_function

logger = logging.getLogger(__name__)


class PointClass(str, Enum):
    K_PLUS = "K_PLUS"
    K_MINUS = "K_MINUS"
    DEGENERATE = "DEGENERATE"


_CLASS_ORDER = {PointClass.K_MINUS: 0, PointClass.K_PLUS: 1, PointClass.DEGENERATE: 2}


@dataclass(frozen=True)
class CriticalPointRecord:
    """One critical point q of K with its intrinsic data."""

    location: np.ndarray
    grad_norm: float
    hessian_eigs: Tuple[float, float, float]
    morse_index: int
    laplacian: float
    k_value: float
    point_class: PointClass
    degenerate_hessian: bool = False

    @property
    def is_morse(self) -> bool:
        return not self.degenerate_hessian

    @property
    def flat_laplacian(self) -> bool:
        return self.point_class is PointClass.DEGENERATE

    def to_dict(self) -> Dict[str, object]:
        return {
            "location": [float(v) for v in self.location],
            "grad_norm": self.grad_norm,
            "hessian_eigs": list(self.hessian_eigs),
            "morse_index": self.morse_index,
            "laplacian": self.laplacian,
            "k_value": self.k_value,
            "class": self.point_class.value,
            "degenerate_hessian": self.degenerate_hessian,
        }


# ============================================================================
# Critical point search
# ============================================================================

def check_positive(K, n_samples: int = None, seed: int = 0) -> float:
    """Minimum of K over random samples; DomainError if K <= 0 anywhere sampled."""
    n_samples = config.POSITIVITY_SAMPLES if n_samples is None else n_samples
    vals = K.evaluate(sample_points(n_samples, seed))
    kmin = float(np.min(vals))
    if kmin <= 0.0:
        raise DomainError(f"K must be positive on S^3; sampled minimum {kmin:.6g}")
    return kmin


def c2_sample_norm(K, n_samples: int = 256, seed: int = 0) -> float:
    """max of |K|, |grad K| and ||D^2 K|| over sampled points (ambient derivatives)."""
    pts = sample_points(n_samples, seed)
    vals = np.abs(K.evaluate(pts))
    grads = np.linalg.norm(K.gradient(pts), axis=-1)
    hess = np.linalg.norm(K.hessian(pts), ord=2, axis=(-2, -1))
    return float(max(vals.max(), grads.max(), hess.max()))


def quasi_random_starts(n: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points pushed through the normal quantile and normalised."""
    u = qmc.Halton(d=4, scramble=True, seed=seed).random(n)
    g = norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def riemannian_newton(K, x0: np.ndarray, tol_grad: float = None, max_iter: int = None,
                      step_cap: float = None) -> Tuple[np.ndarray, bool]:
    """
    Newton on grad K = 0 in the tangent frame, normalising retraction.

    Returns:
        (final point, converged)
    """
    tol_grad = config.TOL_GRAD if tol_grad is None else tol_grad
    max_iter = config.CRITICAL_NEWTON_MAX_ITER if max_iter is None else max_iter
    step_cap = config.NEWTON_STEP_CAP if step_cap is None else step_cap
    x = np.asarray(x0, dtype=float)
    x = x / np.linalg.norm(x)
    for _ in range(max_iter):
        d = sphere_derivatives(K, x)
        if d.grad_norm <= tol_grad:
            return x, True
        g = d.frame.T @ d.gradient
        step, *_ = np.linalg.lstsq(d.hessian, -g, rcond=None)
        size = np.linalg.norm(step)
        if size > step_cap:
            step *= step_cap / size
        x = x + d.frame @ step
        x /= np.linalg.norm(x)
    return x, sphere_derivatives(K, x).grad_norm <= tol_grad


def make_record(K, x: np.ndarray, tol_hess: float, tol_lap: float = None) -> CriticalPointRecord:
    tol_lap = config.TOL_LAP if tol_lap is None else tol_lap
    d = sphere_derivatives(K, x)
    eigs = np.linalg.eigvalsh(d.hessian)
    degenerate = bool(np.any(np.abs(eigs) <= tol_hess))
    if d.laplacian < -tol_lap:
        cls = PointClass.K_MINUS
    elif d.laplacian > tol_lap:
        cls = PointClass.K_PLUS
    else:
        cls = PointClass.DEGENERATE
    return CriticalPointRecord(
        location=np.array(x, dtype=float), grad_norm=d.grad_norm,
        hessian_eigs=tuple(float(e) for e in eigs), morse_index=int(np.sum(eigs < 0)),
        laplacian=d.laplacian, k_value=d.value, point_class=cls, degenerate_hessian=degenerate,
    )


def find_critical_points(K, n_starts: int = None, seed: int = 0, strict: bool = False,
                         tol_grad: float = None, tol_lap: float = None) -> List[CriticalPointRecord]:
    """
    Multi-start Riemannian Newton inventory of the critical set of K.

    Args:
        K: positive AmbientPolynomial
        n_starts: number of quasi-random starts
        seed: scrambling seed for the starts
        strict: raise DegenerateKError instead of flagging degenerate points

    Returns:
        records sorted by (class, location)
    """
    n_starts = config.DEFAULT_N_STARTS if n_starts is None else n_starts
    check_positive(K, seed=seed)
    tol_hess = config.hessian_tolerance(c2_sample_norm(K, seed=seed))

    found: List[np.ndarray] = []
    failures = 0
    for x0 in quasi_random_starts(n_starts, seed):
        x, ok = riemannian_newton(K, x0, tol_grad)
        if not ok:
            failures += 1
            continue
        if any(geodesic_distance(x, y) <= config.MERGE_DISTANCE for y in found):
            continue
        found.append(x)
    if failures:
        logger.debug("%d of %d critical-point starts did not converge", failures, n_starts)

    records = [make_record(K, x, tol_hess, tol_lap) for x in found]
    records.sort(key=lambda r: (_CLASS_ORDER[r.point_class], tuple(np.round(-r.location, 9))))

    bad = [r for r in records if not r.is_morse]
    if bad:
        msg = f"{len(bad)} of {len(records)} critical points are degenerate; K is not Morse"
        if strict:
            raise DegenerateKError(msg, records)
        logger.warning(msg)
    flat = sum(r.flat_laplacian for r in records if r.is_morse)
    if flat:
        logger.warning("%d nondegenerate critical points have |Lap K| <= tol_lap", flat)
    logger.info("found %d critical points (%d in K^-)", len(records),
                sum(r.point_class is PointClass.K_MINUS for r in records))
    return records


def morse_euler_sum(records: Sequence[CriticalPointRecord]) -> int:
    """sum of (-1)^i(q); zero for a Morse function on S^3."""
    return int(sum((-1) ** r.morse_index for r in records))


# ============================================================================
# Interaction matrix
# ============================================================================

@dataclass(frozen=True)
class InteractionMatrix:
    points: Tuple[CriticalPointRecord, ...]
    entries: np.ndarray
    mu_min: float

    @property
    def k(self) -> int:
        return len(self.points)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def to_dict(self) -> Dict[str, object]:
        return {"entries": self.entries.tolist(), "mu_min": self.mu_min,
                "points": [[float(v) for v in p.location] for p in self.points]}


def build_matrix_M(points: Sequence[CriticalPointRecord], K=None) -> InteractionMatrix:
    """
    M_ii = -Lap K(q_i) / K(q_i)^3,  M_ij = -6 G(q_i, q_j) / (K(q_i) K(q_j)).

    Raises:
        PreconditionError: a K^+ point is in the list
        DomainError: two points coincide
    """
    pts = tuple(points)
    if not pts:
        raise PreconditionError("interaction matrix needs at least one point")
    for p in pts:
        if p.point_class is PointClass.K_PLUS:
            raise PreconditionError("interaction matrix is defined on critical points outside K^+")
    k = len(pts)
    M = np.zeros((k, k))
    for i, p in enumerate(pts):
        M[i, i] = -p.laplacian / p.k_value ** 3
        for j in range(i + 1, k):
            q = pts[j]
            if geodesic_distance(p.location, q.location) <= config.MERGE_DISTANCE:
                raise DomainError("interaction matrix points must be distinct")
            M[i, j] = M[j, i] = -6.0 * greens_function(p.location, q.location) / (p.k_value * q.k_value)
    mu = float(M[0, 0]) if k == 1 else float(eigvalsh(M, subset_by_index=[0, 0])[0])
    return InteractionMatrix(pts, M, mu)


def charpoly_min_eig(M: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric k x k matrix (k <= 3) from closed-form roots."""
    M = np.asarray(M, dtype=float)
    k = M.shape[0]
    if k == 1:
        return float(M[0, 0])
    if k == 2:
        a, b, d = M[0, 0], M[0, 1], M[1, 1]
        return float(0.5 * (a + d) - np.hypot(0.5 * (a - d), b))
    if k != 3:
        raise PreconditionError("closed-form eigenvalues only for k <= 3")
    # trigonometric roots of the characteristic cubic
    q = np.trace(M) / 3.0
    off = M[0, 1] ** 2 + M[0, 2] ** 2 + M[1, 2] ** 2
    p2 = np.sum((np.diag(M) - q) ** 2) + 2.0 * off
    p = np.sqrt(p2 / 6.0)
    if p == 0.0:
        return float(q)
    B = (M - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    return float(q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0))


# ============================================================================
# Index(K)
# ============================================================================

@dataclass(frozen=True)
class SubsetRecord:
    members: Tuple[int, ...]     # indices into DegreeReport.K_minus
    mu: float
    index_sum: int
    contribution: int            # 0 when mu <= tol_mu
    near_degenerate: bool

    @property
    def k(self) -> int:
        return len(self.members)


@dataclass
class DegreeReport:
    """
    H_configs index into K_minus + flat_points, the critical points outside K^+.
    """

    critical_points: List[CriticalPointRecord]
    K_minus: List[CriticalPointRecord]
    subsets: List[SubsetRecord]
    index: int
    in_A: bool
    laplacian_margin: float
    mu_margin: float
    H_configs: List[Tuple[int, ...]]
    pairwise_condition_holds: bool
    closed_form_index: Optional[int]
    morse_euler: int
    warnings: List[str] = field(default_factory=list)
    flat_points: List[CriticalPointRecord] = field(default_factory=list)

    @property
    def existence_guaranteed(self) -> bool:
        """A nonzero degree on A forces a solution."""
        return self.in_A and self.index != 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "meta": {"n_critical_points": len(self.critical_points), "n_K_minus": len(self.K_minus),
                     "n_flat_laplacian": len(self.flat_points)},
            "critical_points": [r.to_dict() for r in self.critical_points],
            "subsets": [
                {"members": list(s.members), "k": s.k, "mu": s.mu, "index_sum": s.index_sum,
                 "contribution": s.contribution, "near_degenerate": s.near_degenerate}
                for s in self.subsets
            ],
            "statistics": {
                "index": self.index,
                "in_A": self.in_A,
                "laplacian_margin": self.laplacian_margin,
                "mu_margin": self.mu_margin,
                "H_configs": [list(h) for h in self.H_configs],
                "pairwise_condition_holds": self.pairwise_condition_holds,
                "closed_form_index": self.closed_form_index,
                "morse_euler_sum": self.morse_euler,
                "existence_guaranteed": self.existence_guaranteed,
            },
            "warnings": list(self.warnings),
        }


def pairwise_laplacian_condition(records: Sequence[CriticalPointRecord]) -> bool:
    """Lap K(P) Lap K(Q) < 9 K(P) K(Q) for every pair in K^-."""
    return all(
        p.laplacian * q.laplacian < 9.0 * p.k_value * q.k_value
        for p, q in itertools.combinations(records, 2)
    )


def closed_form_index(records: Sequence[CriticalPointRecord]) -> int:
    """
    -1 + sum over q with Lap K(q) < 0 of (-1)^i(q).

    Equals Index(K) for a Morse K in A when K^- has at most one point or
    Lap K(P) Lap K(Q) < 9 K(P) K(Q) on every pair. Since G >= 1/2, that
    condition gives every pair, hence every k >= 2 subset, mu(M) < 0.
    """
    return -1 + sum((-1) ** r.morse_index for r in records if r.point_class is PointClass.K_MINUS)


def _flat_configurations(kminus: List[CriticalPointRecord], flat: List[CriticalPointRecord],
                         tol_mu: float, warnings: List[str]) -> List[Tuple[int, ...]]:
    """Subsets of K^- + flat with at least one flat member and |mu(M)| <= tol_mu."""
    if not flat:
        return []
    n_minus = len(kminus)
    # |Lap K| <= tol_lap already puts a flat singleton on the null set
    configs = [(n_minus + j,) for j in range(len(flat))]
    pool = kminus + flat
    if len(pool) > config.MAX_SUBSET_POINTS:
        warnings.append(f"{len(pool)} points outside K^+; only flat singletons are listed in H(K)")
        logger.warning(warnings[-1])
        return configs
    for k in range(2, len(pool) + 1):
        for members in itertools.combinations(range(len(pool)), k):
            if members[-1] < n_minus:
                continue
            Mk = build_matrix_M([pool[i] for i in members])
            if abs(Mk.mu_min) <= tol_mu * max(Mk.norm, np.finfo(float).tiny):
                configs.append(members)
    return configs


def index_of_K(K, records: Optional[Sequence[CriticalPointRecord]] = None, n_starts: int = None,
               seed: int = 0, tol_mu: float = None) -> DegreeReport:
    """
    Degree report of K by subset enumeration over K^-.

    Critical points with a nondegenerate Hessian but |Lap K| <= tol_lap stay
    out of K^-. They pull the Laplacian margin under tol_lap, so K is reported
    outside A, and their singletons are listed in H(K).

    Raises:
        DegenerateKError: some critical point has a degenerate Hessian, or none were found
        PreconditionError: more than MAX_SUBSET_POINTS points in K^-
    """
    tol_mu = config.TOL_MU if tol_mu is None else tol_mu
    if records is None:
        records = find_critical_points(K, n_starts, seed)
    records = list(records)
    bad = [r for r in records if not r.is_morse]
    if bad or not records:
        raise DegenerateKError(f"Index(K) needs a Morse function: {len(bad)} degenerate of {len(records)}",
                               records)
    kminus = [r for r in records if r.point_class is PointClass.K_MINUS]
    flat = [r for r in records if r.flat_laplacian]
    if len(kminus) > config.MAX_SUBSET_POINTS:
        raise PreconditionError(f"|K^-| = {len(kminus)} exceeds the subset guard {config.MAX_SUBSET_POINTS}")

    warnings: List[str] = []
    for r in flat:
        warnings.append(f"Lap K = {r.laplacian:.3e} at critical point {np.round(r.location, 9).tolist()}")
        logger.warning(warnings[-1])
    subsets: List[SubsetRecord] = []
    index = -1
    for k in range(1, len(kminus) + 1):
        for members in itertools.combinations(range(len(kminus)), k):
            Mk = build_matrix_M([kminus[i] for i in members])
            mu = Mk.mu_min
            tol = tol_mu * max(Mk.norm, np.finfo(float).tiny)
            # Rayleigh bound
            assert mu <= np.min(np.diag(Mk.entries)) + 1e-12 * Mk.norm
            if k == 1:
                assert mu > 0.0
            isum = sum(kminus[i].morse_index for i in members)
            contribution = (-1) ** (k - 1 + isum) if mu > tol else 0
            near = abs(mu) <= 10.0 * tol
            if near:
                warnings.append(f"mu(M) = {mu:.3e} is within 10 tol_mu for subset {members}")
                logger.warning(warnings[-1])
            index += contribution
            subsets.append(SubsetRecord(members, mu, isum, contribution, near))

    lap_margin = float(min(abs(r.laplacian) for r in records))
    multi = [s for s in subsets if s.k >= 2]
    norms = {s.members: build_matrix_M([kminus[i] for i in s.members]).norm for s in multi}
    mu_margin = float(min((abs(s.mu) / max(norms[s.members], np.finfo(float).tiny) for s in multi),
                          default=float("inf")))
    H = [s.members for s in multi if abs(s.mu) <= tol_mu * max(norms[s.members], np.finfo(float).tiny)]
    H += _flat_configurations(kminus, flat, tol_mu, warnings)
    in_A = lap_margin > config.TOL_LAP and mu_margin > tol_mu

    holds = pairwise_laplacian_condition(kminus)
    cor = closed_form_index(records) if holds else None
    if holds and cor != index:
        warnings.append(f"closed-form index {cor} disagrees with subset enumeration {index}")
        logger.warning(warnings[-1])

    return DegreeReport(
        critical_points=records, K_minus=kminus, subsets=subsets, index=index, in_A=in_A,
        laplacian_margin=lap_margin, mu_margin=mu_margin, H_configs=H, pairwise_condition_holds=holds,
        closed_form_index=cor, morse_euler=morse_euler_sum(records), warnings=warnings, flat_points=flat,
    )


# ============================================================================
# Index along a homotopy
# ============================================================================

@dataclass(frozen=True)
class PathSample:
    s: float
    index: Optional[int]         # None where K_s has a degenerate Hessian
    in_A: bool
    mu_margin: float
    laplacian_margin: float
    contributions: Dict[Tuple[int, ...], int] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class IndexJump:
    s_lo: float
    s_hi: float
    index_lo: Optional[int]
    index_hi: Optional[int]
    subsets: Tuple[Tuple[int, ...], ...]     # K^- subsets whose contribution changed


@dataclass
class IndexPath:
    """Index(K_s) along K_s = (1 - s) K_0 + s K_1."""

    samples: List[PathSample]
    jumps: List[IndexJump]

    def to_dict(self) -> Dict[str, object]:
        return {
            "samples": [
                {"s": p.s, "index": p.index, "in_A": p.in_A, "mu_margin": p.mu_margin,
                 "laplacian_margin": p.laplacian_margin}
                for p in self.samples
            ],
            "jumps": [
                {"s_lo": j.s_lo, "s_hi": j.s_hi, "index_lo": j.index_lo, "index_hi": j.index_hi,
                 "subsets": [list(m) for m in j.subsets]}
                for j in self.jumps
            ],
        }


def interpolate_K(K0: AmbientPolynomial, K1: AmbientPolynomial, s: float) -> AmbientPolynomial:
    return AmbientPolynomial(K0.scaled(1.0 - s).terms + K1.scaled(s).terms)


def _path_sample(K0, K1, s: float, n_starts: int, seed: int, tol_mu: float) -> PathSample:
    try:
        rep = index_of_K(interpolate_K(K0, K1, s), n_starts=n_starts, seed=seed, tol_mu=tol_mu)
    except DegenerateKError as e:
        logger.warning("K_s at s=%g is not Morse: %s", s, e)
        return PathSample(s, None, False, 0.0, 0.0)
    contributions = {sub.members: sub.contribution for sub in rep.subsets}
    return PathSample(s, rep.index, rep.in_A, rep.mu_margin, rep.laplacian_margin, contributions)


def index_along_path(K0: AmbientPolynomial, K1: AmbientPolynomial, n_steps: int = 8, n_bisect: int = 0,
                     n_starts: int = None, seed: int = 0, tol_mu: float = None) -> IndexPath:
    """
    Track Index(K_s) on s = 0, 1/n_steps, ..., 1 and bracket every change.

    Inside A the degree is locally constant, so Index changes only where K_s
    leaves A: a mu(M) of some K^- subset or a Laplacian at a critical point
    crosses zero. Each bracket is halved n_bisect times. The critical set of
    K_s must keep its canonical order along the path for subset labels to
    compare.
    """
    if n_steps < 1:
        raise PreconditionError(f"n_steps must be >= 1, got {n_steps}")
    tol_mu = config.TOL_MU if tol_mu is None else tol_mu
    def sample(s):
        return _path_sample(K0, K1, float(s), n_starts, seed, tol_mu)

    samples = [sample(s) for s in np.linspace(0.0, 1.0, n_steps + 1)]
    jumps: List[IndexJump] = []
    for lo, hi in zip(samples[:-1], samples[1:]):
        if lo.index == hi.index:
            continue
        for _ in range(n_bisect):
            mid = sample(0.5 * (lo.s + hi.s))
            lo, hi = (mid, hi) if mid.index == lo.index else (lo, mid)
        changed = tuple(sorted(m for m in set(lo.contributions) | set(hi.contributions)
                               if lo.contributions.get(m, 0) != hi.contributions.get(m, 0)))
        jumps.append(IndexJump(float(lo.s), float(hi.s), lo.index, hi.index, changed))
        logger.info("Index(K_s) changes %s -> %s for s in [%.6g, %.6g]", lo.index, hi.index, lo.s, hi.s)
    return IndexPath(samples, jumps)
