#!/usr/bin/env python3
"""
The standard bubble family on S^3 and its interaction integrals.

    delta_{P,t}(x) = t / (1 + ((t^2 - 1)/2)(1 - cos d(x, P)))

solves P_sigma v = v^2 for every (P, t). Its Gegenbauer expansion about P is
exact: delta = (1 - r^2) sum_l r^l C_l^{(1)}(x . P) with r = (t - 1)/(t + 1),
so spectra of bubbles and their t-derivatives are closed form.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import config
from .errors import DomainError, IntegrationError, PreconditionError, ResolutionError
from .geometry import (
    S2_AREA, S3_AREA, PointLike, SpherePoint, as_array, build_grid,
    geodesic_distance, grid_for_order, sample_points, tangent_frame,
)
from .spectral import (
    HarmonicSpectrum, SphericalField, apply_P_sigma, chebyshev_u_series,
    forward_transform, gegenbauer_to_spectrum,
)
from ..utils.quadrature import composite_gauss, graded_breakpoints

logger = logging.getLogger(__name__)

# <d_t delta, d_t delta> t^2 and <d_P delta, d_P delta> / t^2 (unit direction, t -> infinity).
# measure_gamma_2 / measure_gamma_1 recompute both from the spectral sums.
GAMMA_1 = np.pi ** 2 / 4.0
GAMMA_2 = np.pi ** 2


# ============================================================================
# Parameters and pointwise evaluation
# ============================================================================

@dataclass(frozen=True)
class BubbleParams:
    """Location P, concentration rate t >= 1 and amplitude alpha > 0 of one bubble."""

    P: SpherePoint
    t: float
    alpha: float = 1.0

    def __post_init__(self):
        if not isinstance(self.P, SpherePoint):
            object.__setattr__(self, "P", SpherePoint.from_vector(self.P))
        if not (np.isfinite(self.t) and self.t >= 1.0):
            raise DomainError(f"bubble rate must satisfy t >= 1, got {self.t!r}")
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise DomainError(f"bubble amplitude must be positive, got {self.alpha!r}")

    @property
    def r(self) -> float:
        return rate_ratio(self.t)


def rate_ratio(t: float) -> float:
    return (t - 1.0) / (t + 1.0)


def delta_of_cos(t: float, c: np.ndarray) -> np.ndarray:
    return t / (1.0 + 0.5 * (t * t - 1.0) * (1.0 - c))


def dt_delta_of_cos(t: float, c: np.ndarray) -> np.ndarray:
    D = 1.0 + 0.5 * (t * t - 1.0) * (1.0 - c)
    return (D - t * t * (1.0 - c)) / (D * D)


def eval_bubble(b: BubbleParams, x: PointLike, deriv: str = "value",
                direction: Optional[Sequence[float]] = None):
    """
    alpha * delta_{P,t}, or its derivative in t or along a tangent direction at P.

    Args:
        b: bubble parameters
        x: a point or an array of points (last axis 4)
        deriv: "value", "d_t" or "d_P"
        direction: tangent vector at P (required for "d_P")
    """
    xs = as_array(x)
    c = np.clip(xs @ b.P.x, -1.0, 1.0)
    t = b.t
    if deriv == "value":
        out = b.alpha * delta_of_cos(t, c)
    elif deriv == "d_t":
        out = b.alpha * dt_delta_of_cos(t, c)
    elif deriv == "d_P":
        e = _tangent_direction(b.P, direction)
        D = 1.0 + 0.5 * (t * t - 1.0) * (1.0 - c)
        out = b.alpha * t * (t * t - 1.0) * (xs @ e) / (2.0 * D * D)
    else:
        raise PreconditionError(f"unknown bubble derivative {deriv!r}")
    return float(out) if np.ndim(out) == 0 else out


def _tangent_direction(P: SpherePoint, direction) -> np.ndarray:
    if direction is None:
        raise PreconditionError("d_P needs a tangent direction")
    e = np.asarray(direction, dtype=float).reshape(4)
    if abs(e @ P.x) > 1e-10 * max(1.0, np.linalg.norm(e)):
        raise PreconditionError("d_P direction must be tangent at P")
    return e


# ============================================================================
# Spectra
# ============================================================================

def bubble_gegenbauer(t: float, L: int) -> Tuple[np.ndarray, np.ndarray]:
    """a_l = (1 - r^2) r^l and da_l/dt for l = 0..L."""
    r = rate_ratio(t)
    l = np.arange(L + 1, dtype=float)
    a = (1.0 - r * r) * r ** l
    r_lm1 = np.where(l > 0, r ** np.maximum(l - 1.0, 0.0), 0.0)
    da_dr = -2.0 * r * r ** l + (1.0 - r * r) * l * r_lm1
    dr_dt = 2.0 / (t + 1.0) ** 2
    return a, da_dr * dr_dt


def bubble_spectrum(b: BubbleParams, L: int, deriv: str = "value",
                    direction: Optional[Sequence[float]] = None,
                    layout: str = "full") -> HarmonicSpectrum:
    """
    Exact degree-<=L spectrum of alpha * delta (or a derivative).

    Value and d_t use the addition theorem at P. d_P evaluates
    sum_l a_l U_l'(x.P)(x.e) on a grid of order 2L+1 and projects, which is
    exact for this band-limited function.
    """
    a, da = bubble_gegenbauer(b.t, L)
    if deriv in ("value", "d_t"):
        coeffs = a if deriv == "value" else da
        return b.alpha * gegenbauer_to_spectrum(coeffs, b.P, layout)
    if deriv != "d_P":
        raise PreconditionError(f"unknown bubble derivative {deriv!r}")
    if layout == "zonal":
        raise PreconditionError("d_P of a bubble is not zonal")
    e = _tangent_direction(b.P, direction)
    grid = build_grid(max(L, 1))
    c = np.clip(grid.nodes @ b.P.x, -1.0, 1.0)
    vals = b.alpha * chebyshev_u_series(a, c, derivative=True) * (grid.nodes @ e)
    return forward_transform(SphericalField(grid, vals), L)


def hsigma_inner(u: HarmonicSpectrum, v: HarmonicSpectrum) -> float:
    """<u, v> = integral of (P_sigma u) v = sum_l (l+1) (block dot product)."""
    if u.L != v.L or u.layout != v.layout:
        raise PreconditionError(f"H^sigma inner product needs equal L and layout: "
                                f"({u.L}, {u.layout}) vs ({v.L}, {v.layout})")
    return float(np.sum((u.degrees() + 1.0) * u.coeffs * v.coeffs))


def hsigma_norm(u: HarmonicSpectrum) -> float:
    return math.sqrt(max(hsigma_inner(u, u), 0.0))


def measure_gamma_2(t: float = 10.0, L: int = None) -> float:
    """t^2 <d_t delta, d_t delta> from the zonal spectrum."""
    L = config.GAMMA_MEASURE_L if L is None else L
    s = bubble_spectrum(BubbleParams(SpherePoint.axis(4), t), L, "d_t", layout="zonal")
    return t * t * hsigma_inner(s, s)


def measure_gamma_1(t: float = 10.0, L: int = None) -> float:
    """
    <d_P delta, d_P delta> / t^2 for a unit direction, summed in closed form.

    Per degree, sum_m |grad Y_lm(P) . e|^2 = l(l+2)(l+1)^2 / (3 * 2 pi^2).
    """
    L = config.GAMMA_MEASURE_L if L is None else L
    a, _ = bubble_gegenbauer(t, L)
    l = np.arange(L + 1, dtype=float)
    total = np.sum((l + 1.0) * a ** 2 * (S3_AREA / (l + 1.0)) ** 2 * l * (l + 2.0) * (l + 1.0) ** 2 / (3.0 * S3_AREA))
    return float(total / (t * t))


def bubble_tangent_gram(b: BubbleParams, L: int) -> Tuple[np.ndarray, float]:
    """
    Gram matrix of {delta, d_t delta, d_P delta (3 frame directions)} in <.,.>.

    Returns:
        (gram 5x5, condition number)
    """
    E = tangent_frame(b.P)
    spectra = [bubble_spectrum(b, L), bubble_spectrum(b, L, "d_t")]
    spectra += [bubble_spectrum(b, L, "d_P", E[:, i]) for i in range(3)]
    G = np.array([[hsigma_inner(u, v) for v in spectra] for u in spectra])
    eig = np.linalg.eigvalsh(G)
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else float("inf")
    return G, cond


# ============================================================================
# Green's function
# ============================================================================

def greens_function_of_distance(d: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 - np.cos(d))


def greens_function(p: PointLike, q: PointLike):
    """G_p(q) = 1 / (1 - cos d(p, q)); symmetric, singular on the diagonal."""
    c = np.clip(np.sum(as_array(p) * as_array(q), axis=-1), -1.0, 1.0)
    if np.any(1.0 - c <= 1e-14):
        raise DomainError("Green's function is singular at coincident points")
    out = 1.0 / (1.0 - c)
    return float(out) if np.ndim(out) == 0 else out


def pair_integral_closed_form(b1: BubbleParams, b2: BubbleParams) -> float:
    """
    integral of delta_1^2 delta_2 = <delta_1, delta_2> (since P_sigma delta_1 = delta_1^2)
    = 2 pi^2 (1 - r1^2)(1 - r2^2) / (1 - 2 r1 r2 cos d + r1^2 r2^2), times the amplitudes.
    """
    r1, r2 = b1.r, b2.r
    rho = r1 * r2
    c = float(np.clip(b1.P.x @ b2.P.x, -1.0, 1.0))
    val = S3_AREA * (1 - r1 * r1) * (1 - r2 * r2) / (1.0 - 2.0 * rho * c + rho * rho)
    return b1.alpha ** 2 * b2.alpha * val


# ============================================================================
# Peak-refined quadrature
# ============================================================================

def _refine(evaluate: Callable[[int], float], rtol: float, what: str) -> float:
    n = config.PANEL_NODES
    prev = evaluate(n)
    while 2 * n <= config.PANEL_MAX_NODES:
        n *= 2
        cur = evaluate(n)
        if not np.isfinite(cur):
            raise IntegrationError(f"{what}: non-finite quadrature value")
        if abs(cur - prev) <= rtol * abs(cur) + 1e-300:
            return cur
        prev = cur
    raise ResolutionError(f"{what}: quadrature did not settle with {n} nodes per panel", required_order=2 * n)


def pair_quadrature(integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                    P1: PointLike, t1: float, P2: PointLike, t2: float,
                    rtol: float = None) -> float:
    """
    integral over S^3 of integrand(x . P1, x . P2).

    In a frame with P1 = e4 and P2 in the (x3, x4) plane the integrand does not
    depend on phi, so the integral reduces to 2 pi times a (chi, cos theta)
    integral; panels are graded geometrically towards both peaks.
    """
    rtol = config.QUAD_RTOL if rtol is None else rtol
    dist = geodesic_distance(P1, P2)
    sd, cd = math.sin(dist), math.cos(dist)
    chi_foci = [(0.0, 1.0 / t1), (dist, 1.0 / t2)]
    chi_edges = graded_breakpoints(0.0, np.pi, chi_foci)
    if sd > 1e-12:
        u_edges = graded_breakpoints(-1.0, 1.0, [(1.0, min(1.0, 2.0 / (t2 * sd) ** 2))])
    else:
        u_edges = np.array([-1.0, 1.0])

    def _evaluate(n: int) -> float:
        chi, wc = composite_gauss(chi_edges, n)
        u, wu = composite_gauss(u_edges, n)
        c1 = np.cos(chi)[:, None]
        c2 = np.clip(cd * c1 + sd * np.sin(chi)[:, None] * u[None, :], -1.0, 1.0)
        vals = integrand(np.broadcast_to(c1, c2.shape), c2)
        return float(2.0 * np.pi * np.sum((wc * np.sin(chi) ** 2)[:, None] * vals * wu[None, :]))

    return _refine(_evaluate, rtol, "two-bubble integral")


def radial_quadrature(integrand: Callable[[np.ndarray], np.ndarray], t: float, rtol: float = None) -> float:
    """integral over S^3 of integrand(x . P) for one peak of rate t at P."""
    rtol = config.QUAD_RTOL if rtol is None else rtol
    edges = graded_breakpoints(0.0, np.pi, [(0.0, 1.0 / t), (np.pi, 1.0 / t)])

    def _evaluate(n: int) -> float:
        chi, w = composite_gauss(edges, n)
        return float(S2_AREA * np.sum(w * np.sin(chi) ** 2 * integrand(np.cos(chi))))

    return _refine(_evaluate, rtol, "radial integral")


def interaction_integral(b1: BubbleParams, b2: BubbleParams, powers: Tuple[float, float] = (2.0, 1.0),
                         rtol: float = None) -> float:
    """
    integral of (alpha1 delta_1)^a (alpha2 delta_2)^b over S^3 by peak-refined quadrature.

    Raises:
        ResolutionError: a peak is too narrow for the panel budget
    """
    a, bexp = powers
    if b1.P.isclose(b2.P, 1e-14):
        def f1(c):
            return (b1.alpha * delta_of_cos(b1.t, c)) ** a * (b2.alpha * delta_of_cos(b2.t, c)) ** bexp
        return radial_quadrature(f1, max(b1.t, b2.t), rtol)

    def f2(c1, c2):
        return (b1.alpha * delta_of_cos(b1.t, c1)) ** a * (b2.alpha * delta_of_cos(b2.t, c2)) ** bexp

    return pair_quadrature(f2, b1.P, b1.t, b2.P, b2.t, rtol)


# ============================================================================
# Asymptotic identities
# ============================================================================

@dataclass(frozen=True)
class IdentitySpec:
    identity: str
    band: Tuple[float, float]
    min_exponent: Optional[float]
    description: str


IDENTITIES: Dict[str, IdentitySpec] = {
    "cross-square": IdentitySpec("cross-square", (0.9, 1.1), 1.0, "int delta1^2 delta2 ~ 4 pi |S2| G / (t1 t2)"),
    "cross-subcritical": IdentitySpec("cross-subcritical", (0.5, 2.0), None, "int delta1^(2-tau) delta2 = O(tau)"),
    "cross-rate-derivative": IdentitySpec("cross-rate-derivative", (0.9, 1.1), None, "d/dt1 int delta1^2 delta2 ~ -4 pi |S2| G / (t1^2 t2)"),
    "self-rate-derivative": IdentitySpec("self-rate-derivative", (0.9, 1.1), None, "d/dt1 int delta1^(3-tau) ~ -(tau/t1)(pi/2)|S2|"),
    "second-moment": IdentitySpec("second-moment", (0.9, 1.1), None, "int |y|^2 delta1^(3-tau) ~ (1/t1^2)(3 pi/2)|S2|"),
    "second-moment-rate-derivative": IdentitySpec("second-moment-rate-derivative", (0.9, 1.1), None, "d/dt1 int |y|^2 delta1^(3-tau) ~ -(3 pi/t1^3)|S2|"),
    "bubble-norm": IdentitySpec("bubble-norm", (1.0 - 1e-5, 1.0 + 1e-5), None, "<delta, delta> = |S3|"),
    "rate-tangent-norm": IdentitySpec("rate-tangent-norm", (1.0 - 1e-5, 1.0 + 1e-5), None, "t^2 <d_t delta, d_t delta> = Gamma_2"),
}


def leading_order(identity: str, t1: float, t2: float, tau: float, G: float = 1.0) -> float:
    """Companion predictor: the leading-order formula of each identity."""
    if identity in ("cross-square", "cross-subcritical"):
        return 4.0 * np.pi * S2_AREA * G / (t1 * t2)
    if identity == "cross-rate-derivative":
        return -4.0 * np.pi * S2_AREA * G / (t1 * t1 * t2)
    if identity == "self-rate-derivative":
        return -(tau / t1) * (np.pi / 2.0) * S2_AREA
    if identity == "second-moment":
        return (1.0 / t1 ** 2) * (3.0 * np.pi / 2.0) * S2_AREA
    if identity == "second-moment-rate-derivative":
        return -(3.0 * np.pi / t1 ** 3) * S2_AREA
    if identity == "bubble-norm":
        return S3_AREA
    if identity == "rate-tangent-norm":
        return GAMMA_2
    raise PreconditionError(f"unknown identity {identity!r}")


def _chart_weight(c: np.ndarray) -> np.ndarray:
    return (1.0 - c) / (1.0 + c)


def identity_value(identity: str, t1: float, t2: float, tau: float, dist: float) -> Dict[str, float]:
    """
    Numeric value of one identity. Second-moment identities also report the
    geodesic-distance variant (d^2 instead of the chart |y|^2).
    """
    P1 = SpherePoint.axis(4)
    P2 = SpherePoint([0.0, 0.0, math.sin(dist), math.cos(dist)])
    b1 = BubbleParams(P1, t1)
    b2 = BubbleParams(P2, t2)
    p = 3.0 - tau
    extra: Dict[str, float] = {}

    if identity == "cross-square":
        val = interaction_integral(b1, b2, (2.0, 1.0))
    elif identity == "cross-subcritical":
        val = interaction_integral(b1, b2, (2.0 - tau, 1.0))
    elif identity == "cross-rate-derivative":
        val = pair_quadrature(
            lambda c1, c2: 2.0 * delta_of_cos(t1, c1) * dt_delta_of_cos(t1, c1) * delta_of_cos(t2, c2),
            P1, t1, P2, t2)
    elif identity == "self-rate-derivative":
        val = radial_quadrature(lambda c: p * delta_of_cos(t1, c) ** (p - 1.0) * dt_delta_of_cos(t1, c), t1)
    elif identity == "second-moment":
        val = radial_quadrature(lambda c: _chart_weight(c) * delta_of_cos(t1, c) ** p, t1)
        extra["geodesic_variant"] = radial_quadrature(
            lambda c: np.arccos(np.clip(c, -1, 1)) ** 2 * delta_of_cos(t1, c) ** p, t1)
    elif identity == "second-moment-rate-derivative":
        val = radial_quadrature(
            lambda c: _chart_weight(c) * p * delta_of_cos(t1, c) ** (p - 1.0) * dt_delta_of_cos(t1, c), t1)
        extra["geodesic_variant"] = radial_quadrature(
            lambda c: np.arccos(np.clip(c, -1, 1)) ** 2 * p * delta_of_cos(t1, c) ** (p - 1.0)
            * dt_delta_of_cos(t1, c), t1)
    elif identity == "bubble-norm":
        s = bubble_spectrum(b1, config.GAMMA_MEASURE_L, layout="zonal")
        val = hsigma_inner(s, s)
    elif identity == "rate-tangent-norm":
        val = measure_gamma_2(t1)
    else:
        raise PreconditionError(f"unknown identity {identity!r}")
    return {"value": float(val), **extra}


def exact_value(identity: str, t1: float, t2: float, tau: float, dist: float) -> Optional[float]:
    """Closed forms available at tau = 0 (None when there is none)."""
    if tau != 0.0:
        return None
    P1 = SpherePoint.axis(4)
    P2 = SpherePoint([0.0, 0.0, math.sin(dist), math.cos(dist)])
    if identity in ("cross-square", "cross-subcritical"):
        return pair_integral_closed_form(BubbleParams(P1, t1), BubbleParams(P2, t2))
    if identity == "self-rate-derivative":
        return 0.0
    if identity == "second-moment":
        return 6.0 * np.pi ** 2 / t1 ** 2
    if identity == "second-moment-rate-derivative":
        return -12.0 * np.pi ** 2 / t1 ** 3
    if identity == "bubble-norm":
        return S3_AREA
    if identity == "rate-tangent-norm":
        return GAMMA_2
    return None


@dataclass
class AsymptoticsRecord:
    identity: str
    tau: float
    t1: float
    t2: float
    distance: float
    numeric: float
    prediction: float
    ratio: float
    remainder: float
    extra: Dict[str, float] = field(default_factory=dict)
    status: str = "ok"


@dataclass
class AsymptoticsReport:
    """Per-point records plus a per-identity summary (ratio at the smallest tau, exponent, status)."""

    records: List[AsymptoticsRecord] = field(default_factory=list)
    summary: Dict[str, Dict[str, object]] = field(default_factory=dict)

    def to_rows(self) -> List[Dict[str, object]]:
        rows = []
        for r in self.records:
            rows.append({
                "identity": r.identity, "tau": r.tau, "t1": r.t1, "t2": r.t2, "distance": r.distance,
                "numeric": r.numeric, "prediction": r.prediction, "ratio": r.ratio,
                "remainder": r.remainder, "geodesic_variant": r.extra.get("geodesic_variant", float("nan")),
                "status": r.status,
            })
        return rows

    def to_dict(self) -> Dict[str, object]:
        return {"summary": self.summary, "records": self.to_rows()}

    @property
    def statuses(self) -> Dict[str, str]:
        return {k: str(v["status"]) for k, v in self.summary.items()}


def remainder_exponent(taus: Sequence[float], remainders: Sequence[float]) -> Optional[float]:
    """Slope of log|remainder| against log tau (None with fewer than two usable points)."""
    pts = [(t, abs(r)) for t, r in zip(taus, remainders) if t > 0 and np.isfinite(r) and abs(r) > 0]
    if len(pts) < 2:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def validate_asymptotics(sweeps: Sequence[Tuple[str, Dict[str, object]]]) -> AsymptoticsReport:
    """
    Run identity sweeps.

    Args:
        sweeps: pairs (identity id, {"taus": [...], "distance": d, "t_factor": c});
            rates are t1 = t2 = c * tau^(-1/2)

    Returns:
        AsymptoticsReport; quadrature failures mark the identity inconclusive
    """
    report = AsymptoticsReport()
    for identity, params in sweeps:
        ident = IDENTITIES.get(identity)
        if ident is None:
            raise PreconditionError(f"unknown identity {identity!r}")
        taus = sorted((float(t) for t in params.get("taus", config.DEFAULT_TAUS)), reverse=True)
        dist = float(params.get("distance", np.pi / 2.0))
        factor = float(params.get("t_factor", 1.0))
        G = float(greens_function_of_distance(dist)) if dist > 0 else float("inf")
        recs: List[AsymptoticsRecord] = []
        inconclusive = False
        for tau in taus:
            t = factor / math.sqrt(tau) if tau > 0 else factor
            pred = leading_order(identity, t, t, tau, G)
            try:
                res = identity_value(identity, t, t, tau, dist)
                num = res.pop("value")
                rec = AsymptoticsRecord(identity, tau, t, t, dist, num, pred,
                                        num / pred if pred != 0 else float("nan"), num - pred, res)
            except (ResolutionError, IntegrationError) as e:
                logger.warning("identity %s at tau=%g inconclusive: %s", identity, tau, e)
                inconclusive = True
                rec = AsymptoticsRecord(identity, tau, t, t, dist, float("nan"), pred, float("nan"),
                                        float("nan"), {}, "unresolved")
            recs.append(rec)
        report.records.extend(recs)

        ratios = [r.ratio for r in recs]
        exponent = remainder_exponent([r.tau for r in recs], [r.remainder for r in recs])
        if ident.identity in ("bubble-norm", "rate-tangent-norm"):
            exponent = None  # exact identities: the remainder is rounding noise
        if inconclusive:
            status = "inconclusive"
        else:
            lo, hi = ident.band
            tail = recs[-1].ratio
            ok = all(np.isfinite(r) and r > 0 for r in ratios) and lo <= tail <= hi
            if ident.min_exponent is not None:
                ok = ok and exponent is not None and exponent >= ident.min_exponent
            status = "pass" if ok else "fail"
        report.summary[identity] = {
            "description": ident.description, "ratios": ratios, "ratio_at_smallest_tau": ratios[-1],
            "remainder_exponent": exponent, "required_exponent": ident.min_exponent,
            "band": list(ident.band), "status": status,
        }
        logger.info("identity %s: status=%s ratio=%.6g exponent=%s", identity, status, ratios[-1], exponent)
    return report


def default_sweeps(taus: Sequence[float] = None, distance: float = np.pi / 2.0,
                   identities: Sequence[str] = None) -> List[Tuple[str, Dict[str, object]]]:
    taus = list(config.DEFAULT_TAUS if taus is None else taus)
    ids = list(IDENTITIES) if identities is None else list(identities)
    return [(i, {"taus": taus, "distance": distance, "t_factor": 1.0}) for i in ids]


# ============================================================================
# Spectral identity suite
# ============================================================================

def spectral_identity_suite(L: int = 32, n_samples: int = 20, seed: int = 0,
                            dealias: int = None) -> Dict[str, object]:
    """
    P_sigma 1 = 1; P_sigma delta = delta^2 (relative L^2 error) for random (P, t)
    with t <= L/4; <delta, delta> = 2 pi^2.
    """
    dealias = config.IDENTITY_DEALIAS if dealias is None else dealias
    one = HarmonicSpectrum.constant(1.0, L)
    p_one_err = float(np.max(np.abs(apply_P_sigma(one).coeffs - one.coeffs)))

    rng = np.random.default_rng(seed)
    pts = sample_points(n_samples, seed)
    rates = rng.uniform(1.5, L / config.RESOLUTION_DIVISOR, n_samples)
    grid = grid_for_order(dealias * L)
    eq_errors, norm_errors = [], []
    for x, t in zip(pts, rates):
        b = BubbleParams(SpherePoint.from_vector(x), float(t))
        s = bubble_spectrum(b, L)
        lhs = apply_P_sigma(s)
        sq = eval_bubble(b, grid.nodes) ** 2
        rhs = forward_transform(SphericalField(grid, sq), L)
        eq_errors.append(float(np.linalg.norm(lhs.coeffs - rhs.coeffs) / np.linalg.norm(rhs.coeffs)))
        norm_errors.append(abs(hsigma_inner(s, s) / S3_AREA - 1.0))
    return {
        "L": L, "n_samples": n_samples, "p_sigma_one_error": p_one_err,
        "bubble_equation_max_rel_error": max(eq_errors), "bubble_equation_errors": eq_errors,
        "norm_max_rel_error": max(norm_errors), "rates": [float(t) for t in rates],
    }
