#!/usr/bin/env python3
"""
Pohozaev boundary fluxes on small half balls of the extension space.

Profiles are U(X) = a |X|^{-2} + M + alpha(X) on the upper half space
X = (x1, x2, x3, t), t > 0, at n = 3 and sigma = 1/2. The curved boundary term
is integrated over the upper hemisphere |X| = delta and the flat one over the
disc t = 0, |x| < delta.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .config import config
from .errors import DomainError, IntegrationError, PreconditionError
from .geometry import S2_AREA
from .polynomial import AmbientPolynomial
from ..utils.quadrature import gauss_jacobi_radial, gauss_legendre

logger = logging.getLogger(__name__)

N_DIM = 3
SIGMA = 0.5
HALF_GAP = 0.5 * (N_DIM - 2.0 * SIGMA)   # (n - 2 sigma) / 2


def extension_weight(t, sigma: float = SIGMA):
    """Weight t^{1 - 2 sigma} of the extension problem (identically 1 at sigma = 1/2)."""
    return np.power(np.asarray(t, dtype=float), 1.0 - 2.0 * sigma)


@dataclass(frozen=True)
class HalfBallProfile:
    """U(X) = a |X|^{-2} + M + alpha(X) with alpha(0) = 0 and a >= 0."""

    a: float = 1.0
    M: float = 0.0
    alpha: AmbientPolynomial = field(default_factory=lambda: AmbientPolynomial(()))

    def __post_init__(self):
        if self.a < 0.0:
            raise DomainError(f"singular weight a must be >= 0, got {self.a}")
        if abs(self.alpha(np.zeros(4))) > 1e-14:
            raise DomainError(f"alpha must vanish at the origin, alpha(0) = {self.alpha(np.zeros(4))}")

    @property
    def alpha_id(self) -> str:
        return self.alpha.expression if self.alpha.terms else "0"

    def singular(self, X: np.ndarray) -> np.ndarray:
        return self.a / np.sum(X * X, axis=-1)

    def regular(self, X: np.ndarray) -> np.ndarray:
        return self.M + self.alpha(X)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.singular(X) + self.regular(X)

    def gradient(self, X: np.ndarray) -> np.ndarray:
        r2 = np.sum(X * X, axis=-1, keepdims=True)
        return -2.0 * self.a * X / r2 ** 2 + self.alpha.gradient(X)


# ============================================================================
# Quadrature nodes
# ============================================================================

def _hemisphere_nodes(order: int, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Points of the upper hemisphere |X| = delta and their surface weights."""
    psi, wpsi = gauss_legendre(order, 0.0, 0.5 * math.pi)
    ct, wct = gauss_legendre(order)
    phi = np.arange(2 * order) * (math.pi / order)
    P, C, F = np.meshgrid(psi, ct, phi, indexing="ij")
    S = np.sqrt(1.0 - C ** 2)
    X = delta * np.stack([np.sin(P) * S * np.cos(F), np.sin(P) * S * np.sin(F),
                          np.sin(P) * C, np.cos(P)], axis=-1)
    w = (delta ** 3) * (wpsi[:, None, None] * np.sin(psi)[:, None, None] ** 2) * wct[None, :, None] \
        * (math.pi / order)
    return X.reshape(-1, 4), np.broadcast_to(w, P.shape).reshape(-1)


def _disc_nodes(order: int, delta: float, beta: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points of the flat disc t = 0, |x| < delta with weights r^beta r^0 dr dOmega."""
    r, wr = gauss_jacobi_radial(order, beta, delta)
    ct, wct = gauss_legendre(order)
    phi = np.arange(2 * order) * (math.pi / order)
    R, C, F = np.meshgrid(r, ct, phi, indexing="ij")
    S = np.sqrt(1.0 - C ** 2)
    X = np.stack([R * S * np.cos(F), R * S * np.sin(F), R * C, np.zeros_like(R)], axis=-1)
    w = wr[:, None, None] * wct[None, :, None] * (math.pi / order)
    return X.reshape(-1, 4), np.broadcast_to(w, R.shape).reshape(-1), R.reshape(-1)


def _converge(rule: Callable[[int], Tuple[float, float]], what: str) -> float:
    """Double the order until two consecutive values agree to POHOZAEV_RTOL."""
    order = config.POHOZAEV_START_ORDER
    prev, _ = rule(order)
    while order < config.POHOZAEV_MAX_ORDER:
        order *= 2
        val, scale = rule(order)
        if abs(val - prev) <= config.POHOZAEV_RTOL * max(abs(val), 1e-12 * scale):
            logger.debug("%s converged at order %d: %.12g", what, order, val)
            return val
        prev = val
    raise IntegrationError(f"{what} did not converge by order {config.POHOZAEV_MAX_ORDER}: "
                           f"last values {prev:.12g}")


# ============================================================================
# Fluxes
# ============================================================================

def _curved_integrand(U: HalfBallProfile, X: np.ndarray, delta: float) -> np.ndarray:
    # On |X| = delta the singular part alone contributes
    #   S dS/dnu - (delta/2)|grad S|^2 + delta (dS/dnu)^2 = 0,
    # so only its cross terms with the regular part are kept.
    nu = X / delta
    S = U.singular(X)
    dS = -2.0 * U.a / delta ** 3
    R = U.regular(X)
    gR = U.alpha.gradient(X)
    dR = np.sum(gR * nu, axis=-1)
    cross = HALF_GAP * (S * dR + R * dS) + delta * dS * dR
    regular = HALF_GAP * R * dR + delta * dR ** 2 - 0.5 * delta * np.sum(gR * gR, axis=-1)
    return extension_weight(X[:, 3]) * (cross + regular)


def curved_flux(U: HalfBallProfile, delta: float) -> float:
    """Integral of B'' over the upper hemisphere of radius delta."""
    def rule(order):
        X, w = _hemisphere_nodes(order, delta)
        f = _curved_integrand(U, X, delta)
        return float(w @ f), float(w @ np.abs(f)) + abs(U.M) * math.pi ** 2
    return _converge(rule, f"B'' at delta={delta:g}")


def flat_flux(U: HalfBallProfile, delta: float, K: float, p: float) -> float:
    """
    Integral of B' = ((n - 2 sigma)/2) K U^{p+1} + <X, grad U> K U^p over the
    flat disc of radius delta.

    With a > 0 the integrand behaves like r^{-2p} r^0 near the origin after the
    volume factor, so the radial rule carries the weight r^{-2p}. It is not
    integrable for p >= 1/2, in which case nan is returned.
    """
    if U.a > 0.0 and p >= 0.5:
        logger.warning("B' not integrable at the origin for a > 0 and p = %g >= 1/2", p)
        return float("nan")
    beta = -2.0 * p if U.a > 0.0 else 0.0

    def rule(order):
        X, w, r = _disc_nodes(order, delta, beta)
        reg = U.regular(X)
        r_dr_alpha = np.sum(X * U.alpha.gradient(X), axis=-1)
        if U.a > 0.0:
            W = U.a + r ** 2 * reg          # r^2 U
            if np.any(W <= 0.0):
                raise DomainError("profile is not positive on the disc")
            f = HALF_GAP * K * W ** (p + 1.0) + K * (-2.0 * U.a + r ** 2 * r_dr_alpha) * W ** p
        else:
            if np.any(reg <= 0.0):
                raise DomainError("profile is not positive on the disc")
            f = r ** 2 * (HALF_GAP * K * reg ** (p + 1.0) + K * r_dr_alpha * reg ** p)
        f = extension_weight(X[:, 3]) * f
        return float(w @ f), float(w @ np.abs(f))
    return _converge(rule, f"B' at delta={delta:g}")


def hemisphere_flux(U: HalfBallProfile, delta: float, K: float = 1.0, p: float = 0.0) -> Tuple[float, float]:
    """
    Boundary fluxes of a half-ball profile.

    Args:
        U: the profile
        delta: radius, 0 < delta < 1
        K: constant coefficient in B'
        p: exponent in B'

    Returns:
        (Bpp, Bp): curved hemisphere flux and flat disc flux
    """
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return curved_flux(U, delta), flat_flux(U, delta, K, p)


def flux_closed_form(M: float, a: float = 1.0) -> float:
    """-((n - 2 sigma)^2 / 4) a M |S^2| B(n/2, 1 - sigma) = -2 pi^2 a M."""
    beta = math.gamma(N_DIM / 2) * math.gamma(1.0 - SIGMA) / math.gamma(N_DIM / 2 + 1.0 - SIGMA)
    return -((N_DIM - 2.0 * SIGMA) ** 2 / 4.0) * a * M * S2_AREA * beta


# ============================================================================
# delta sweeps
# ============================================================================

@dataclass
class FluxReport:
    M: float
    alpha_id: str
    rows: List[Dict[str, object]]
    limit: float
    closed_form: float
    rel_error: float

    def to_dict(self) -> Dict[str, object]:
        return {"M": self.M, "alpha": self.alpha_id, "rows": self.rows, "limit": self.limit,
                "closed_form": self.closed_form, "rel_error": self.rel_error}


def _relative(value: float, ref: float) -> float:
    return abs(value - ref) / abs(ref) if ref != 0.0 else abs(value - ref)


def flux_limit_check(M: float, alpha: AmbientPolynomial = None, deltas: Sequence[float] = None,
                a: float = 1.0) -> FluxReport:
    """
    Extrapolate B''(delta) to delta = 0 and compare with the closed-form limit.

    The extrapolation is a polynomial fit in delta of degree len(deltas) - 1
    (at most 2) evaluated at 0.
    """
    deltas = list(config.DEFAULT_POHOZAEV_DELTAS if deltas is None else deltas)
    if any(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:])):
        raise PreconditionError(f"deltas must be strictly decreasing, got {deltas}")
    U = HalfBallProfile(a, M, alpha if alpha is not None else AmbientPolynomial(()))
    exact = flux_closed_form(M, a)
    values = [curved_flux(U, d) for d in deltas]
    rows = [{"M": M, "alpha": U.alpha_id, "delta": d, "Bpp": v, "closed_form": exact,
             "rel_error": _relative(v, exact)} for d, v in zip(deltas, values)]
    deg = min(len(deltas) - 1, 2)
    limit = float(np.polyval(np.polyfit(deltas, values, deg), 0.0)) if deg > 0 else values[0]
    rows.append({"M": M, "alpha": U.alpha_id, "delta": 0.0, "Bpp": limit, "closed_form": exact,
                 "rel_error": _relative(limit, exact)})
    logger.info("B'' limit for M=%g alpha=%s: %.10g (closed form %.10g)", M, U.alpha_id, limit, exact)
    return FluxReport(M, U.alpha_id, rows, limit, exact, _relative(limit, exact))


def linearity_check(Ms: Sequence[float] = (0.0, 1.0, -3.0), alpha: AmbientPolynomial = None,
                    deltas: Sequence[float] = None, tol: float = 1e-3) -> Dict[str, object]:
    """Straight-line fit of the extrapolated limits against M."""
    reports = [flux_limit_check(M, alpha, deltas) for M in Ms]
    limits = np.array([r.limit for r in reports])
    slope, intercept = np.polyfit(np.asarray(Ms, dtype=float), limits, 1)
    fitted = slope * np.asarray(Ms) + intercept
    residual = float(np.max(np.abs(limits - fitted)) / max(np.max(np.abs(limits)), 1e-300))
    return {"Ms": list(Ms), "limits": limits.tolist(), "slope": float(slope), "intercept": float(intercept),
            "residual": residual, "linear": residual <= tol, "reports": reports}
