#!/usr/bin/env python3
"""
Finite-dimensional reduction near a bubble configuration.

Reduced gradients of I_tau on sum alpha_i delta_{P_i,t_i} + v, the convex
function F whose critical point predicts the blow-up rates t*_i, and the
decomposition of a computed solution into bubbles plus a remainder that is
orthogonal to the bubble tangent space.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np
from scipy import integrate

from .bubbles import BubbleParams, bubble_spectrum, greens_function, hsigma_inner, hsigma_norm
from .config import config
from .errors import (
    DomainError, FitError, InfeasibleConfigurationError, NumericError, PreconditionError,
)
from .geometry import S2_AREA, S3_AREA, SpherePoint, exp_map, sphere_derivatives, tangent_frame
from .morse import CriticalPointRecord, PointClass, build_matrix_M
from .spectral import HarmonicSpectrum

jax.config.update("jax_enable_x64", True)

logger = logging.getLogger(__name__)

AREA_S2 = S2_AREA
AREA_S3 = S3_AREA

GAMMA_3 = (4.0 / 3.0) * np.pi * AREA_S2
GAMMA_4 = (2.0 / 3.0) * np.pi * AREA_S2
GAMMA_5 = 2.0 * np.pi * AREA_S2


def _gamma6_limit() -> float:
    """integral over R^3 of |y|^2 w^4 with w = 2 / (1 + |y|^2)."""
    val, _ = integrate.quad(lambda r: 4.0 * np.pi * r ** 4 * 16.0 / (1.0 + r * r) ** 4, 0.0, np.inf,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return float(val)


GAMMA6_LIMIT = _gamma6_limit()


def gamma_6(alpha: float) -> float:
    return (2.0 / 3.0) * alpha ** 3 * GAMMA6_LIMIT


# ============================================================================
# Configurations and error budget
# ============================================================================

@dataclass(frozen=True)
class ReducedConfig:
    """k bubbles at points P_i with K data, amplitudes alpha_i and rates t_i at a given tau."""

    points: Tuple[np.ndarray, ...]
    k_values: Tuple[float, ...]
    laplacians: Tuple[float, ...]
    tau: float
    alphas: Tuple[float, ...]
    rates: Tuple[float, ...]
    gradients: Tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        k = len(self.points)
        if not (len(self.k_values) == len(self.laplacians) == len(self.alphas) == len(self.rates) == k):
            raise PreconditionError("ReducedConfig fields must all have length k")
        if not self.gradients:
            object.__setattr__(self, "gradients", tuple(np.zeros(4) for _ in range(k)))
        if not (0.0 < self.tau < 2.0):
            raise DomainError(f"tau must lie in (0, 2), got {self.tau}")

    @property
    def k(self) -> int:
        return len(self.points)

    @classmethod
    def from_points(cls, K, points: Sequence, tau: float, alphas: Sequence[float] = None,
                    rates: Sequence[float] = None) -> "ReducedConfig":
        """Read K, Lap K and grad K at the points; alphas default to 1/K(P_i), rates to tau^(-1/2)."""
        pts = tuple(np.asarray(getattr(p, "location", p), dtype=float) for p in points)
        derivs = [sphere_derivatives(K, p) for p in pts]
        kv = tuple(d.value for d in derivs)
        return cls(
            points=pts, k_values=kv, laplacians=tuple(d.laplacian for d in derivs), tau=tau,
            alphas=tuple(alphas) if alphas is not None else tuple(1.0 / v for v in kv),
            rates=tuple(rates) if rates is not None else tuple(tau ** -0.5 for _ in pts),
            gradients=tuple(d.gradient for d in derivs),
        )

    @property
    def betas(self) -> np.ndarray:
        return np.array(self.alphas) - 1.0 / np.array(self.k_values)

    def check(self, A: float = None, eps0: float = None) -> List[str]:
        """Violations of A^-1 tau^-1/2 < t_i < A tau^-1/2 and |alpha_i - 1/K(P_i)| < eps0."""
        A = config.STAU_A if A is None else A
        eps0 = config.ALPHA_EPS0 if eps0 is None else eps0
        scale = self.tau ** -0.5
        problems = []
        for i, (t, b) in enumerate(zip(self.rates, self.betas)):
            if not (scale / A < t < A * scale):
                problems.append(f"t_{i} = {t:.6g} outside ({scale / A:.6g}, {A * scale:.6g})")
            if abs(b) >= eps0:
                problems.append(f"|alpha_{i} - 1/K| = {abs(b):.3g} >= {eps0}")
        return problems

    def bubbles(self) -> List[BubbleParams]:
        return [BubbleParams(SpherePoint.from_vector(p), t, a)
                for p, t, a in zip(self.points, self.rates, self.alphas)]


@dataclass(frozen=True)
class ErrorBudget:
    """Remainder orders of the reduced gradient components and their magnitudes at (tau, ||v||, beta)."""

    orders: Dict[str, Tuple[str, ...]]
    magnitudes: Dict[str, float]

    @classmethod
    def evaluate(cls, tau: float, v_norm: float, beta: float) -> "ErrorBudget":
        lg = abs(np.log(tau))
        p = 2.0 - tau
        terms = {
            "alpha": {"|beta|^2": beta ** 2, "tau|log tau|": tau * lg, "||v||^(2-tau)": v_norm ** p},
            "t": {"|beta| tau^(3/2)": beta * tau ** 1.5, "tau ||v||": tau * v_norm,
                  "tau^(1/2) ||v||^(2-tau)": tau ** 0.5 * v_norm ** p, "tau^(3/2)|log tau|": tau ** 1.5 * lg},
            "P": {"tau^(1/2)": tau ** 0.5, "||v||": v_norm, "tau^(-1/2) ||v||^(2-tau)": tau ** -0.5 * v_norm ** p},
        }
        return cls(orders={k: tuple(v) for k, v in terms.items()},
                   magnitudes={k: float(sum(v.values())) for k, v in terms.items()})


@dataclass(frozen=True)
class ReducedGradient:
    d_alpha: np.ndarray
    d_t: np.ndarray
    d_P: np.ndarray            # k x 4 ambient tangent vectors
    error_budget: ErrorBudget


def reduced_gradient(cfg: ReducedConfig, remainder_norm: float = 0.0) -> ReducedGradient:
    """
    Leading terms of the gradient of I_tau in (alpha, t, P):

        dI/dalpha_i = -|S^3| beta_i
        dI/dt_i     = G3 tau/(K_i^2 t_i) + G4 Lap K_i/(K_i^3 t_i^3) + sum_j G5 G_ij/(K_i K_j t_i^2 t_j)
        dI/dP_i     = -G6 grad K(P_i)

    Raises:
        PreconditionError: the configuration lies outside the range checked by ReducedConfig.check
    """
    problems = cfg.check()
    if problems:
        raise PreconditionError("reduced gradient expansion does not apply: " + "; ".join(problems))
    K = np.array(cfg.k_values)
    lap = np.array(cfg.laplacians)
    t = np.array(cfg.rates)
    betas = cfg.betas
    d_alpha = -AREA_S3 * betas
    d_t = GAMMA_3 * cfg.tau / (K ** 2 * t) + GAMMA_4 * lap / (K ** 3 * t ** 3)
    for i in range(cfg.k):
        for j in range(cfg.k):
            if j != i:
                G = greens_function(cfg.points[i], cfg.points[j])
                d_t[i] += GAMMA_5 * G / (K[i] * K[j] * t[i] ** 2 * t[j])
    d_P = np.array([-gamma_6(a) * np.asarray(g) for a, g in zip(cfg.alphas, cfg.gradients)]).reshape(cfg.k, 4)
    budget = ErrorBudget.evaluate(cfg.tau, remainder_norm, float(np.max(np.abs(betas), initial=0.0)))
    return ReducedGradient(d_alpha, d_t, d_P, budget)


# ============================================================================
# The convex function F and blow-up predictions
# ============================================================================

def _F_of_u(u, tau, kvals, M):
    s = jnp.exp(u)
    Q = M + jnp.diag(jnp.diag(M))
    return -jnp.sum(4.0 * tau / kvals ** 2 * u) + 0.5 * s @ Q @ s


_F = jax.jit(_F_of_u)
_F_grad = jax.jit(jax.grad(_F_of_u))
_F_hess = jax.jit(jax.hessian(_F_of_u))


def reduced_energy_F(s: Sequence[float], tau: float, kvals: Sequence[float], M: np.ndarray) -> float:
    """F(s) = -sum_j (4 tau / K_j^2) log s_j + 1/2 sum_i (M_ii s_i^2 + sum_j M_ij s_i s_j)."""
    u = jnp.log(jnp.asarray(s, dtype=jnp.float64))
    return float(_F(u, float(tau), jnp.asarray(kvals, dtype=jnp.float64), jnp.asarray(M, dtype=jnp.float64)))


def _newton_F(u0: np.ndarray, tau: float, kvals, M, max_iter: int) -> Tuple[np.ndarray, List[float]]:
    args = (float(tau), kvals, M)
    scale = float(np.sum(4.0 * tau / np.asarray(kvals) ** 2))
    u = jnp.asarray(u0)
    trace: List[float] = []
    for _ in range(max_iter):
        g = np.asarray(_F_grad(u, *args))
        gn = float(np.linalg.norm(g))
        trace.append(gn)
        if gn <= 1e-13 * scale:
            return np.asarray(u), trace
        H = np.asarray(_F_hess(u, *args))
        lam_min = np.linalg.eigvalsh(H)[0]
        if lam_min <= 1e-12 * scale:
            H = H + (abs(lam_min) + 1e-8 * scale) * np.eye(len(g))
        p = -np.linalg.solve(H, g)
        f0 = float(_F(u, *args))
        slope = float(g @ p)
        step = 1.0
        while step > 1e-12:
            u_new = u + step * p
            if float(_F(u_new, *args)) <= f0 + config.ARMIJO_C * step * slope:
                break
            step *= 0.5
        u = u_new
    raise NumericError(f"Newton on F did not converge in {max_iter} iterations", trace)


@dataclass
class BlowupPrediction:
    """Critical rates t*, predicted limits of tau m^2 and the normalisations used."""

    tau: float
    t_star: np.ndarray
    s_star: np.ndarray
    mu_pred: np.ndarray
    lambdas: np.ndarray
    c_mu: float
    k_values: np.ndarray
    hessian_eigs: np.ndarray
    restart_spread: float
    F_value: float
    reduced_constant: np.ndarray = field(default_factory=lambda: np.zeros(0))
    point_constant: np.ndarray = field(default_factory=lambda: np.zeros(0))
    points: List[List[float]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.t_star)

    def to_dict(self) -> Dict[str, object]:
        return {
            "tau": self.tau, "k": self.k, "points": self.points,
            "t_star": self.t_star.tolist(), "s_star": self.s_star.tolist(),
            "mu_pred": self.mu_pred.tolist(), "lambda": self.lambdas.tolist(), "c_mu": self.c_mu,
            "k_values": self.k_values.tolist(), "hessian_eigs": self.hessian_eigs.tolist(),
            "restart_spread": self.restart_spread, "F_value": self.F_value,
            "reduced_constant": self.reduced_constant.tolist(),
            "point_constant": self.point_constant.tolist(),
        }

    def bubbles(self) -> List[BubbleParams]:
        """alpha_i = 1/K(q_i) bubbles at the critical rates (rates below 1 are clamped to 1)."""
        return [BubbleParams(SpherePoint.from_vector(p), max(float(t), 1.0), 1.0 / float(k))
                for p, t, k in zip(self.points, self.t_star, self.k_values)]


def reduced_model_height_constant(k_values: Sequence[float], laplacians: Sequence[float]) -> np.ndarray:
    """-Lap K / (2 K^3): the limit of tau m^2 implied by the reduced gradient with peak ~ t/K."""
    k = np.asarray(k_values, dtype=float)
    return -np.asarray(laplacians, dtype=float) / (2.0 * k ** 3)


def single_point_constant(k_values: Sequence[float], laplacians: Sequence[float]) -> np.ndarray:
    """-4 Lap K / K^3, the k = 1 limit of tau m^2."""
    k = np.asarray(k_values, dtype=float)
    return -4.0 * np.asarray(laplacians, dtype=float) / k ** 3


def solve_F_critical(points: Sequence[CriticalPointRecord], K=None, tau: float = 0.01, c_mu: float = 0.25,
                     restarts: int = None, seed: int = 0) -> BlowupPrediction:
    """
    Unique minimiser of F over s > 0, Newton in u = log s from seeded restarts.

    Args:
        points: critical points in K^- (records, or raw vectors when K is given)
        K: needed only when raw vectors are passed
        tau: subcritical parameter
        c_mu: constant multiplying lambda_j mu^(j) in the stationarity relation (1 or 1/4)
        restarts: number of random starts (default Config.F_RESTARTS)

    Raises:
        InfeasibleConfigurationError: mu(M) <= 0 or a point outside K^-
        NumericError: Newton did not converge
    """
    from .morse import make_record
    restarts = config.F_RESTARTS if restarts is None else restarts
    recs = []
    for p in points:
        if isinstance(p, CriticalPointRecord):
            recs.append(p)
        elif K is None:
            raise PreconditionError("raw points need K")
        else:
            recs.append(make_record(K, np.asarray(p, dtype=float), tol_hess=0.0))
    if any(r.point_class is not PointClass.K_MINUS for r in recs):
        raise InfeasibleConfigurationError("F-critical configurations must lie in K^-")
    Mm = build_matrix_M(recs)
    if Mm.mu_min <= 0.0:
        raise InfeasibleConfigurationError(f"mu(M) = {Mm.mu_min:.6g} <= 0: no interior minimum of F")

    kvals = np.array([r.k_value for r in recs])
    laps = np.array([r.laplacian for r in recs])
    kj, Mj = jnp.asarray(kvals), jnp.asarray(Mm.entries)
    rng = np.random.default_rng(seed)
    sols = []
    for _ in range(restarts):
        u0 = 0.5 * np.log(tau) + rng.standard_normal(len(recs))
        u, _ = _newton_F(u0, tau, kj, Mj, config.F_MAX_ITER)
        sols.append(np.exp(u))
    sols = np.array(sols)
    s_star = sols[0]
    spread = float(np.max(np.abs(sols - s_star)) / np.max(np.abs(s_star)))
    if spread > 1e-8:
        logger.warning("F restarts disagree: relative spread %.3e", spread)

    u_star = jnp.log(jnp.asarray(s_star))
    H = np.asarray(_F_hess(u_star, float(tau), kj, Mj))
    heig = np.linalg.eigvalsh(H)
    if heig[0] <= 0.0:
        raise NumericError("F Hessian is not positive definite at the minimiser", [float(e) for e in heig])

    t_star = 1.0 / s_star
    lambdas = t_star[0] / (kvals[0] * t_star)
    if len(recs) == 1:
        mu_pred = single_point_constant(kvals, laps)
    else:
        # stationarity reads (M^T lambda)_j = c_mu lambda_j mu_j, so c_mu divides here
        # (c_mu = 1/4 differs by 16 from reading the relation as mu_j = c_mu (M^T lambda)_j / lambda_j)
        mu_pred = (Mm.entries.T @ lambdas) / (c_mu * lambdas)

    logger.info("F critical point: t* = %s (tau=%g, spread %.1e)", np.array2string(t_star, precision=6), tau, spread)
    return BlowupPrediction(
        tau=float(tau), t_star=t_star, s_star=s_star, mu_pred=np.asarray(mu_pred, dtype=float), lambdas=lambdas,
        c_mu=float(c_mu), k_values=kvals, hessian_eigs=heig, restart_spread=spread,
        F_value=reduced_energy_F(s_star, tau, kvals, Mm.entries),
        reduced_constant=reduced_model_height_constant(kvals, laps),
        point_constant=single_point_constant(kvals, laps),
        points=[[float(v) for v in r.location] for r in recs],
    )


# ============================================================================
# Decomposition of a computed solution
# ============================================================================

@dataclass
class DecompositionResult:
    fit: List[BubbleParams]
    remainder: HarmonicSpectrum
    remainder_norm: float
    converged: bool
    iterations: int
    orthogonality: float
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "fit": [{"P": b.P.tolist(), "t": b.t, "alpha": b.alpha} for b in self.fit],
            "remainder_norm": self.remainder_norm, "converged": self.converged,
            "iterations": self.iterations, "orthogonality": self.orthogonality,
        }


def _tangent_columns(b: BubbleParams, L: int, layout: str) -> List[HarmonicSpectrum]:
    cols = [bubble_spectrum(BubbleParams(b.P, b.t), L, layout=layout),
            b.t * bubble_spectrum(b, L, "d_t", layout=layout)]
    if layout == "full":
        E = tangent_frame(b.P)
        cols += [bubble_spectrum(b, L, "d_P", E[:, a], layout="full") for a in range(3)]
    return cols


def decompose_solution(v: HarmonicSpectrum, k: int, init: Sequence[BubbleParams],
                       max_iter: int = None, tol: float = 1e-12) -> DecompositionResult:
    """
    Gauss-Newton fit of sum alpha_i delta_{P_i,t_i} to v in the <.,.> metric.

    Parameters are (alpha_i, log t_i, P_i); P moves by exp_map in a tangent
    frame. In the zonal layout the bubbles stay on the symmetry axis.

    Raises:
        FitError: the tangent Gram matrix is rank deficient
    """
    max_iter = config.DECOMPOSE_MAX_ITER if max_iter is None else max_iter
    bubbles = list(init)
    if len(bubbles) != k:
        raise PreconditionError(f"expected {k} initial bubbles, got {len(bubbles)}")
    L, layout = v.L, v.layout
    per = 5 if layout == "full" else 2
    history: List[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        model = sum((bubble_spectrum(b, L, layout=layout) for b in bubbles[1:]),
                    bubble_spectrum(bubbles[0], L, layout=layout))
        r = v - model
        cols: List[HarmonicSpectrum] = []
        for b in bubbles:
            cols += _tangent_columns(b, L, layout)
        G = np.array([[hsigma_inner(a, c) for c in cols] for a in cols])
        rhs = np.array([hsigma_inner(a, r) for a in cols])
        eig = np.linalg.eigvalsh(G)
        if eig[0] <= 0.0 or eig[-1] / eig[0] > config.GRAM_MAX_CONDITION:
            raise FitError(f"tangent Gram matrix is rank deficient (eigenvalues {eig[0]:.3e} .. {eig[-1]:.3e})")
        delta = np.linalg.solve(G, rhs)
        history.append(hsigma_norm(r))

        new = []
        for i, b in enumerate(bubbles):
            d = delta[per * i: per * (i + 1)]
            t = max(1.0, b.t * float(np.exp(d[1])))
            alpha = b.alpha + d[0]
            if alpha <= 0.0:
                alpha = 0.5 * b.alpha
            P = b.P
            if layout == "full":
                E = tangent_frame(b.P)
                P = exp_map(b.P, E @ d[2:])
            new.append(BubbleParams(P, t, alpha))
        bubbles = new
        scaled = delta.copy()
        scaled[::per] /= np.array([b.alpha for b in bubbles])
        step = float(np.max(np.abs(scaled)))
        if step <= tol:
            converged = True
            break

    model = sum((bubble_spectrum(b, L, layout=layout) for b in bubbles[1:]),
                bubble_spectrum(bubbles[0], L, layout=layout))
    r = v - model
    cols = []
    for b in bubbles:
        cols += _tangent_columns(b, L, layout)
    rn = hsigma_norm(r)
    ortho = max((abs(hsigma_inner(c, r)) / (hsigma_norm(c) * max(rn, 1e-300)) for c in cols), default=0.0)
    if not converged:
        logger.warning("bubble decomposition stopped after %d iterations (remainder %.3e)", it, rn)
    return DecompositionResult(bubbles, r, rn, converged, it, float(ortho) if rn > 0 else 0.0, history)


def axis_bubble(b: BubbleParams) -> BubbleParams:
    """Snap a bubble onto the nearer pole of the e4 axis (zonal fits)."""
    pole = SpherePoint.axis(4)
    return BubbleParams(pole if b.P.x[3] >= 0.0 else -pole, b.t, b.alpha)
