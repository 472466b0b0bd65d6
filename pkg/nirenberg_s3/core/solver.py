#!/usr/bin/env python3
"""
Newton solver for P_sigma v = K |v|^(1-tau) v on S^3 and blow-up diagnostics.

Unknowns are harmonic coefficients up to degree L. The nonlinearity is
evaluated on an oversampled node set and projected back by quadrature, so the
residual and its Jacobian are

    R(c) = m * c - A(K |u|^(1-tau) u),       u = S c
    J(c) = diag(m) - A diag((2 - tau) K |u|^(1-tau)) S

with m the P_sigma multipliers (l + 1), S synthesis and A analysis.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.fft import dst
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.spatial import cKDTree

from .config import config
from .errors import BifurcationSuspectError, DomainError, PositivityError, PreconditionError
from .geometry import SpherePoint, build_grid, geodesic_distance, tangent_frame
from .polynomial import AmbientPolynomial
from .spectral import (
    SQRT_AREA, HarmonicSpectrum, dealiased_grid, evaluate_spectrum, get_transform,
    p_sigma_multiplier,
)

logger = logging.getLogger(__name__)


# ============================================================================
# Discretisations
# ============================================================================

class FullDiscretization:
    """Separable transforms on a product grid of order >= dealias * L."""

    layout = "full"

    def __init__(self, K: AmbientPolynomial, L: int, dealias: int = None):
        self.K = K
        self.L = L
        self.grid = dealiased_grid(L, dealias)
        self.transform = get_transform(L, self.grid)
        self.nodes = self.grid.nodes
        self.weights = self.grid.weights
        self.k_nodes = np.asarray(K.evaluate(self.nodes), dtype=float)
        self.multipliers = p_sigma_multiplier(HarmonicSpectrum.zeros(L).degrees()).astype(float)

    @property
    def n(self) -> int:
        return self.multipliers.size

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.transform.synthesis(coeffs)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        return self.transform.analysis(values)

    def galerkin_matrix(self, g: np.ndarray, batch: int = 64) -> np.ndarray:
        """A diag(g) S as a dense matrix, assembled in column batches."""
        out = np.empty((self.n, self.n))
        for start in range(0, self.n, batch):
            stop = min(start + batch, self.n)
            E = np.zeros((self.n, stop - start))
            E[np.arange(start, stop), np.arange(stop - start)] = 1.0
            out[:, start:stop] = self.analyze(g[:, None] * self.synthesize(E))
        return out


class ZonalDiscretization:
    """
    Functions of chi = d(x, e4) only, one coefficient per degree.

    Nodes chi_j = j pi / (n + 1), j = 1..n; analysis and synthesis are DST-I
    transforms of f(chi) sin(chi).
    """

    layout = "zonal"

    def __init__(self, K: AmbientPolynomial, L: int, dealias: int = None):
        dealias = config.DEALIAS_FACTOR if dealias is None else dealias
        if not K.is_zonal():
            raise PreconditionError(f"K = {K.expression} is not invariant under rotations about e4")
        self.K = K
        self.L = L
        self.n_nodes = max(L + 1, int(math.ceil((dealias * L + 1) / 2.0)))
        j = np.arange(1, self.n_nodes + 1)
        self.chi = j * np.pi / (self.n_nodes + 1)
        self.sin_chi = np.sin(self.chi)
        self.nodes = np.stack([np.zeros_like(self.chi), np.zeros_like(self.chi),
                               self.sin_chi, np.cos(self.chi)], axis=1)
        self.weights = 4.0 * np.pi * (np.pi / (self.n_nodes + 1)) * self.sin_chi ** 2
        self.k_nodes = np.asarray(K.evaluate(self.nodes), dtype=float)
        self.multipliers = p_sigma_multiplier(np.arange(L + 1)).astype(float)

    @property
    def n(self) -> int:
        return self.L + 1

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        padded = np.zeros(self.n_nodes)
        padded[:self.L + 1] = coeffs
        return dst(padded, type=1) / (2.0 * self.sin_chi * SQRT_AREA)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        full = dst(np.asarray(values) * self.sin_chi, type=1)
        return (2.0 * np.pi ** 2 / ((self.n_nodes + 1) * SQRT_AREA)) * full[:self.L + 1]

    @property
    def synthesis_matrix(self) -> np.ndarray:
        l = np.arange(self.L + 1)
        return np.sin(np.outer(self.chi, l + 1)) / (self.sin_chi[:, None] * SQRT_AREA)

    def galerkin_matrix(self, g: np.ndarray, batch: int = 0) -> np.ndarray:
        S = self.synthesis_matrix
        return S.T @ ((self.weights * g)[:, None] * S)


@lru_cache(maxsize=8)
def make_discretization(K: AmbientPolynomial, L: int, layout: str = "full", dealias: int = None):
    if layout == "zonal":
        return ZonalDiscretization(K, L, dealias)
    if layout == "full":
        return FullDiscretization(K, L, dealias)
    raise PreconditionError(f"unknown layout {layout!r}")


# ============================================================================
# Options and state
# ============================================================================

@dataclass(frozen=True)
class SolverOptions:
    rtol: float = config.NEWTON_RTOL
    max_iter: int = config.NEWTON_MAX_ITER
    armijo_c: float = config.ARMIJO_C
    min_step: float = config.MIN_LINE_STEP
    dense_max_modes: int = config.DENSE_MAX_MODES
    dense_max_zonal: int = config.DENSE_MAX_ZONAL
    gmres_rtol: float = config.GMRES_RTOL
    dealias: int = config.DEALIAS_FACTOR
    singular_pivot_tol: float = config.SINGULAR_PIVOT_TOL
    check_positivity: bool = True


@dataclass(frozen=True)
class SolverState:
    """Immutable snapshot of a Newton solve."""

    tau: float
    v: HarmonicSpectrum
    residual_norm: float
    newton_iters: int
    positive: bool
    L: int
    converged: bool = True
    min_value: float = float("nan")
    scale: float = float("nan")
    history: Tuple[float, ...] = ()
    gmres_failures: int = 0

    @property
    def layout(self) -> str:
        return self.v.layout

    def to_dict(self) -> Dict[str, object]:
        return {
            "tau": self.tau, "L": self.L, "layout": self.layout, "residual_norm": self.residual_norm,
            "relative_residual": self.residual_norm / self.scale if self.scale else float("nan"),
            "newton_iters": self.newton_iters, "positive": self.positive, "converged": self.converged,
            "min_value": self.min_value, "history": list(self.history),
            "gmres_failures": self.gmres_failures,
        }


def _check_tau(tau: float):
    if not (0.0 < tau < 2.0):
        raise DomainError(f"tau must lie in (0, 2), got {tau}")


def _nonlinearity(u: np.ndarray, k_nodes: np.ndarray, tau: float) -> np.ndarray:
    return k_nodes * np.abs(u) ** (1.0 - tau) * u


def residual(v: HarmonicSpectrum, tau: float, K: AmbientPolynomial, dealias: int = None) -> HarmonicSpectrum:
    """Spectrum of P_sigma v - K |v|^(1-tau) v, nonlinearity on a dealiased grid."""
    disc = make_discretization(K, v.L, v.layout, dealias)
    u = disc.synthesize(v.coeffs)
    return v.with_coeffs(disc.multipliers * v.coeffs - disc.analyze(_nonlinearity(u, disc.k_nodes, tau)))


def _jacobian_apply(disc, g: np.ndarray, x: np.ndarray) -> np.ndarray:
    return disc.multipliers * x - disc.analyze(g * disc.synthesize(x))


def _linear_solve(disc, g: np.ndarray, rhs: np.ndarray, opts: SolverOptions) -> Tuple[np.ndarray, bool]:
    """Newton correction and whether the linear solve reached its tolerance."""
    dense_limit = opts.dense_max_zonal if disc.layout == "zonal" else opts.dense_max_modes
    if disc.n <= dense_limit:
        J = np.diag(disc.multipliers) - disc.galerkin_matrix(g)
        lu, piv = lu_factor(J, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.min() <= opts.singular_pivot_tol * pivots.max():
            raise BifurcationSuspectError(
                f"Jacobian is singular within tolerance (pivot ratio {pivots.min() / pivots.max():.2e})")
        return lu_solve((lu, piv), rhs, check_finite=False), True

    A = LinearOperator((disc.n, disc.n), matvec=lambda x: _jacobian_apply(disc, g, x), dtype=float)
    Minv = LinearOperator((disc.n, disc.n), matvec=lambda x: x / disc.multipliers, dtype=float)
    x, info = gmres(A, rhs, rtol=opts.gmres_rtol, atol=0.0, restart=100, maxiter=50, M=Minv)
    if info != 0:
        logger.warning("GMRES stopped with info=%d", info)
    return x, info == 0


def _min_on_nodes(disc, coeffs: np.ndarray) -> float:
    return float(np.min(disc.synthesize(coeffs)))


def newton_solve(v0: HarmonicSpectrum, tau: float, K: AmbientPolynomial,
                 opts: Optional[SolverOptions] = None) -> SolverState:
    """
    Damped Newton with an Armijo line search on 1/2 ||R||^2.

    Returns the converged state, or the best iterate with converged=False.

    Raises:
        BifurcationSuspectError: singular Jacobian
        PositivityError: the converged solution is not positive
    """
    opts = SolverOptions() if opts is None else opts
    _check_tau(tau)
    disc = make_discretization(K, v0.L, v0.layout, opts.dealias)
    c = np.array(v0.coeffs, dtype=float)
    history: List[float] = []
    gmres_failures = 0

    def _eval(cc):
        u = disc.synthesize(cc)
        N = disc.analyze(_nonlinearity(u, disc.k_nodes, tau))
        return u, disc.multipliers * cc - N, float(np.linalg.norm(N))

    u, R, scale = _eval(c)
    rn = float(np.linalg.norm(R))
    converged = False
    it = 0
    for it in range(opts.max_iter + 1):
        history.append(rn)
        if rn <= opts.rtol * scale:
            converged = True
            break
        if it == opts.max_iter:
            break
        g = (2.0 - tau) * disc.k_nodes * np.abs(u) ** (1.0 - tau)
        p, solved = _linear_solve(disc, g, -R, opts)
        gmres_failures += not solved
        phi0 = 0.5 * rn * rn
        step = 1.0
        while True:
            c_try = c + step * p
            u_try, R_try, scale_try = _eval(c_try)
            rn_try = float(np.linalg.norm(R_try))
            if 0.5 * rn_try * rn_try <= (1.0 - 2.0 * opts.armijo_c * step) * phi0:
                break
            step *= 0.5
            if step < opts.min_step:
                break
        if step < opts.min_step:
            logger.warning("line search failed at Newton step %d (residual %.3e)", it, rn)
            break
        c, u, R, rn, scale = c_try, u_try, R_try, rn_try, scale_try
        logger.debug("newton %d: |R| = %.3e (step %.3g)", it + 1, rn, step)

    vmin = _min_on_nodes(disc, c)
    state = SolverState(
        tau=float(tau), v=v0.with_coeffs(c), residual_norm=rn, newton_iters=it, positive=vmin > 0.0,
        L=v0.L, converged=converged, min_value=vmin, scale=scale, history=tuple(history),
        gmres_failures=gmres_failures,
    )
    if converged:
        logger.info("newton converged in %d steps at tau=%g (|R|/|N| = %.2e, min v = %.4g)",
                    it, tau, rn / scale if scale else float("nan"), vmin)
        if opts.check_positivity and not state.positive:
            raise PositivityError(f"converged solution is not positive (min v = {vmin:.4g})", state)
    else:
        logger.warning("newton did not converge at tau=%g after %d steps (|R| = %.3e)", tau, it, rn)
    if gmres_failures:
        logger.warning("%d of %d Newton corrections used an unconverged GMRES solve", gmres_failures, it)
    return state


def axisym_solve(K: AmbientPolynomial, tau: float, v0: HarmonicSpectrum,
                 opts: Optional[SolverOptions] = None) -> SolverState:
    """newton_solve restricted to zonal functions about e4."""
    if v0.layout != "zonal":
        raise PreconditionError("axisymmetric solve needs a zonal initial guess")
    if not K.is_zonal():
        raise PreconditionError(f"K = {K.expression} is not zonal about e4")
    return newton_solve(v0, tau, K, opts)


# ============================================================================
# Seeds
# ============================================================================

def constant_seed(K: AmbientPolynomial, tau: float, L: int, layout: str = "full") -> HarmonicSpectrum:
    """v = Kbar^(-1/(1-tau)), the constant solution for K = Kbar."""
    kbar = K.mean_over_sphere()
    if kbar <= 0.0:
        raise DomainError("mean of K must be positive")
    return HarmonicSpectrum.constant(kbar ** (-1.0 / (1.0 - tau)), L, layout)


def bubble_seed(bubbles, L: int, layout: str = "full") -> HarmonicSpectrum:
    """Sum of alpha_i delta_{q_i, t_i}."""
    from .bubbles import bubble_spectrum
    bubbles = list(bubbles)
    out = HarmonicSpectrum.zeros(L, layout)
    for b in bubbles:
        out = out + bubble_spectrum(b, L, layout=layout)
    return out


# ============================================================================
# Energy and consistency checks
# ============================================================================

def energy(v: HarmonicSpectrum, tau: float, K: AmbientPolynomial, dealias: int = None) -> float:
    """I_tau(v) = 1/2 <v, v> - 1/(3 - tau) integral of K |v|^(3-tau)."""
    disc = make_discretization(K, v.L, v.layout, dealias)
    u = disc.synthesize(v.coeffs)
    quad = 0.5 * float(np.sum(disc.multipliers * v.coeffs ** 2))
    return quad - float(np.sum(disc.weights * disc.k_nodes * np.abs(u) ** (3.0 - tau))) / (3.0 - tau)


def random_direction(L: int, layout: str, rng: np.random.Generator) -> HarmonicSpectrum:
    """Random band-limited direction with coefficients decaying like (l+1)^-2, unit L^2 norm."""
    z = HarmonicSpectrum.zeros(L, layout)
    c = rng.standard_normal(z.coeffs.size) / (z.degrees() + 1.0) ** 2
    return z.with_coeffs(c / np.linalg.norm(c))


def bubble_ray_critical_rate(K: AmbientPolynomial, tau: float, L: int = 256, dealias: int = None) -> float:
    """
    Rate t minimising I_tau(delta_{e4,t} / K(e4)) over t in (1, L/4], by quadrature.

    K must be zonal about e4 with a critical point there. At leading order the
    minimiser satisfies t^2 = -4 Lap K / (tau K), so tau (t/K)^2 approaches
    -4 Lap K / K^3 at e4.
    """
    from .bubbles import BubbleParams, bubble_spectrum
    _check_tau(tau)
    top = SpherePoint.axis(4)
    alpha = 1.0 / float(K.evaluate(top.x))

    def ray_energy(t):
        v = bubble_spectrum(BubbleParams(top, float(t), alpha), L, layout="zonal")
        return energy(v, tau, K, dealias)

    res = minimize_scalar(ray_energy, bounds=(1.0 + 1e-6, L / config.RESOLUTION_DIVISOR), method="bounded",
                          options={"xatol": 1e-8})
    logger.info("bubble ray critical rate at tau=%g: t = %.6g (I = %.10g)", tau, res.x, res.fun)
    return float(res.x)


def energy_stationarity(state: SolverState, K: AmbientPolynomial, n_dirs: int = 50, seed: int = 0,
                        h: float = 1e-5, dealias: int = None) -> float:
    """
    Largest relative directional derivative of I_tau at the state, by central differences.

    The derivative along w is compared with |<v, w>| + |integral K |v|^(1-tau) v w|.
    """
    v, tau = state.v, state.tau
    disc = make_discretization(K, v.L, v.layout, dealias)
    u = disc.synthesize(v.coeffs)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_dirs):
        w = random_direction(v.L, v.layout, rng)
        dI = (energy(v + h * w, tau, K, dealias) - energy(v - h * w, tau, K, dealias)) / (2.0 * h)
        wv = disc.synthesize(w.coeffs)
        ref = abs(float(np.sum(disc.multipliers * v.coeffs * w.coeffs))) + \
            abs(float(np.sum(disc.weights * _nonlinearity(u, disc.k_nodes, tau) * wv)))
        worst = max(worst, abs(dI) / max(ref, 1e-300))
    return worst


def jacobian_fd_slope(v: HarmonicSpectrum, tau: float, K: AmbientPolynomial, seed: int = 0,
                      n_levels: int = 5, dealias: int = None) -> Dict[str, object]:
    """
    Compare J w with central differences of the residual; the error should fall like h^2.

    Returns:
        {"h": [...], "errors": [...], "slope": fitted log-log slope}
    """
    disc = make_discretization(K, v.L, v.layout, dealias)
    rng = np.random.default_rng(seed)
    w = random_direction(v.L, v.layout, rng)
    u = disc.synthesize(v.coeffs)
    g = (2.0 - tau) * disc.k_nodes * np.abs(u) ** (1.0 - tau)
    Jw = _jacobian_apply(disc, g, w.coeffs)
    h0 = 0.1 * v.l2_norm()
    hs, errs = [], []
    for i in range(n_levels):
        h = h0 * 2.0 ** (-i)
        fd = (residual(v + h * w, tau, K, dealias).coeffs - residual(v - h * w, tau, K, dealias).coeffs) / (2 * h)
        hs.append(h)
        errs.append(float(np.linalg.norm(fd - Jw)))
    slope = float(np.polyfit(np.log(hs), np.log(np.maximum(errs, 1e-300)), 1)[0])
    return {"h": hs, "errors": errs, "slope": slope}


# ============================================================================
# Blow-up diagnostics
# ============================================================================

@dataclass
class Peak:
    location: np.ndarray
    height: float
    tau_m2: float
    profile_error: float
    t_hat: float
    k_value: float
    concentrating: bool
    nearest_critical: Optional[List[float]] = None
    distance: float = float("nan")

    def to_dict(self) -> Dict[str, object]:
        return {
            "location": [float(x) for x in self.location], "height": self.height, "tau_m2": self.tau_m2,
            "profile_error": self.profile_error, "t_hat": self.t_hat, "k_value": self.k_value,
            "concentrating": self.concentrating, "nearest_critical": self.nearest_critical,
            "distance": self.distance,
        }


@dataclass
class BlowupDiagnostics:
    peaks: List[Peak]
    lambda_hat: np.ndarray
    resolution_ok: bool
    flat: bool
    mean: float
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {"peaks": [p.to_dict() for p in self.peaks], "lambda_hat": self.lambda_hat.tolist(),
                "resolution_ok": self.resolution_ok, "flat": self.flat, "mean": self.mean,
                "warnings": list(self.warnings)}


def _zonal_point(chi: float) -> np.ndarray:
    return np.array([0.0, 0.0, math.sin(chi), math.cos(chi)])


def _zonal_maxima(v: HarmonicSpectrum) -> List[np.ndarray]:
    n = max(8 * v.L + 1, 257)
    chi = np.linspace(0.0, np.pi, n)
    pts = np.stack([np.zeros(n), np.zeros(n), np.sin(chi), np.cos(chi)], axis=1)
    vals = evaluate_spectrum(v, pts)
    out = []
    for i in range(n):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i < n - 1 else -np.inf
        if vals[i] >= left and vals[i] >= right and (vals[i] > left or vals[i] > right):
            lo, hi = chi[max(i - 1, 0)], chi[min(i + 1, n - 1)]
            res = minimize_scalar(lambda c: -float(evaluate_spectrum(v, _zonal_point(c))[0]),
                                  bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            best = res.x if -res.fun >= vals[i] else chi[i]
            out.append(_zonal_point(best))
    return out


def _full_samples(v: HarmonicSpectrum) -> Tuple[np.ndarray, np.ndarray]:
    grid = build_grid(max(v.L, 8))
    return grid.nodes, get_transform(v.L, grid).synthesis(v.coeffs)


# tangent offsets of the second-order stencil: centre, +-e_a, (+-e_a +-e_b) for a < b
_PAIRS = [(0, 1), (0, 2), (1, 2)]
_STENCIL = np.concatenate([
    np.zeros((1, 3)),
    np.concatenate([np.eye(3), -np.eye(3)]),
    np.array([sa * np.eye(3)[a] + sb * np.eye(3)[b]
              for a, b in _PAIRS for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1))]),
])


def _batched_exp(x: np.ndarray, frames: np.ndarray, w: np.ndarray) -> np.ndarray:
    """exp_x(E w) for x[n, 4], frames[n, 4, 3], w[n, s, 3] -> [n, s, 4]."""
    t = np.einsum("nij,nsj->nsi", frames, w)
    theta = np.linalg.norm(t, axis=-1, keepdims=True)
    safe = np.where(theta > 0.0, theta, 1.0)
    return np.cos(theta) * x[:, None, :] + np.sin(theta) * t / safe


def _refine_maxima(v: HarmonicSpectrum, starts: np.ndarray, h: float = 1e-4,
                   max_iter: int = 12, tol: float = 1e-11) -> np.ndarray:
    """
    Newton on grad v = 0 for all candidate maxima at once.

    Gradient and Hessian come from a 19-point stencil in the tangent frame,
    so each iteration costs one batched evaluation of the spectrum.
    """
    x = np.array(starts, dtype=float).reshape(-1, 4)
    if x.shape[0] == 0:
        return x
    active = np.ones(x.shape[0], dtype=bool)
    cap = np.pi / max(v.L, 1)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        frames = np.stack([tangent_frame(p) for p in x[idx]])
        pts = _batched_exp(x[idx], frames, np.broadcast_to(h * _STENCIL, (idx.size,) + _STENCIL.shape))
        f = evaluate_spectrum(v, pts.reshape(-1, 4)).reshape(idx.size, -1)
        f0, fp, fm = f[:, 0], f[:, 1:4], f[:, 4:7]
        grad = (fp - fm) / (2.0 * h)
        H = np.zeros((idx.size, 3, 3))
        H[:, np.arange(3), np.arange(3)] = (fp - 2.0 * f0[:, None] + fm) / h ** 2
        for k, (a, b) in enumerate(_PAIRS):
            pp, pm, mp, mm = (f[:, 7 + 4 * k + s] for s in range(4))
            H[:, a, b] = H[:, b, a] = (pp - pm - mp + mm) / (4.0 * h * h)
        steps = np.empty((idx.size, 3))
        for n in range(idx.size):
            eig = np.linalg.eigvalsh(H[n])
            # ascent direction when the Hessian is not negative definite
            steps[n] = -np.linalg.solve(H[n], grad[n]) if eig[-1] < 0.0 else grad[n] / max(abs(eig[0]), 1.0)
        size = np.linalg.norm(steps, axis=1)
        steps *= np.minimum(1.0, cap / np.maximum(size, 1e-300))[:, None]
        x[idx] = _batched_exp(x[idx], frames, steps[:, None, :])[:, 0]
        x[idx] /= np.linalg.norm(x[idx], axis=1, keepdims=True)
        active[idx] = size > tol
    return x


def _full_maxima(v: HarmonicSpectrum, floor: float, samples: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                 n_neighbors: int = 26) -> List[np.ndarray]:
    """Grid nodes not below their nearest neighbours (and above `floor`), refined together."""
    nodes, vals = _full_samples(v) if samples is None else samples
    tree = cKDTree(nodes)
    _, idx = tree.query(nodes, k=n_neighbors + 1)
    cand = np.flatnonzero(np.all(vals[:, None] >= vals[idx[:, 1:]], axis=1) & (vals >= floor))
    refined = _refine_maxima(v, nodes[cand])
    heights = evaluate_spectrum(v, refined) if cand.size else np.zeros(0)
    out: List[np.ndarray] = []
    for i, x, hx in zip(cand, refined, heights):
        x = x if hx >= vals[i] else nodes[i]
        if all(geodesic_distance(x, y) > 1e-4 for y in out):
            out.append(x)
    return out


def _profile_error(v: HarmonicSpectrum, q: np.ndarray, m: float, kq: float, n_radii: int = 64) -> float:
    """
    sup over d <= 3/m of |v(exp_q(d e))/m - (1 + y^2)/(1 + K(q)^2 m^2 y^2)|, y = tan(d/2).

    The model is delta_{q,t}/t with t = K(q) m, the rescaled exact bubble.
    """
    d = np.linspace(0.0, min(3.0 / m, np.pi), n_radii)
    E = tangent_frame(q)
    if v.layout == "zonal":
        # meridian directions only
        dirs = [E[:, a] for a in range(3) if abs(E[3, a]) > 1e-8] or [E[:, 0]]
    else:
        dirs = [E[:, a] for a in range(3)]
    dirs = np.array([s * e / np.linalg.norm(e) for e in dirs for s in (1.0, -1.0)])
    y2 = np.tan(0.5 * d) ** 2
    model = (1.0 + y2) / (1.0 + kq ** 2 * m ** 2 * y2)
    pts = np.cos(d)[None, :, None] * q[None, None, :] + np.sin(d)[None, :, None] * dirs[:, None, :]
    vals = evaluate_spectrum(v, pts.reshape(-1, 4)).reshape(len(dirs), n_radii)
    return float(np.max(np.abs(vals / m - model[None, :])))


def diagnostics(state: SolverState, K: AmbientPolynomial, expected_k: Optional[int] = None,
                critical_points: Optional[Sequence] = None) -> BlowupDiagnostics:
    """
    Peaks of a converged state.

    Reports heights m, tau m^2, lambda_hat_j = m_1 / (K(q_j) m_j), profile
    errors against the rescaled bubble (1 + y^2)/(1 + K(q)^2 m^2 y^2) with
    y = tan(d/2), nearest critical points of K and the resolution flag
    t_hat = m K(q) <= L/4. A flat state yields one non-concentrating peak.
    """
    v = state.v
    mean = float(v.coeffs[0] / SQRT_AREA)
    if v.layout == "zonal":
        chi = np.linspace(0.0, np.pi, max(8 * v.L + 1, 257))
        pts = np.stack([np.zeros_like(chi), np.zeros_like(chi), np.sin(chi), np.cos(chi)], axis=1)
        vals = evaluate_spectrum(v, pts)
    else:
        pts, vals = _full_samples(v)
    vmax, vmin = float(np.max(vals)), float(np.min(vals))
    flat = (vmax - vmin) / max(abs(vmax), 1e-300) <= config.FLAT_TOLERANCE
    warnings: List[str] = []

    if flat:
        locs = [pts[int(np.argmax(vals))]]
    elif v.layout == "zonal":
        locs = _zonal_maxima(v)
    else:
        locs = _full_maxima(v, floor=mean, samples=(pts, vals))
    heights = [float(h) for h in evaluate_spectrum(v, np.array(locs))] if locs else []
    order = np.argsort(heights)[::-1]

    peaks: List[Peak] = []
    for i in order:
        q, m = np.asarray(locs[i], dtype=float), heights[i]
        kq = float(K.evaluate(q))
        conc = (not flat) and m / mean >= config.CONCENTRATION_RATIO
        pk = Peak(location=q, height=m, tau_m2=state.tau * m * m,
                  profile_error=_profile_error(v, q, m, kq), t_hat=m * kq, k_value=kq, concentrating=conc)
        if critical_points:
            locs_c = [np.asarray(getattr(c, "location", c), dtype=float) for c in critical_points]
            dists = [geodesic_distance(q, c) for c in locs_c]
            j = int(np.argmin(dists))
            pk.nearest_critical = [float(x) for x in locs_c[j]]
            pk.distance = float(dists[j])
        peaks.append(pk)

    n_conc = sum(p.concentrating for p in peaks)
    if expected_k is not None and n_conc < expected_k:
        warnings.append(f"expected {expected_k} concentrating peaks, found {n_conc}")
        logger.warning(warnings[-1])

    lam = np.array([peaks[0].height / (p.k_value * p.height) for p in peaks]) if peaks else np.zeros(0)
    limit = v.L / config.RESOLUTION_DIVISOR
    resolution_ok = all(p.t_hat <= limit for p in peaks if p.concentrating)
    return BlowupDiagnostics(peaks, lam, resolution_ok, bool(flat), mean, warnings)
