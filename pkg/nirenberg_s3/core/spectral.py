#!/usr/bin/env python3
"""
Hyperspherical-harmonic analysis and synthesis on S^3.

Basis (orthonormal, real):
    Y_lkm(chi, theta, phi) = N_lk sin^k(chi) C^{(k+1)}_{l-k}(cos chi) * S_km(theta, phi)

S_km are the real orthonormal harmonics of S^2 (m < 0 -> sin(|m| phi),
m > 0 -> cos(m phi)). Coefficients of degree l form a block of (l+1)^2
entries ordered by k = 0..l, then m = -k..k; the block of degree l starts at
l(l+1)(2l+1)/6. This ordering is frozen (see BASIS_ID).

The zonal layout keeps one coefficient per degree for functions of x4 only;
its basis U_l(cos chi) / sqrt(2 pi^2) coincides with Y_l00.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Sequence, Tuple, Union

import einops
import numpy as np
from scipy.special import eval_gegenbauer, gammaln, lpmv

from .config import config
from .errors import IntegrationError, PreconditionError
from .geometry import (
    S3_AREA, PointLike, QuadratureGrid, SpherePoint, angles_of, as_array, grid_for_order,
)

logger = logging.getLogger(__name__)

BASIS_ID = "s3-gegenbauer-legendre-fourier/orthonormal/v1"
LAYOUTS = ("full", "zonal")
SQRT_AREA = math.sqrt(S3_AREA)


# ============================================================================
# Mode bookkeeping
# ============================================================================

def n_modes(L: int, layout: str = "full") -> int:
    if layout == "zonal":
        return L + 1
    return (L + 1) * (L + 2) * (2 * L + 3) // 6


def block_offset(l: int) -> int:
    """Index of the first coefficient of degree l in the full layout."""
    return l * (l + 1) * (2 * l + 1) // 6


@lru_cache(maxsize=32)
def mode_table(L: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(l, k, m) of every full-layout coefficient, in the frozen order."""
    ls, ks, ms = [], [], []
    for l in range(L + 1):
        for k in range(l + 1):
            for m in range(-k, k + 1):
                ls.append(l)
                ks.append(k)
                ms.append(m)
    out = tuple(np.array(a, dtype=int) for a in (ls, ks, ms))
    for a in out:
        a.flags.writeable = False
    return out


def p_sigma_multiplier(degrees: np.ndarray) -> np.ndarray:
    """
    Eigenvalue of P_{1/2} on degree-l harmonics of S^3.

    -Delta has eigenvalue l(l+2), so B = sqrt(-Delta + 1) acts as l + 1 and
    P_sigma = Gamma(B + 1/2 + sigma) / Gamma(B + 1/2 - sigma) = Gamma(l+2) / Gamma(l+1) = l + 1.
    This is the only place the multiplier is defined.
    """
    return np.asarray(degrees, dtype=float) + 1.0


def laplacian_multiplier(degrees: np.ndarray) -> np.ndarray:
    l = np.asarray(degrees, dtype=float)
    return -l * (l + 2.0)


# ============================================================================
# Spectra and fields
# ============================================================================

@dataclass(frozen=True, eq=False)
class HarmonicSpectrum:
    """Degree-indexed coefficients of a function on S^3 (orthonormal basis)."""

    L: int
    coeffs: np.ndarray
    layout: str = "full"

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise PreconditionError(f"unknown spectrum layout {self.layout!r}")
        arr = np.array(self.coeffs, dtype=float).reshape(-1)
        if arr.size != n_modes(self.L, self.layout):
            raise PreconditionError(
                f"{self.layout} spectrum with L={self.L} needs {n_modes(self.L, self.layout)} coefficients, got {arr.size}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zeros(cls, L: int, layout: str = "full") -> "HarmonicSpectrum":
        return cls(L, np.zeros(n_modes(L, layout)), layout)

    @classmethod
    def constant(cls, value: float, L: int, layout: str = "full") -> "HarmonicSpectrum":
        c = np.zeros(n_modes(L, layout))
        c[0] = value * SQRT_AREA
        return cls(L, c, layout)

    def degrees(self) -> np.ndarray:
        if self.layout == "zonal":
            return np.arange(self.L + 1)
        return mode_table(self.L)[0]

    def block(self, l: int) -> np.ndarray:
        if not 0 <= l <= self.L:
            raise PreconditionError(f"degree {l} outside 0..{self.L}")
        if self.layout == "zonal":
            return self.coeffs[l:l + 1]
        return self.coeffs[block_offset(l):block_offset(l + 1)]

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def with_coeffs(self, coeffs: np.ndarray) -> "HarmonicSpectrum":
        return HarmonicSpectrum(self.L, coeffs, self.layout)

    def to_full(self) -> "HarmonicSpectrum":
        if self.layout == "full":
            return self
        out = np.zeros(n_modes(self.L))
        for l in range(self.L + 1):
            out[block_offset(l)] = self.coeffs[l]  # (l, k=0, m=0) comes first in its block
        return HarmonicSpectrum(self.L, out, "full")

    def resized(self, L: int) -> "HarmonicSpectrum":
        """Truncate or zero-pad to a new band limit."""
        out = np.zeros(n_modes(L, self.layout))
        keep = min(out.size, self.coeffs.size)
        out[:keep] = self.coeffs[:keep]
        return HarmonicSpectrum(L, out, self.layout)

    def _check_compatible(self, other: "HarmonicSpectrum"):
        if other.L != self.L or other.layout != self.layout:
            raise PreconditionError(
                f"spectra differ: (L={self.L}, {self.layout}) vs (L={other.L}, {other.layout})"
            )

    def __add__(self, other: "HarmonicSpectrum") -> "HarmonicSpectrum":
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "HarmonicSpectrum") -> "HarmonicSpectrum":
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "HarmonicSpectrum":
        return self.with_coeffs(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "HarmonicSpectrum":
        return self.with_coeffs(-self.coeffs)


@dataclass(frozen=True, eq=False)
class SphericalField:
    """Values of a function at the nodes of a quadrature grid."""

    grid: QuadratureGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).reshape(-1)
        if arr.size != self.grid.size:
            raise PreconditionError(
                f"field has {arr.size} values but grid {self.grid.grid_id} has {self.grid.size} nodes"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def grid_id(self) -> str:
        return self.grid.grid_id

    @classmethod
    def from_function(cls, grid: QuadratureGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "SphericalField":
        return cls(grid, fn(grid.nodes))

    def integrate(self) -> float:
        return self.grid.integrate(self.values)


# ============================================================================
# Basis tables
# ============================================================================

def _chi_table(L: int, chi: np.ndarray) -> np.ndarray:
    """[len(chi), l, k] of N_lk sin^k(chi) C^{(k+1)}_{l-k}(cos chi), zero for k > l."""
    l = np.arange(L + 1)[:, None]
    k = np.arange(L + 1)[None, :]
    valid = k <= l
    n = np.where(valid, l - k, 0)
    lam = k + 1.0
    log_h = (np.log(np.pi) + (1.0 - 2.0 * lam) * np.log(2.0) + gammaln(n + 2.0 * lam)
             - gammaln(n + 1.0) - np.log(n + lam) - 2.0 * gammaln(lam))
    norm = np.where(valid, np.exp(-0.5 * log_h), 0.0)
    c = np.cos(chi)[:, None, None]
    s = np.sin(chi)[:, None, None]
    vals = eval_gegenbauer(n[None], lam[None], c) * s ** k[None]
    return vals * norm[None]


def _theta_table(L: int, theta: np.ndarray) -> np.ndarray:
    """[len(theta), k, m + L] of the normalised associated Legendre factors of S_km."""
    k = np.arange(L + 1)[:, None]
    m = np.arange(-L, L + 1)[None, :]
    am = np.abs(m)
    valid = am <= k
    am_safe = np.where(valid, am, 0)
    log_ratio = gammaln(k - am_safe + 1.0) - gammaln(k + am_safe + 1.0)
    norm = np.sqrt((2 * k + 1) / (4.0 * np.pi) * np.exp(log_ratio)) * np.where(am_safe > 0, math.sqrt(2.0), 1.0)
    norm = np.where(valid, norm, 0.0)
    x = np.cos(theta)[:, None, None]
    return lpmv(am_safe[None], k[None], x) * norm[None]


def _phi_table(L: int, phi: np.ndarray) -> np.ndarray:
    """[len(phi), m + L]: sin(|m| phi) for m < 0, 1 for m = 0, cos(m phi) for m > 0."""
    m = np.arange(-L, L + 1)[None, :]
    p = np.asarray(phi)[:, None]
    return np.where(m < 0, np.sin(-m * p), np.cos(m * p))


def evaluate_basis(L: int, points: PointLike) -> np.ndarray:
    """Full-layout basis values at arbitrary points: shape [n_points, n_modes(L)]."""
    x = np.atleast_2d(as_array(points))
    chi, theta, phi = angles_of(x)
    l_idx, k_idx, m_idx = mode_table(L)
    chi_t = _chi_table(L, chi)
    theta_t = _theta_table(L, theta)
    phi_t = _phi_table(L, phi)
    return chi_t[:, l_idx, k_idx] * theta_t[:, k_idx, m_idx + L] * phi_t[:, m_idx + L]


def zonal_basis(L: int, cos_chi: np.ndarray) -> np.ndarray:
    """[n, L+1] of U_l(cos chi) / sqrt(2 pi^2) by the three-term recurrence."""
    x = np.asarray(cos_chi, dtype=float).reshape(-1)
    out = np.empty((x.size, L + 1))
    out[:, 0] = 1.0
    if L >= 1:
        out[:, 1] = 2.0 * x
    for l in range(1, L):
        out[:, l + 1] = 2.0 * x * out[:, l] - out[:, l - 1]
    return out / SQRT_AREA


def chebyshev_u_series(coeffs: np.ndarray, c: np.ndarray, derivative: bool = False) -> np.ndarray:
    """
    sum_l coeffs[l] U_l(c) (or its c-derivative) for arrays c, by recurrence.

    U_l = C_l^{(1)}, the degree-l zonal kernel on S^3.
    """
    c = np.asarray(c, dtype=float)
    u_prev, u = np.zeros_like(c), np.ones_like(c)
    du_prev, du = np.zeros_like(c), np.zeros_like(c)
    total = np.zeros_like(c)
    for l, a in enumerate(np.asarray(coeffs, dtype=float)):
        if a != 0.0:
            total = total + a * (du if derivative else u)
        u_next = 2.0 * c * u - u_prev
        du_next = 2.0 * u + 2.0 * c * du - du_prev
        u_prev, u = u, u_next
        du_prev, du = du, du_next
    return total


# ============================================================================
# Separable transform
# ============================================================================

class SphericalTransform:
    """Analysis/synthesis between a product grid and the full-layout basis up to degree L."""

    def __init__(self, L: int, grid: QuadratureGrid):
        self.L = L
        self.grid = grid
        self.chi_tab = _chi_table(L, grid.chi)          # [c, l, k]
        self.theta_tab = _theta_table(L, grid.theta)    # [t, k, m]
        self.phi_tab = _phi_table(L, grid.phi)          # [p, m]
        self.l_idx, self.k_idx, m_idx = mode_table(L)
        self.m_idx = m_idx + L
        self.wchi_tab = self.chi_tab * grid.chi_weights[:, None, None]
        self.wtheta_tab = self.theta_tab * grid.theta_weights[:, None, None]
        self.wphi_tab = self.phi_tab * grid.phi_weights[:, None]

    def analysis(self, values: np.ndarray) -> np.ndarray:
        """Grid values [N] or [N, B] -> coefficients [modes] or [modes, B]."""
        if self.grid.order < 2 * self.L:
            raise PreconditionError(
                f"grid {self.grid.grid_id} integrates through degree {self.grid.order}; "
                f"forward transform at L={self.L} needs order >= {2 * self.L}"
            )
        nc, nt, np_ = self.grid.shape
        values = np.asarray(values, dtype=float)
        f = einops.rearrange(values, "(c t p) ... -> c t p ...", c=nc, t=nt, p=np_)
        a = np.einsum("ctp...,pm->ctm...", f, self.wphi_tab, optimize=True)
        b = np.einsum("ctm...,tkm->ckm...", a, self.wtheta_tab, optimize=True)
        c = np.einsum("ckm...,clk->lkm...", b, self.wchi_tab, optimize=True)
        return c[self.l_idx, self.k_idx, self.m_idx]

    def synthesis(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients [modes] or [modes, B] -> grid values [N] or [N, B]."""
        L = self.L
        coeffs = np.asarray(coeffs, dtype=float)
        c3 = np.zeros((L + 1, L + 1, 2 * L + 1) + coeffs.shape[1:])
        c3[self.l_idx, self.k_idx, self.m_idx] = coeffs
        b = np.einsum("lkm...,clk->ckm...", c3, self.chi_tab, optimize=True)
        a = np.einsum("ckm...,tkm->ctm...", b, self.theta_tab, optimize=True)
        f = np.einsum("ctm...,pm->ctp...", a, self.phi_tab, optimize=True)
        return einops.rearrange(f, "c t p ... -> (c t p) ...")


_TRANSFORMS: Dict[Tuple[int, str], SphericalTransform] = {}


def get_transform(L: int, grid: QuadratureGrid) -> SphericalTransform:
    """Cached SphericalTransform for (L, grid)."""
    key = (L, grid.grid_id)
    tr = _TRANSFORMS.get(key)
    if tr is None or tr.grid is not grid:
        if len(_TRANSFORMS) >= 16:
            _TRANSFORMS.pop(next(iter(_TRANSFORMS)))
        tr = SphericalTransform(L, grid)
        _TRANSFORMS[key] = tr
    return tr


def dealiased_grid(L: int, factor: int = None) -> QuadratureGrid:
    """Grid of order >= factor * L (factor 3 by default) for nonlinear terms."""
    factor = config.DEALIAS_FACTOR if factor is None else factor
    return grid_for_order(max(factor * L, 2 * L + 1))


# ============================================================================
# Public operations
# ============================================================================

def forward_transform(f: SphericalField, L: int) -> HarmonicSpectrum:
    """Project a field onto harmonics of degree <= L (exact for band-limited input)."""
    tr = get_transform(L, f.grid)
    return HarmonicSpectrum(L, tr.analysis(f.values), "full")


def inverse_transform(s: HarmonicSpectrum, grid: QuadratureGrid) -> SphericalField:
    """Evaluate a spectrum at the nodes of `grid`."""
    if s.layout == "zonal":
        return SphericalField(grid, zonal_basis(s.L, grid.nodes[:, 3]) @ s.coeffs)
    tr = get_transform(s.L, grid)
    return SphericalField(grid, tr.synthesis(s.coeffs))


def evaluate_spectrum(s: HarmonicSpectrum, points: PointLike) -> np.ndarray:
    """Evaluate a spectrum at arbitrary points (array of shape [n, 4] or a single point)."""
    x = np.atleast_2d(as_array(points))
    if s.layout == "zonal":
        return zonal_basis(s.L, x[:, 3]) @ s.coeffs
    return evaluate_basis(s.L, x) @ s.coeffs


def dense_projection(f: SphericalField, L: int) -> HarmonicSpectrum:
    """Direct quadrature projection against every basis function; a test oracle for L <= 8."""
    if L > 8:
        raise PreconditionError("dense_projection is an oracle for L <= 8 only")
    if f.grid.order < 2 * L:
        raise PreconditionError(f"dense projection at L={L} needs grid order >= {2 * L}")
    Y = evaluate_basis(L, f.grid.nodes)
    return HarmonicSpectrum(L, Y.T @ (f.grid.weights * f.values), "full")


def apply_P_sigma(s: HarmonicSpectrum, invert: bool = False) -> HarmonicSpectrum:
    """Multiply (or divide) each degree-l block by l + 1."""
    mult = p_sigma_multiplier(s.degrees())
    return s.with_coeffs(s.coeffs / mult if invert else s.coeffs * mult)


def laplace_beltrami(s: HarmonicSpectrum) -> HarmonicSpectrum:
    """Multiply each degree-l block by -l(l+2)."""
    return s.with_coeffs(s.coeffs * laplacian_multiplier(s.degrees()))


def l2_inner(u: HarmonicSpectrum, v: HarmonicSpectrum) -> float:
    """L^2(S^3) inner product (Parseval)."""
    u._check_compatible(v)
    return float(u.coeffs @ v.coeffs)


# ============================================================================
# Zonal expansions
# ============================================================================

def gegenbauer_coefficients(g: Callable[[np.ndarray], np.ndarray], L: int,
                            rtol: float = None, start_order: int = 64,
                            max_order: int = 2 ** 15) -> np.ndarray:
    """
    Coefficients a_l of g(d) = sum_l a_l C_l^{(1)}(cos d), l = 0..L.

    a_l = (2/pi) * integral_0^pi g(chi) sin(chi) sin((l+1) chi) d(chi), by Gauss-Legendre
    with the order doubled until two successive results agree.

    Raises:
        IntegrationError: when the doubling does not settle (e.g. g more singular than d^-2)
    """
    rtol = config.QUAD_RTOL if rtol is None else rtol
    ls = np.arange(L + 1)

    def _coeffs(n: int) -> np.ndarray:
        chi, w = gauss_legendre(n, 0.0, np.pi)
        with np.errstate(all="ignore"):
            vals = np.asarray(g(chi), dtype=float) * np.sin(chi)
        if not np.all(np.isfinite(vals)):
            raise IntegrationError("zonal kernel produced non-finite values at quadrature nodes")
        return (2.0 / np.pi) * (np.sin(np.outer(ls + 1, chi)) @ (w * vals))

    n = max(start_order, 2 * L + 2)
    prev = _coeffs(n)
    while n < max_order:
        n *= 2
        cur = _coeffs(n)
        err = np.max(np.abs(cur - prev))
        if err <= rtol * max(1.0, np.max(np.abs(cur))):
            logger.debug("zonal expansion settled at %d nodes (err %.2e)", n, err)
            return cur
        prev = cur
    raise IntegrationError(
        f"zonal expansion did not converge with {max_order} nodes; kernel may be non-integrable against sin^2"
    )


def zonal_expand(g: Callable[[np.ndarray], np.ndarray], L: int, pole: Union[SpherePoint, PointLike],
                 layout: str = "full", **kwargs) -> HarmonicSpectrum:
    """
    Spectrum of x -> g(d(x, pole)).

    Uses the addition theorem C_l(x.P) = (2 pi^2 / (l+1)) sum_m Y_lm(x) Y_lm(P).
    The zonal layout needs pole = +-e4.
    """
    a = gegenbauer_coefficients(g, L, **kwargs)
    return gegenbauer_to_spectrum(a, pole, layout)


def gegenbauer_to_spectrum(a: np.ndarray, pole: PointLike, layout: str = "full") -> HarmonicSpectrum:
    """Map Gegenbauer coefficients about `pole` to a spectrum."""
    a = np.asarray(a, dtype=float)
    L = a.size - 1
    p = as_array(pole)
    ls = np.arange(L + 1)
    if layout == "zonal":
        sign = axis_sign(p)
        return HarmonicSpectrum(L, a * SQRT_AREA * sign ** ls, "zonal")
    Y = evaluate_basis(L, p)[0]
    l_idx = mode_table(L)[0]
    return HarmonicSpectrum(L, a[l_idx] * (S3_AREA / (l_idx + 1.0)) * Y, "full")


def axis_sign(p: PointLike) -> float:
    """+1 for e4, -1 for -e4; anything else cannot carry a zonal spectrum."""
    x = as_array(p)
    if abs(abs(x[3]) - 1.0) > 1e-12:
        raise PreconditionError(f"zonal layout needs a pole at +-e4, got {x!r}")
    return 1.0 if x[3] > 0 else -1.0


def green_spike_decay(Ls: Sequence[int], filter_order: int = 4, n_eval: int = 512) -> Dict[str, object]:
    """
    Spectral check of the Green's property of G = 1/(1 - cos d).

    For each L, P_sigma applied to the truncated (Cesaro-filtered) expansion of
    G about e4 is evaluated on d > pi/4; the sup of (field - mean) there is
    recorded, together with the log-log slope against L.
    """
    from .bubbles import greens_function_of_distance

    sups = []
    chi = np.linspace(np.pi / 4, np.pi, n_eval)
    for L in Ls:
        a = gegenbauer_coefficients(greens_function_of_distance, L)
        weights = (1.0 - np.arange(L + 1) / (L + 1.0)) ** filter_order
        s = gegenbauer_to_spectrum(a * weights, SpherePoint.axis(4), "zonal")
        field = apply_P_sigma(s)
        vals = zonal_basis(L, np.cos(chi)) @ field.coeffs
        mean = field.coeffs[0] / SQRT_AREA
        sups.append(float(np.max(np.abs(vals - mean))))
    slope = float(np.polyfit(np.log(np.asarray(Ls, dtype=float)), np.log(sups), 1)[0]) if len(Ls) > 1 else float("nan")
    return {"L": list(Ls), "sup_away_from_pole": sups, "slope": slope, "filter_order": filter_order}


# Imported last: nirenberg_s3.utils imports this module (circular import).
from ..utils.quadrature import gauss_legendre
