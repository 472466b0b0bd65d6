#!/usr/bin/env python3
"""
Points, distances, charts, derivative restrictions and quadrature grids on S^3.

Conventions:
    x = (sin(chi) sin(theta) cos(phi), sin(chi) sin(theta) sin(phi), sin(chi) cos(theta), cos(chi))
    The north pole is e4 = (0, 0, 0, 1). |S^3| = 2 pi^2.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional, Sequence, Tuple, Union

import einops
import numpy as np
from scipy.special import gammaln, roots_chebyu, roots_legendre
from scipy.stats import special_ortho_group

from .config import config
from .errors import DomainError, PreconditionError, ResourceBudgetError

logger = logging.getLogger(__name__)

S3_AREA = 2.0 * np.pi ** 2
S2_AREA = 4.0 * np.pi
UNIT_TOL = 1e-12


# ============================================================================
# Points and coordinates
# ============================================================================

@dataclass(frozen=True, eq=False)
class SpherePoint:
    """A point of S^3 as a read-only unit 4-vector."""

    x: np.ndarray

    def __post_init__(self):
        arr = np.array(self.x, dtype=float).reshape(-1)
        if arr.shape != (4,) or not np.all(np.isfinite(arr)):
            raise DomainError(f"SpherePoint needs a finite 4-vector, got {self.x!r}")
        if abs(np.linalg.norm(arr) - 1.0) > UNIT_TOL:
            raise DomainError(f"SpherePoint must be a unit vector, |x| = {np.linalg.norm(arr)!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "x", arr)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "SpherePoint":
        """Normalise any nonzero 4-vector onto S^3."""
        arr = np.asarray(v, dtype=float).reshape(-1)
        norm = np.linalg.norm(arr)
        if norm == 0.0 or not np.isfinite(norm):
            raise DomainError("cannot normalise a zero or non-finite vector")
        return cls(arr / norm)

    @classmethod
    def axis(cls, i: int) -> "SpherePoint":
        """e_i with 1-based index, matching x1..x4."""
        if i not in (1, 2, 3, 4):
            raise DomainError(f"axis index must be 1..4, got {i}")
        v = np.zeros(4)
        v[i - 1] = 1.0
        return cls(v)

    def __neg__(self) -> "SpherePoint":
        return SpherePoint(-self.x)

    def isclose(self, other: "SpherePoint", tol: float = 1e-12) -> bool:
        return geodesic_distance(self, other) <= tol

    def tolist(self):
        return [float(c) for c in self.x]

    def __repr__(self) -> str:
        return "SpherePoint(" + ", ".join(f"{c:.12g}" for c in self.x) + ")"


PointLike = Union[SpherePoint, np.ndarray, Sequence[float]]


def as_array(p: PointLike) -> np.ndarray:
    """Coordinates of a point (or an array of points, last axis 4)."""
    if isinstance(p, SpherePoint):
        return p.x
    return np.asarray(p, dtype=float)


@dataclass(frozen=True)
class HypersphericalCoords:
    """Angles (chi, theta, phi) with chi, theta in [0, pi] and phi in [0, 2 pi)."""

    chi: float
    theta: float
    phi: float

    def __post_init__(self):
        eps = 1e-12
        if not (-eps <= self.chi <= np.pi + eps and -eps <= self.theta <= np.pi + eps):
            raise DomainError(f"chi and theta must lie in [0, pi]: {self}")
        if not (-eps <= self.phi < 2 * np.pi + eps):
            raise DomainError(f"phi must lie in [0, 2 pi): {self}")

    def to_point(self) -> SpherePoint:
        sc = math.sin(self.chi)
        st = math.sin(self.theta)
        v = np.array([
            sc * st * math.cos(self.phi),
            sc * st * math.sin(self.phi),
            sc * math.cos(self.theta),
            math.cos(self.chi),
        ])
        return SpherePoint.from_vector(v)

    @classmethod
    def from_point(cls, p: PointLike) -> "HypersphericalCoords":
        chi, theta, phi = angles_of(as_array(p))
        return cls(float(chi), float(theta), float(phi))


def angles_of(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised (chi, theta, phi) for an array of points (last axis 4)."""
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    r3 = np.hypot(rho, x[..., 2])
    chi = np.arctan2(r3, x[..., 3])
    theta = np.arctan2(rho, x[..., 2])
    phi = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2.0 * np.pi)
    return chi, theta, phi


# ============================================================================
# Distances and charts
# ============================================================================

def geodesic_distance(p: PointLike, q: PointLike) -> Union[float, np.ndarray]:
    """
    Great-circle distance d(p, q) = arccos(p . q) in [0, pi].

    Either argument may be an array of points; the dot product is clamped to
    [-1, 1] before arccos.
    """
    c = np.clip(np.sum(as_array(p) * as_array(q), axis=-1), -1.0, 1.0)
    d = np.arccos(c)
    return float(d) if np.ndim(d) == 0 else d


def stereographic_to_sphere(y: Sequence[float]) -> SpherePoint:
    """F(y) = (2y / (1 + |y|^2), (|y|^2 - 1) / (1 + |y|^2)); y = 0 maps to the south pole."""
    y = np.asarray(y, dtype=float).reshape(3)
    if not np.all(np.isfinite(y)):
        raise DomainError(f"stereographic coordinate must be finite, got {y!r}")
    r2 = float(y @ y)
    v = np.concatenate([2.0 * y, [r2 - 1.0]]) / (1.0 + r2)
    return SpherePoint.from_vector(v)


def sphere_to_stereographic(p: PointLike) -> np.ndarray:
    """Inverse of stereographic_to_sphere; undefined at the north pole."""
    x = as_array(p)
    if 1.0 - x[3] <= 1e-14:
        raise DomainError("stereographic projection is undefined at the north pole (0, 0, 0, 1)")
    return x[:3] / (1.0 - x[3])


def conformal_factor(y: Sequence[float]) -> float:
    """H(y) = 2 / (1 + |y|^2), the conformal factor of the stereographic chart."""
    y = np.asarray(y, dtype=float)
    return float(2.0 / (1.0 + np.sum(y * y)))


def chart_distance_squared(p: PointLike, centre: PointLike) -> Union[float, np.ndarray]:
    """|y|^2 in the stereographic chart that sends `centre` to y = 0: (1 - cos d)/(1 + cos d)."""
    c = np.clip(np.sum(as_array(p) * as_array(centre), axis=-1), -1.0, 1.0)
    return (1.0 - c) / (1.0 + c)


# ============================================================================
# Tangent frames, exponential map, rotations
# ============================================================================

def tangent_frame(p: PointLike) -> np.ndarray:
    """
    Orthonormal basis of T_p S^3 as the columns of a 4x3 matrix.

    Gram-Schmidt on the ambient axes least aligned with p, in order of
    increasing |p_i|, so the choice is deterministic and never degenerate.
    """
    x = as_array(p)
    order = np.argsort(np.abs(x), kind="stable")[:3]
    basis = [x]
    for i in order:
        v = np.zeros(4)
        v[i] = 1.0
        for b in basis:
            v = v - (v @ b) * b
        basis.append(v / np.linalg.norm(v))
    return np.stack(basis[1:], axis=1)


def exp_map(p: PointLike, v: Sequence[float]) -> SpherePoint:
    """Geodesic exponential exp_p(v); the normal part of v is discarded."""
    x = as_array(p)
    v = np.asarray(v, dtype=float)
    v = v - (v @ x) * x
    theta = np.linalg.norm(v)
    if theta < 1e-15:
        return SpherePoint.from_vector(x)
    return SpherePoint.from_vector(math.cos(theta) * x + math.sin(theta) * v / theta)


def random_rotation(seed: Optional[int] = None) -> np.ndarray:
    """Haar-random element of SO(4)."""
    return special_ortho_group.rvs(4, random_state=seed)


def givens_rotation(i: int, j: int, angle: float) -> np.ndarray:
    """Rotation by `angle` in the (x_i, x_j) plane, 1-based indices."""
    if i == j or not (1 <= i <= 4 and 1 <= j <= 4):
        raise PreconditionError(f"Givens plane needs two distinct axes in 1..4, got ({i}, {j})")
    R = np.eye(4)
    c, s = math.cos(angle), math.sin(angle)
    a, b = i - 1, j - 1
    R[a, a] = c
    R[b, b] = c
    R[a, b] = -s
    R[b, a] = s
    return R


def sphere_moment(exponents: Sequence[int]) -> float:
    """Closed form of the integral of x1^a1 x2^a2 x3^a3 x4^a4 over S^3."""
    a = np.asarray(exponents, dtype=int)
    if np.any(a % 2):
        return 0.0
    logv = np.log(2.0) + np.sum(gammaln((a + 1) / 2.0)) - gammaln((a.sum() + 4) / 2.0)
    return float(np.exp(logv))


# ============================================================================
# Quadrature grids
# ============================================================================

@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """
    Product quadrature rule on S^3.

    nodes has shape (N, 4) in (chi, theta, phi) C-order; the 1-D factors are
    kept so that harmonic transforms can be done as separable sums.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    chi: np.ndarray
    chi_weights: np.ndarray
    theta: np.ndarray
    theta_weights: np.ndarray
    phi: np.ndarray
    phi_weights: np.ndarray
    grid_id: str = field(default="")

    def __post_init__(self):
        for name in ("nodes", "weights", "chi", "chi_weights", "theta", "theta_weights", "phi", "phi_weights"):
            getattr(self, name).flags.writeable = False

    @property
    def shape(self) -> Tuple[int, int, int]:
        return len(self.chi), len(self.theta), len(self.phi)

    @property
    def size(self) -> int:
        return len(self.weights)

    def points(self) -> Iterator[SpherePoint]:
        for x in self.nodes:
            yield SpherePoint(x)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=16)
def build_grid(L: int, max_nodes: Optional[int] = None) -> QuadratureGrid:
    """
    Product Gauss grid exact for harmonics (and ambient monomials) of degree <= 2L + 1.

    Args:
        L: resolution parameter, L >= 1
        max_nodes: node budget (defaults to Config.MAX_GRID_NODES)

    Returns:
        QuadratureGrid with (L+1) x (L+1) x (2L+2) nodes
    """
    if L < 1:
        raise PreconditionError(f"build_grid needs L >= 1, got {L}")
    budget = config.MAX_GRID_NODES if max_nodes is None else max_nodes
    n = L + 1
    n_phi = 2 * L + 2
    count = n * n * n_phi
    if count > budget:
        raise ResourceBudgetError(
            f"grid for L={L} needs {count} nodes (~{count * 5 * 8 / 2**20:.0f} MiB), budget is {budget}",
            required=count,
        )

    # cos(chi) against sqrt(1 - x^2), i.e. sin^2(chi) d(chi)
    x_chi, w_chi = roots_chebyu(n)
    x_th, w_th = roots_legendre(n)
    chi = np.arccos(x_chi)
    theta = np.arccos(x_th)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    w_phi = np.full(n_phi, 2.0 * np.pi / n_phi)

    C, T, P = np.meshgrid(chi, theta, phi, indexing="ij")
    sc, st = np.sin(C), np.sin(T)
    xyz = np.stack([sc * st * np.cos(P), sc * st * np.sin(P), sc * np.cos(T), np.cos(C)], axis=-1)
    nodes = einops.rearrange(xyz, "c t p d -> (c t p) d")
    weights = einops.rearrange(
        w_chi[:, None, None] * w_th[None, :, None] * w_phi[None, None, :], "c t p -> (c t p)"
    )
    logger.debug("built S^3 grid L=%d with %d nodes", L, count)
    return QuadratureGrid(
        nodes=np.ascontiguousarray(nodes), weights=np.ascontiguousarray(weights), order=2 * L + 1,
        chi=chi, chi_weights=w_chi, theta=theta, theta_weights=w_th, phi=phi, phi_weights=w_phi,
        grid_id=f"s3-product-L{L}",
    )


def grid_for_order(order: int, max_nodes: Optional[int] = None) -> QuadratureGrid:
    """Smallest product grid whose exactness order is at least `order`."""
    L = max(1, int(math.ceil((order - 1) / 2.0)))
    return build_grid(L, max_nodes)


# ============================================================================
# Derivatives of ambient functions restricted to S^3
# ============================================================================

@dataclass(frozen=True)
class SphereDerivatives:
    value: float
    gradient: np.ndarray      # tangential gradient, ambient 4-vector
    hessian: np.ndarray       # intrinsic Hessian in `frame`, 3x3
    laplacian: float
    frame: np.ndarray         # 4x3 orthonormal tangent frame

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.gradient))


def sphere_derivatives(K, p: PointLike) -> SphereDerivatives:
    """
    Value, tangential gradient, intrinsic Hessian and Laplace-Beltrami of K at p.

    With the ambient extension K~:
        grad  = (I - p p^T) grad K~
        Hess  = E^T (D^2 K~ - (p . grad K~) I) E
        Lap   = Lap_R4 K~ - D^2 K~(p, p) - 3 p . grad K~
    """
    x = as_array(p)
    g = np.asarray(K.gradient(x), dtype=float)
    H = np.asarray(K.hessian(x), dtype=float)
    radial = float(x @ g)
    grad_t = g - radial * x
    E = tangent_frame(x)
    hess = E.T @ (H - radial * np.eye(4)) @ E
    hess = 0.5 * (hess + hess.T)
    lap = float(np.trace(H) - x @ H @ x - 3.0 * radial)
    return SphereDerivatives(
        value=float(K.evaluate(x)), gradient=grad_t, hessian=hess, laplacian=lap, frame=E,
    )


def sample_points(n: int, seed: Optional[int] = None) -> np.ndarray:
    """n uniformly distributed points on S^3 (normalised Gaussians)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 4))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
