#!/usr/bin/env python3
"""
One-dimensional quadrature helpers.

Gauss rules mapped to intervals, and composite rules whose panels are graded
geometrically towards the centres of sharply peaked integrands.
"""

from functools import lru_cache
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=64)
def _legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    n-point Gauss-Legendre rule on [a, b].

    Args:
        n: number of nodes
        a, b: interval end points

    Returns:
        (nodes, weights)
    """
    x, w = _legendre(int(n))
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def gauss_jacobi_radial(n: int, beta: float, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rule for the integral of r**beta * f(r) over [0, radius].

    The returned weights already contain the factor r**beta, so the caller only
    evaluates the smooth part f at the nodes.
    """
    s, w = roots_jacobi(int(n), 0.0, beta)
    # (1 + s)^beta on [-1, 1] maps to r^beta with r = radius (1 + s) / 2
    r = 0.5 * radius * (1.0 + s)
    scale = (0.5 * radius) ** (1.0 + beta)
    return r, w * scale


def graded_breakpoints(a: float, b: float, foci: Iterable[Tuple[float, float]],
                       ratio: float = 2.0, first: float = 1.0 / 16.0) -> np.ndarray:
    """
    Panel edges on [a, b], refined geometrically around each focus.

    Args:
        a, b: interval
        foci: pairs (centre, scale); edges are placed at centre +- scale * first * ratio**j
        ratio: growth factor between consecutive panels
        first: smallest offset in units of the scale

    Returns:
        sorted unique edges including a and b
    """
    edges = [a, b]
    span = b - a
    for centre, scale in foci:
        if scale <= 0 or not np.isfinite(scale):
            continue
        if a <= centre <= b:
            edges.append(centre)
        offset = scale * first
        while offset < span:
            for edge in (centre - offset, centre + offset):
                if a < edge < b:
                    edges.append(edge)
            offset *= ratio
    edges = np.unique(np.asarray(edges, dtype=float))
    # 去掉过近的断点
    keep = np.concatenate([[True], np.diff(edges) > 1e-15 * max(1.0, span)])
    return edges[keep]


def composite_gauss(edges: Sequence[float], n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite n-point Gauss-Legendre rule over consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    x, w = _legendre(int(n))
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    nodes = half * x[None, :] + 0.5 * (left + right)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()
