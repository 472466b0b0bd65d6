#!/usr/bin/env python3
"""
Ambient polynomials K(x1, x2, x3, x4) restricted to S^3.

K is stored as an exact monomial table so that values and derivatives of any
order come in closed form. Expressions are parsed with sympy.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations
from sympy.polys.polyerrors import BasePolynomialError

from .errors import ConfigError

logger = logging.getLogger(__name__)

SYMBOLS = sympy.symbols("x1 x2 x3 x4", real=True)
_LOCALS = {str(s): s for s in SYMBOLS}
_TRANSFORMS = standard_transformations + (convert_xor,)

Monomial = Tuple[float, Tuple[int, int, int, int]]


@dataclass(frozen=True)
class AmbientPolynomial:
    """
    Sum of coefficient * x1^a1 x2^a2 x3^a3 x4^a4.

    Terms are kept in canonical (degree, exponent) order with zero
    coefficients dropped, so equal polynomials compare and hash equal.
    """

    terms: Tuple[Monomial, ...]

    def __post_init__(self):
        merged = {}
        for coef, exps in self.terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != 4 or min(exps) < 0:
                raise ConfigError(f"monomial exponents must be 4 nonnegative integers, got {exps}")
            coef = float(coef)
            if not np.isfinite(coef):
                raise ConfigError(f"non-finite coefficient {coef!r}")
            merged[exps] = merged.get(exps, 0.0) + coef
        canon = tuple(
            (c, e) for e, c in sorted(merged.items(), key=lambda it: (sum(it[0]), it[0])) if c != 0.0
        )
        object.__setattr__(self, "terms", canon)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_expression(cls, text: str) -> "AmbientPolynomial":
        """
        Parse an expression such as "x4 + 2" or "2*x1^2*x3 - x2 + 2".

        Raises:
            ConfigError: on syntax errors, unknown symbols or non-polynomial input
        """
        if not isinstance(text, str) or not text.strip():
            raise ConfigError("K expression must be a non-empty string")
        cleaned = text.replace("−", "-").replace("×", "*").replace("·", "*")
        try:
            expr = parse_expr(cleaned, local_dict=dict(_LOCALS), transformations=_TRANSFORMS, evaluate=True)
        except Exception as e:  # tokenizer and sympify errors come in several types
            raise ConfigError(f"cannot parse K expression {text!r}: {e}") from e
        K = cls.from_sympy(expr, source=text)
        logger.debug("parsed K = %s (degree %d, %d terms)", K.expression, K.degree, len(K.terms))
        return K

    @classmethod
    def from_sympy(cls, expr, source: Optional[str] = None) -> "AmbientPolynomial":
        expr = sympy.sympify(expr)
        unknown = expr.free_symbols - set(SYMBOLS)
        if unknown:
            names = ", ".join(sorted(str(s) for s in unknown))
            raise ConfigError(f"unknown symbol(s) {names} in K expression {source or expr!s}; use x1..x4")
        try:
            poly = sympy.Poly(sympy.expand(expr), *SYMBOLS)
        except BasePolynomialError as e:
            raise ConfigError(f"K must be a polynomial in x1..x4: {source or expr!s}") from e
        return cls(tuple((float(c), tuple(m)) for m, c in poly.terms()))

    @classmethod
    def constant(cls, value: float) -> "AmbientPolynomial":
        return cls(((float(value), (0, 0, 0, 0)),))

    @classmethod
    def quadratic_form(cls, c: float, lambdas: Sequence[float]) -> "AmbientPolynomial":
        """c + sum_i lambda_i x_i^2, a Morse test function with critical points +-e_i."""
        terms = [(float(c), (0, 0, 0, 0))]
        for i, lam in enumerate(lambdas):
            e = [0, 0, 0, 0]
            e[i] = 2
            terms.append((float(lam), tuple(e)))
        return cls(tuple(terms))

    # ------------------------------------------------------------------
    # Properties
    # ------------------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)

    def to_sympy(self):
        return sympy.Add(*[
            sympy.Float(c) * sympy.Mul(*[s ** a for s, a in zip(SYMBOLS, e)]) for c, e in self.terms
        ]) if self.terms else sympy.Integer(0)

    @property
    def expression(self) -> str:
        """Canonical text form that round-trips through from_expression."""
        if not self.terms:
            return "0"
        parts = []
        for c, e in self.terms:
            factors = [f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(e) if a > 0]
            parts.append("*".join([repr(c)] + factors) if factors else repr(c))
        return " + ".join(parts).replace("+ -", "- ")

    @cached_property
    def _coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    @cached_property
    def _exponents(self) -> np.ndarray:
        return np.array([e for _, e in self.terms], dtype=int).reshape(-1, 4)

    @cached_property
    def _first_derivative_tables(self):
        E, c = self._exponents, self._coefficients
        tables = []
        for i in range(4):
            coef = c * E[:, i]
            exps = E.copy()
            exps[:, i] = np.maximum(exps[:, i] - 1, 0)
            tables.append((coef, exps))
        return tables

    @cached_property
    def _second_derivative_tables(self):
        E, c = self._exponents, self._coefficients
        tables = {}
        for i in range(4):
            for j in range(i, 4):
                if i == j:
                    coef = c * E[:, i] * (E[:, i] - 1)
                else:
                    coef = c * E[:, i] * E[:, j]
                exps = E.copy()
                exps[:, i] = np.maximum(exps[:, i] - 1, 0)
                exps[:, j] = np.maximum(exps[:, j] - 1, 0)
                tables[(i, j)] = (coef, exps)
        return tables

    # ------------------------------------------------------------------
    # Evaluation (vectorised over the leading axes of x)
    # ------------------------------------------------------------------

    @staticmethod
    def _monomials(x: np.ndarray, exps: np.ndarray) -> np.ndarray:
        # x[..., 4], exps[T, 4] -> [..., T]
        return np.prod(x[..., None, :] ** exps, axis=-1)

    def _eval_table(self, x: np.ndarray, coef: np.ndarray, exps: np.ndarray) -> np.ndarray:
        if coef.size == 0:
            return np.zeros(x.shape[:-1])
        return self._monomials(x, exps) @ coef

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(getattr(x, "x", x), dtype=float)
        out = self._eval_table(x, self._coefficients, self._exponents)
        return float(out) if out.ndim == 0 else out

    def __call__(self, x):
        return self.evaluate(x)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(getattr(x, "x", x), dtype=float)
        return np.stack([self._eval_table(x, c, e) for c, e in self._first_derivative_tables], axis=-1)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(getattr(x, "x", x), dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 4))
        for (i, j), (c, e) in self._second_derivative_tables.items():
            val = self._eval_table(x, c, e)
            out[..., i, j] = val
            out[..., j, i] = val
        return out

    def ambient_laplacian(self, x) -> np.ndarray:
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)

    # ------------------------------------------------------------------
    # Transformations
    # ------------------------------------------------------------------

    def rotated(self, R: np.ndarray) -> "AmbientPolynomial":
        """The polynomial of x -> K(R x)."""
        R = np.asarray(R, dtype=float)
        subs = {
            SYMBOLS[i]: sum(sympy.Float(R[i, j]) * SYMBOLS[j] for j in range(4)) for i in range(4)
        }
        rotated = AmbientPolynomial.from_sympy(sympy.expand(self.to_sympy().xreplace(subs)))
        # drop float dust from the expansion
        scale = max(1.0, float(np.max(np.abs(rotated._coefficients), initial=0.0)))
        return AmbientPolynomial(tuple((c, e) for c, e in rotated.terms if abs(c) > 1e-14 * scale))

    def scaled(self, c: float) -> "AmbientPolynomial":
        return AmbientPolynomial(tuple((c * a, e) for a, e in self.terms))

    def mean_over_sphere(self) -> float:
        """Average of K over S^3 from closed-form sphere moments."""
        from .geometry import S3_AREA, sphere_moment
        total = sum(c * sphere_moment(e) for c, e in self.terms)
        return total / S3_AREA

    def is_zonal(self, axis=None, n_samples: int = 64, seed: int = 0, tol: float = 1e-10) -> bool:
        """
        True if K is invariant under rotations fixing `axis` (default e4), checked by sampling.
        """
        from .geometry import as_array, sample_points
        a = np.array([0.0, 0.0, 0.0, 1.0]) if axis is None else as_array(axis)
        pts = sample_points(n_samples, seed)
        # rotate each sample about the axis: keep the axial part, turn the rest
        rng = np.random.default_rng(seed + 1)
        axial = pts @ a
        perp = pts - axial[:, None] * a
        perp_norm = np.linalg.norm(perp, axis=1)
        other = rng.standard_normal((n_samples, 4))
        other -= (other @ a)[:, None] * a
        other /= np.linalg.norm(other, axis=1, keepdims=True)
        moved = axial[:, None] * a + perp_norm[:, None] * other
        vals, moved_vals = self.evaluate(pts), self.evaluate(moved)
        scale = max(1.0, float(np.max(np.abs(vals))))
        return bool(np.max(np.abs(vals - moved_vals)) <= tol * scale)

    def __repr__(self) -> str:
        return f"AmbientPolynomial({self.expression!r})"
