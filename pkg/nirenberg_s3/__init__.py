#!/usr/bin/env python3
"""
nirenberg-s3 - numerics for the prescribed half-curvature problem on S^3.

This package provides:
- Sphere geometry, hyperspherical harmonics and the half-Laplacian
- Bubble spectra, interaction integrals and their asymptotics
- Morse analysis of K and the degree Index(K)
- The reduced finite-dimensional model and its predictions
- A Newton/continuation solver for the subcritical equation
- Pohozaev boundary-flux checks
"""

__version__ = "1.0.0"
__author__ = "nirenberg-s3 developers"

from .core.config import Config, config
from .core.polynomial import AmbientPolynomial
from .core.morse import find_critical_points, index_of_K
from .core.reduced import solve_F_critical, decompose_solution
from .core.solver import newton_solve, axisym_solve, diagnostics
from .core.continuation import BranchTracker, continuation
from .core.pohozaev import hemisphere_flux, flux_limit_check

__all__ = [
    "Config",
    "config",
    "AmbientPolynomial",
    "find_critical_points",
    "index_of_K",
    "solve_F_critical",
    "decompose_solution",
    "newton_solve",
    "axisym_solve",
    "diagnostics",
    "BranchTracker",
    "continuation",
    "hemisphere_flux",
    "flux_limit_check",
]
