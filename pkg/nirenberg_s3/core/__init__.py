"""
Core module for nirenberg-s3.

Contains the geometry, spectral, bubble, Morse, reduced-model, solver and
Pohozaev modules.
"""

from .config import Config
from .errors import NirenbergError
from .geometry import SpherePoint, QuadratureGrid, build_grid
from .polynomial import AmbientPolynomial
from .spectral import HarmonicSpectrum, apply_P_sigma
from .bubbles import BubbleParams, bubble_spectrum, interaction_integral
from .morse import CriticalPointRecord, find_critical_points, index_of_K
from .reduced import BlowupPrediction, solve_F_critical, decompose_solution
from .solver import SolverState, newton_solve, axisym_solve, diagnostics
from .continuation import BranchTracker, continuation
from .pohozaev import HalfBallProfile, hemisphere_flux, flux_limit_check

__all__ = [
    "Config",
    "NirenbergError",
    "SpherePoint",
    "QuadratureGrid",
    "build_grid",
    "AmbientPolynomial",
    "HarmonicSpectrum",
    "apply_P_sigma",
    "BubbleParams",
    "bubble_spectrum",
    "interaction_integral",
    "CriticalPointRecord",
    "find_critical_points",
    "index_of_K",
    "BlowupPrediction",
    "solve_F_critical",
    "decompose_solution",
    "SolverState",
    "newton_solve",
    "axisym_solve",
    "diagnostics",
    "BranchTracker",
    "continuation",
    "HalfBallProfile",
    "hemisphere_flux",
    "flux_limit_check",
]
