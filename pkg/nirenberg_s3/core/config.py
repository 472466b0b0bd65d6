#!/usr/bin/env python3
"""
Configuration module for nirenberg-s3.

Contains default tolerances, resolutions and solver settings.
"""

import os
from typing import Tuple
from dataclasses import dataclass


@dataclass
class Config:
    """Default settings shared by every module."""

    # Sphere geometry / quadrature
    MAX_GRID_NODES: int = 4_000_000
    DEFAULT_L: int = 32
    DEFAULT_L_ZONAL: int = 512

    # Morse analysis tolerances (relative where noted)
    TOL_GRAD: float = 1e-10
    TOL_LAP: float = 1e-8
    TOL_MU: float = 1e-8          # relative to ||M||_2
    TOL_HESS_REL: float = 1e-8    # relative to the sampled C^2 norm of K
    DEFAULT_N_STARTS: int = 64
    DEFAULT_SEED: int = 0
    MERGE_DISTANCE: float = 1e-6
    NEWTON_STEP_CAP: float = 0.5
    CRITICAL_NEWTON_MAX_ITER: int = 100
    MAX_SUBSET_POINTS: int = 20
    POSITIVITY_SAMPLES: int = 4096

    # Reduced model
    STAU_A: float = 10.0
    ALPHA_EPS0: float = 0.5
    F_RESTARTS: int = 100
    F_MAX_ITER: int = 200
    DECOMPOSE_MAX_ITER: int = 50
    GRAM_MAX_CONDITION: float = 1e12

    # Newton / continuation
    NEWTON_RTOL: float = 1e-9
    NEWTON_MAX_ITER: int = 50
    ARMIJO_C: float = 1e-4
    MIN_LINE_STEP: float = 1e-4
    DENSE_MAX_MODES: int = 1200
    DENSE_MAX_ZONAL: int = 4097
    GMRES_RTOL: float = 1e-12
    DEALIAS_FACTOR: int = 3
    SINGULAR_PIVOT_TOL: float = 1e-13
    TAU_START: float = 0.5
    TAU_END: float = 0.005
    TAU_STEPS: int = 40
    MAX_BISECTIONS: int = 6
    RESOLUTION_DIVISOR: float = 4.0   # trust t <= L / 4
    CONCENTRATION_RATIO: float = 1.5
    FLAT_TOLERANCE: float = 1e-9

    # Bubble quadrature
    PANEL_NODES: int = 16
    PANEL_MAX_NODES: int = 64
    QUAD_RTOL: float = 1e-10
    IDENTITY_DEALIAS: int = 5
    GAMMA_MEASURE_L: int = 400

    # Pohozaev fluxes
    POHOZAEV_RTOL: float = 1e-9
    POHOZAEV_START_ORDER: int = 8
    POHOZAEV_MAX_ORDER: int = 64

    # Validation sweeps
    DEFAULT_TAUS: Tuple[float, ...] = (0.04, 0.01, 0.0025)
    DEFAULT_POHOZAEV_DELTAS: Tuple[float, ...] = (1e-2, 1e-3, 1e-4)

    # Output configuration
    DEFAULT_OUTPUT_DIR: str = "./outputs"

    @classmethod
    def ensure_output_dir(cls, output_dir: str = None) -> str:
        """Ensure output directory exists and return the path."""
        dir_path = output_dir or cls.DEFAULT_OUTPUT_DIR
        os.makedirs(dir_path, exist_ok=True)
        return dir_path

    @classmethod
    def hessian_tolerance(cls, c2_norm: float, rel: float = None) -> float:
        """Absolute Hessian-eigenvalue tolerance for a K of the given sampled C^2 norm."""
        rel = cls.TOL_HESS_REL if rel is None else rel
        return rel * max(c2_norm, 1.0)


# Global configuration instance
config = Config()
