#!/usr/bin/env python3
"""
Branch tables and plot-data series.

Turns continuation results into the branch CSV and the two-column series
files (log m against log tau, peak distance against tau).
"""

import math
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .file_utils import _fmt, write_csv

BRANCH_COLUMNS = [
    "tau", "peak_height", "tau_m2", "tau_log_m", "t_hat", "t_fit", "t_star", "t_ratio",
    "peak_distance", "remainder_norm", "newton_iters", "residual_norm", "min_value", "L", "concentrating",
]

BRANCH_COMMENTS = [
    "tau: subcriticality parameter; peak_height m = max v on the sphere",
    "tau_m2 = tau * m^2 (height law), tau_log_m = |tau log m| (slow-growth law)",
    "t_hat = m * K(q) from the peak profile; t_fit from the bubble decomposition; t_star = 1/sqrt(tau A)",
    "peak_distance: geodesic distance from the top peak to the expected critical point (radians)",
    "remainder_norm: H^{1/2} norm of v minus the fitted bubbles",
]


def branch_rows(points, target: Optional[Sequence[float]] = None) -> List[list]:
    rows = []
    for p in points:
        top = p.top
        m = top.height if top is not None else float("nan")
        dist = float("nan")
        if top is not None and target is not None:
            dist = float(np.arccos(np.clip(np.dot(top.location, target), -1.0, 1.0)))
        dec = p.decomposition
        t_fit = dec.fit[0].t if dec is not None else float("nan")
        ratio = p.fitted_rate / p.t_star if p.t_star else float("nan")
        rows.append([
            p.tau, m, p.tau * m * m, abs(p.tau * math.log(m)) if m > 0 else float("nan"),
            top.t_hat if top is not None else float("nan"), t_fit,
            p.t_star if p.t_star else float("nan"), ratio, dist,
            dec.remainder_norm if dec is not None else float("nan"),
            p.state.newton_iters, p.state.residual_norm, p.state.min_value, p.state.L,
            bool(top.concentrating) if top is not None else False,
        ])
    return rows


def write_branch_csv(path: str, points, target: Optional[Sequence[float]] = None) -> str:
    return write_csv(path, BRANCH_COLUMNS, branch_rows(points, target), BRANCH_COMMENTS)


def write_series(path: str, xy: Sequence[Tuple[float, float]], header: str = "") -> str:
    """Two whitespace-separated columns, one point per line."""
    with open(path, "w", encoding="utf-8") as f:
        if header:
            f.write(f"# {header}\n")
        for x, y in xy:
            f.write(f"{_fmt(float(x))} {_fmt(float(y))}\n")
    return path


def write_branch_series(out_dir: str, name: str, points, target: Optional[Sequence[float]] = None) -> List[str]:
    rows = branch_rows(points, target)
    logm = [(math.log(r[0]), math.log(r[1])) for r in rows if r[1] > 0]
    paths = [write_series(os.path.join(out_dir, f"series_{name}_logm.dat"), logm, "log tau, log m")]
    if target is not None:
        dist = [(r[0], r[8]) for r in rows]
        paths.append(write_series(os.path.join(out_dir, f"series_{name}_dist.dat"), dist,
                                  "tau, peak distance to target (radians)"))
    return paths


def read_series(path: str) -> np.ndarray:
    return np.loadtxt(path, comments="#", ndmin=2)
