"""
Utility functions for nirenberg-s3.

Contains quadrature rules, report/CSV/spectrum files and plot-data series.
"""

from .quadrature import gauss_legendre, gauss_jacobi_radial, graded_breakpoints, composite_gauss
from .file_utils import write_json, read_json, write_csv, read_csv, save_spectrum, load_spectrum, scan_output_folder
from .series_utils import write_branch_csv, write_branch_series, write_series, read_series

__all__ = [
    "gauss_legendre",
    "gauss_jacobi_radial",
    "graded_breakpoints",
    "composite_gauss",
    "write_json",
    "read_json",
    "write_csv",
    "read_csv",
    "save_spectrum",
    "load_spectrum",
    "scan_output_folder",
    "write_branch_csv",
    "write_branch_series",
    "write_series",
    "read_series",
]
