#!/usr/bin/env python3
"""
File management utilities for nirenberg-s3.

Contains helpers for the output folder, JSON reports, commented CSV tables and
spectrum files.
"""

import glob
import json
import logging
import os
from dataclasses import asdict, is_dataclass
from typing import Dict, List, Sequence

import numpy as np

from ..core.errors import ConfigError
from ..core.spectral import BASIS_ID, HarmonicSpectrum, block_offset

logger = logging.getLogger(__name__)


def _to_jsonable(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if is_dataclass(obj):
        return asdict(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path: str, payload) -> str:
    """
    Write a report as JSON with sorted keys.

    Args:
        path: target file
        payload: dict (or object with to_dict) of plain and numpy values

    Returns:
        the path written
    """
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_to_jsonable)
        f.write("\n")
    logger.info("wrote %s", path)
    return path


def read_json(path: str) -> Dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, columns: Sequence[str], rows: Sequence[Sequence], comments: Sequence[str] = ()) -> str:
    """
    Write a table with leading '#' comment lines, then a header and the rows.

    Floats are written with %.17g so that the file reproduces bit-exactly.
    """
    with open(path, "w", encoding="utf-8") as f:
        for line in comments:
            f.write(f"# {line}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")
    logger.info("wrote %s (%d rows)", path, len(rows))
    return path


def read_csv(path: str) -> List[Dict[str, str]]:
    """Rows of a commented CSV as dicts of strings."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if not ln.startswith("#") and ln.strip()]
    if not lines:
        return []
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


SPECTRUM_FORMAT_VERSION = 1


def _intra_degree_index(spectrum: HarmonicSpectrum) -> np.ndarray:
    ls = spectrum.degrees()
    if spectrum.layout == "zonal":
        return np.zeros_like(ls)
    return np.arange(ls.size) - np.array([block_offset(int(l)) for l in ls])


def save_spectrum(path: str, spectrum: HarmonicSpectrum) -> str:
    """
    Save a spectrum with a versioned header naming the basis convention.

    A path ending in .npz is written as flat binary arrays; anything else as
    a text table of (l, intra-degree index, coefficient).
    """
    if path.endswith(".npz"):
        np.savez(path, basis=BASIS_ID, version=SPECTRUM_FORMAT_VERSION, L=spectrum.L,
                 layout=spectrum.layout, coeffs=spectrum.coeffs)
        return path
    ls, idx = spectrum.degrees(), _intra_degree_index(spectrum)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# version {SPECTRUM_FORMAT_VERSION}\n# basis {BASIS_ID}\n"
                f"# L {spectrum.L}\n# layout {spectrum.layout}\n")
        for l, i, c in zip(ls, idx, spectrum.coeffs):
            f.write("%d %d %.17g\n" % (l, i, c))
    return path


def load_spectrum(path: str) -> HarmonicSpectrum:
    """
    Raises:
        ConfigError: basis convention or format version differs from this build's
    """
    if path.endswith(".npz"):
        with np.load(path) as data:
            meta = {"basis": str(data["basis"]), "version": str(int(data["version"])),
                    "L": str(int(data["L"])), "layout": str(data["layout"])}
            values = np.array(data["coeffs"], dtype=float)
    else:
        meta, rows = {}, []
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition(" ")
                    meta[key] = val
                elif line.strip():
                    rows.append(line.split())
        values = np.array([float(r[-1]) for r in rows])
    if meta.get("basis") != BASIS_ID:
        raise ConfigError(f"{path}: basis {meta.get('basis')!r} is not {BASIS_ID}")
    if meta.get("version", str(SPECTRUM_FORMAT_VERSION)) != str(SPECTRUM_FORMAT_VERSION):
        raise ConfigError(f"{path}: spectrum format version {meta['version']} is not {SPECTRUM_FORMAT_VERSION}")
    return HarmonicSpectrum(int(meta["L"]), values, meta.get("layout", "full"))


def scan_output_folder(folder_path: str) -> Dict[str, Dict]:
    """
    Scan an output folder for branch tables and the predictions file.

    Returns:
        Dict[branch name, info] with info holding path, status and series paths
    """
    found: Dict[str, Dict] = {}
    if not os.path.isdir(folder_path):
        logger.warning("output folder does not exist: %s", folder_path)
        return found
    for path in sorted(glob.glob(os.path.join(folder_path, "branch_*.csv"))):
        name = os.path.splitext(os.path.basename(path))[0][len("branch_"):]
        series = os.path.join(folder_path, f"series_{name}_logm.dat")
        found[name] = {
            "path": path,
            "status": "completed",
            "series_path": series if os.path.exists(series) else None,
        }
    logger.info("found %d branch tables in %s", len(found), folder_path)
    return found
