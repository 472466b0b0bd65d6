#!/usr/bin/env python3
"""
Run configuration for the command line.

A TOML file with one [section] per command plus [general], [tolerances] and
[rotation]. Every key has a default taken from Config; unknown sections and
keys are rejected with their position in the file.
"""

import re
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.config import config
from ..core.errors import ConfigError
from ..core.geometry import givens_rotation
from ..core.polynomial import AmbientPolynomial

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class GeneralSection:
    K: str = "x4 + 2"
    L: int = config.DEFAULT_L
    L_zonal: int = config.DEFAULT_L_ZONAL
    zonal: bool = False
    seed: int = config.DEFAULT_SEED
    out: str = config.DEFAULT_OUTPUT_DIR


@dataclass(frozen=True)
class ToleranceSection:
    tol_grad: float = config.TOL_GRAD
    tol_lap: float = config.TOL_LAP
    tol_mu: float = config.TOL_MU
    newton_rtol: float = config.NEWTON_RTOL


@dataclass(frozen=True)
class RotationSection:
    planes: Tuple[Tuple[int, int, float], ...] = ()


@dataclass(frozen=True)
class AnalyzeSection:
    n_starts: int = config.DEFAULT_N_STARTS


@dataclass(frozen=True)
class ValidateSection:
    taus: Tuple[float, ...] = config.DEFAULT_TAUS
    distance: float = float(np.pi / 2.0)
    identities: Tuple[str, ...] = ()
    spectral: bool = True
    spectral_L: int = 32
    spectral_samples: int = 20
    pohozaev: bool = True
    pohozaev_Ms: Tuple[float, ...] = (0.0, 1.0, -3.0)
    pohozaev_deltas: Tuple[float, ...] = config.DEFAULT_POHOZAEV_DELTAS


@dataclass(frozen=True)
class SolveSection:
    tau: float = 0.2
    seed_kind: str = "constant"
    max_iter: int = config.NEWTON_MAX_ITER


@dataclass(frozen=True)
class ContinueSection:
    tau_start: float = config.TAU_START
    tau_end: float = config.TAU_END
    steps: int = config.TAU_STEPS
    branches: Tuple[str, ...] = ("constant", "bubble")
    decompose: bool = True


@dataclass(frozen=True)
class PredictSection:
    taus: Tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    c_mu: Tuple[float, ...] = (1.0, 0.25)
    restarts: int = config.F_RESTARTS
    max_points: int = 3


@dataclass(frozen=True)
class ReportSection:
    n_richardson: int = 4


SECTIONS = {
    "general": GeneralSection, "tolerances": ToleranceSection, "rotation": RotationSection,
    "analyze": AnalyzeSection, "validate": ValidateSection, "solve": SolveSection,
    "continue": ContinueSection, "predict": PredictSection, "report": ReportSection,
}


def _attr(section: str) -> str:
    return "continue_" if section == "continue" else section


@dataclass(frozen=True)
class RunConfig:
    general: GeneralSection = field(default_factory=GeneralSection)
    tolerances: ToleranceSection = field(default_factory=ToleranceSection)
    rotation: RotationSection = field(default_factory=RotationSection)
    analyze: AnalyzeSection = field(default_factory=AnalyzeSection)
    validate: ValidateSection = field(default_factory=ValidateSection)
    solve: SolveSection = field(default_factory=SolveSection)
    continue_: ContinueSection = field(default_factory=ContinueSection)
    predict: PredictSection = field(default_factory=PredictSection)
    report: ReportSection = field(default_factory=ReportSection)

    @property
    def out(self) -> str:
        return self.general.out

    @property
    def seed(self) -> int:
        return self.general.seed

    @property
    def layout(self) -> str:
        return "zonal" if self.general.zonal else "full"

    @property
    def resolution(self) -> int:
        return self.general.L_zonal if self.general.zonal else self.general.L

    def rotation_matrix(self) -> np.ndarray:
        R = np.eye(4)
        for i, j, angle in self.rotation.planes:
            R = givens_rotation(int(i), int(j), float(angle)) @ R
        return R

    def polynomial(self) -> AmbientPolynomial:
        """K parsed from the expression, with the configured rotation applied."""
        K = AmbientPolynomial.from_expression(self.general.K)
        if self.rotation.planes:
            K = K.rotated(self.rotation_matrix())
        return K

    def with_overrides(self, seed: Optional[int] = None, L: Optional[int] = None,
                       zonal: Optional[bool] = None, out: Optional[str] = None) -> "RunConfig":
        """Command-line flags win over the file."""
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if zonal:
            changes["zonal"] = True
        if L is not None:
            changes["L_zonal" if (zonal or self.general.zonal) else "L"] = int(L)
        if out is not None:
            changes["out"] = out
        return replace(self, general=replace(self.general, **changes)) if changes else self


# ============================================================================
# Parsing
# ============================================================================

_POS = re.compile(r"line (\d+), column (\d+)")


def _locate(text: str, section: Optional[str], key: Optional[str]) -> Tuple[int, int]:
    """1-based (line, column) of a key inside a section, or of the section header."""
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        head = re.match(r"\[\s*([^\]]+?)\s*\]", line)
        if head:
            current = head.group(1)
            if key is None and current == section:
                return n, raw.index("[") + 1
            continue
        if key is not None and current == section:
            m = re.match(r"\s*(" + re.escape(key) + r")\s*=", raw)
            if m:
                return n, m.start(1) + 1
    return 1, 1


def _coerce(section: str, name: str, value: Any, default: Any, text: str):
    def bad(what):
        line, col = _locate(text, section, name)
        return ConfigError(f"[{section}] {name}: {what}", line, col)

    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise bad(f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad(f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad(f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise bad(f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise bad(f"expected a list, got {value!r}")
        if name == "planes":
            if not all(isinstance(p, list) and len(p) == 3 for p in value):
                raise bad("planes are [i, j, angle] triples")
            return tuple((int(i), int(j), float(a)) for i, j, a in value)
        return tuple(value)
    return value


def parse_run_config(text: str) -> RunConfig:
    """
    Parse TOML text into a RunConfig.

    Raises:
        ConfigError: syntax error, unknown section or key, or a wrongly typed value
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None)
        col = getattr(e, "colno", None)
        if line is None:
            m = _POS.search(str(e))
            line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ConfigError(f"invalid config: {getattr(e, 'msg', e)}", line, col) from e

    sections: Dict[str, Any] = {}
    for name, body in data.items():
        cls = SECTIONS.get(name)
        if cls is None or not isinstance(body, dict):
            line, col = _locate(text, name, None)
            raise ConfigError(f"unknown section [{name}]", line, col)
        known = {f.name: f for f in fields(cls)}
        defaults = cls()
        values = {}
        for key, value in body.items():
            if key not in known:
                line, col = _locate(text, name, key)
                raise ConfigError(f"unknown key {key!r} in [{name}]", line, col)
            values[key] = _coerce(name, key, value, getattr(defaults, key), text)
        sections[_attr(name)] = cls(**values)
    cfg = RunConfig(**sections)
    try:
        cfg.polynomial()
    except ConfigError as e:
        if e.line is not None:
            raise
        line, col = _locate(text, "general", "K")
        raise ConfigError(str(e), line, col) from e
    return cfg


def load_run_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_run_config(text)


def default_config_text() -> str:
    """Every section and key with its default value, as TOML."""
    cfg = RunConfig()
    lines: List[str] = []
    for name in SECTIONS:
        lines.append(f"[{name}]")
        sec = getattr(cfg, _attr(name))
        for f in fields(sec):
            lines.append(f"{f.name} = {_toml_value(getattr(sec, f.name))}")
        lines.append("")
    return "\n".join(lines)


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def section_names() -> Sequence[str]:
    return tuple(SECTIONS)
