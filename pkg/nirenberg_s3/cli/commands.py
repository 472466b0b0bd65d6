#!/usr/bin/env python3
"""
Command implementations behind main.py.

Each cmd_* function takes a RunConfig, writes its files into the output
directory and returns (exit_code, message). Library errors propagate; main.py
maps them onto exit codes with exit_code_for.
"""

import logging
import math
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.bubbles import IDENTITIES, default_sweeps, spectral_identity_suite, validate_asymptotics
from ..core.config import Config
from ..core.continuation import (
    BranchTracker, cauchy_spread, nearest_candidate, richardson_limit, summarize_branch, tau_schedule,
)
from ..core.errors import (
    ConfigError, DegenerateKError, DomainError, IntegrationError, NirenbergError, PreconditionError,
    ResolutionError, ResourceBudgetError,
)
from ..core.morse import (
    PointClass, build_matrix_M, find_critical_points, index_of_K,
)
from ..core.pohozaev import linearity_check
from ..core.reduced import (
    axis_bubble, reduced_model_height_constant, single_point_constant, solve_F_critical,
)
from ..core.solver import (
    SolverOptions, axisym_solve, bubble_seed, constant_seed, diagnostics, energy, newton_solve,
)
from ..utils.file_utils import read_csv, read_json, save_spectrum, scan_output_folder, write_csv, write_json
from ..utils.series_utils import write_branch_csv, write_branch_series
from .run_config import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DEGENERATE = 2
EXIT_INCONCLUSIVE = 3
EXIT_SOLVER = 4

# Identities whose failure fails the validate command
HARD_IDENTITIES = ("cross-square", "bubble-norm", "rate-tangent-norm")

SPECTRAL_LIMITS = {"p_sigma_one_error": 1e-12, "bubble_equation_max_rel_error": 1e-6, "norm_max_rel_error": 1e-5}
POHOZAEV_REL_TOL = 1e-2


def exit_code_for(err: BaseException, command: str) -> int:
    """Exit code of a library error raised while running `command`."""
    if isinstance(err, (ConfigError, DomainError, PreconditionError, ResourceBudgetError)):
        return EXIT_CONFIG
    if isinstance(err, DegenerateKError):
        return EXIT_DEGENERATE
    if isinstance(err, ResolutionError):
        return EXIT_INCONCLUSIVE if command == "validate" else EXIT_SOLVER
    if isinstance(err, IntegrationError):
        return EXIT_INCONCLUSIVE
    if isinstance(err, NirenbergError):
        return EXIT_SOLVER
    return EXIT_CONFIG


def _prepare(cfg: RunConfig):
    return Config.ensure_output_dir(cfg.out), cfg.polynomial()


def _options(cfg: RunConfig, max_iter: Optional[int] = None) -> SolverOptions:
    if max_iter is None:
        return SolverOptions(rtol=cfg.tolerances.newton_rtol)
    return SolverOptions(rtol=cfg.tolerances.newton_rtol, max_iter=max_iter)


def _critical_points(cfg: RunConfig, K, n_starts: Optional[int] = None):
    if K.degree == 0:
        return []
    return find_critical_points(K, n_starts, cfg.seed, tol_grad=cfg.tolerances.tol_grad,
                                tol_lap=cfg.tolerances.tol_lap)


def _blowup_candidates(cfg: RunConfig, records) -> list:
    """Morse points of K^-, restricted to the e4 axis for zonal runs."""
    kminus = [r for r in records if r.point_class is PointClass.K_MINUS and r.is_morse]
    if cfg.general.zonal:
        kminus = [r for r in kminus if abs(abs(r.location[3]) - 1.0) < 1e-8]
    return kminus


# ============================================================================
# analyze
# ============================================================================

CRITICAL_POINT_COLUMNS = ["x1", "x2", "x3", "x4", "grad_norm", "hess1", "hess2", "hess3",
                          "morse_index", "laplacian", "k_value", "class", "degenerate"]
CRITICAL_POINT_COMMENTS = [
    "x1..x4: ambient coordinates of the critical point q on S^3 (unit vector)",
    "hess1..hess3: eigenvalues of the intrinsic Hessian of K at q (round metric)",
    "morse_index: number of negative Hessian eigenvalues; laplacian: Laplace-Beltrami of K at q",
    "class: K_MINUS (laplacian < 0), K_PLUS (laplacian > 0) or DEGENERATE (|laplacian| <= tol_lap)",
]


def _write_critical_points(out: str, records) -> str:
    rows = [list(r.location) + [r.grad_norm] + list(r.hessian_eigs) +
            [r.morse_index, r.laplacian, r.k_value, r.point_class.value, r.degenerate_hessian] for r in records]
    return write_csv(os.path.join(out, "critical_points.csv"), CRITICAL_POINT_COLUMNS, rows, CRITICAL_POINT_COMMENTS)


def cmd_analyze(cfg: RunConfig) -> Tuple[int, str]:
    """Critical points, interaction matrices, mu values and Index(K)."""
    out, K = _prepare(cfg)
    records = _critical_points(cfg, K, cfg.analyze.n_starts)
    _write_critical_points(out, records)
    base = {"K": K.expression, "rotation": [list(p) for p in cfg.rotation.planes], "seed": cfg.seed}
    try:
        report = index_of_K(K, records, seed=cfg.seed, tol_mu=cfg.tolerances.tol_mu)
    except DegenerateKError as e:
        write_json(os.path.join(out, "degree_report.json"), {
            **base, "degenerate": True, "message": str(e),
            "critical_points": [r.to_dict() for r in (e.records or records)],
        })
        return EXIT_DEGENERATE, f"⚠️ K is not a Morse function: {e}"

    payload = {**base, "degenerate": False, **report.to_dict()}
    payload["M"] = build_matrix_M(report.K_minus).to_dict() if report.K_minus else None
    write_json(os.path.join(out, "degree_report.json"), payload)
    return EXIT_OK, (f"✅ Index(K) = {report.index}, in_A = {report.in_A}, "
                     f"{len(records)} critical points ({len(report.K_minus)} in K^-)")


# ============================================================================
# validate
# ============================================================================

ASYMPTOTICS_COLUMNS = ["identity", "tau", "t1", "t2", "distance", "numeric", "prediction", "ratio",
                       "remainder", "geodesic_variant", "status"]
ASYMPTOTICS_COMMENTS = [
    "tau: subcriticality; t1 = t2 = tau^(-1/2); distance: geodesic distance of the two centres (radians)",
    "numeric: quadrature value; prediction: leading-order asymptotic; ratio = numeric / prediction",
    "remainder = numeric - prediction; geodesic_variant: second moments with the geodesic distance",
]
POHOZAEV_COLUMNS = ["M", "alpha", "delta", "Bpp", "closed_form", "rel_error"]
POHOZAEV_COMMENTS = [
    "Bpp: curved hemisphere flux at radius delta; delta = 0 rows are polynomial extrapolations",
    "closed_form = -((n - 2 sigma)^2 / 4) M |S^2| B(n/2, 1 - sigma) = -2 pi^2 M",
]


def cmd_validate(cfg: RunConfig) -> Tuple[int, str]:
    """Spectral identities, interaction asymptotics and the Pohozaev flux limit."""
    out, _ = _prepare(cfg)
    v = cfg.validate
    summary: Dict[str, object] = {"seed": cfg.seed}
    failed: List[str] = []
    inconclusive: List[str] = []

    if v.spectral:
        suite = spectral_identity_suite(v.spectral_L, v.spectral_samples, cfg.seed)
        ok = all(suite[k] <= lim for k, lim in SPECTRAL_LIMITS.items())
        suite["status"] = "pass" if ok else "fail"
        summary["spectral"] = suite
        if not ok:
            failed.append("spectral")

    ids = list(v.identities) or list(IDENTITIES)
    report = validate_asymptotics(default_sweeps(v.taus, v.distance, ids))
    write_csv(os.path.join(out, "asymptotics.csv"), ASYMPTOTICS_COLUMNS,
              [[row[c] for c in ASYMPTOTICS_COLUMNS] for row in report.to_rows()], ASYMPTOTICS_COMMENTS)
    summary["identities"] = report.summary
    for name, status in report.statuses.items():
        if status == "inconclusive":
            inconclusive.append(name)
        elif status != "pass" and name in HARD_IDENTITIES:
            failed.append(name)

    if v.pohozaev:
        try:
            lin = linearity_check(v.pohozaev_Ms, None, v.pohozaev_deltas)
        except IntegrationError as e:
            logger.warning("Pohozaev sweep inconclusive: %s", e)
            inconclusive.append("pohozaev")
            summary["pohozaev"] = {"status": "inconclusive", "message": str(e)}
        else:
            rows = [r for rep in lin["reports"] for r in rep.rows]
            write_csv(os.path.join(out, "pohozaev.csv"), POHOZAEV_COLUMNS,
                      [[r[c] for c in POHOZAEV_COLUMNS] for r in rows], POHOZAEV_COMMENTS)
            limits_ok = all(rep.rel_error <= POHOZAEV_REL_TOL for rep in lin["reports"])
            ok = limits_ok and lin["linear"]
            summary["pohozaev"] = {
                "limits": {repr(rep.M): rep.to_dict() for rep in lin["reports"]},
                "slope": lin["slope"], "intercept": lin["intercept"], "linearity_residual": lin["residual"],
                "status": "pass" if ok else "fail",
            }
            if not ok:
                failed.append("pohozaev")

    summary["failed"] = failed
    summary["inconclusive"] = inconclusive
    summary["passed"] = not failed and not inconclusive
    write_json(os.path.join(out, "validation_summary.json"), summary)
    if failed:
        return EXIT_INCONCLUSIVE, f"❌ validation failed: {', '.join(failed)}"
    if inconclusive:
        return EXIT_INCONCLUSIVE, f"⚠️ validation inconclusive: {', '.join(inconclusive)}"
    return EXIT_OK, "✅ all hard identities pass"


# ============================================================================
# solve
# ============================================================================

def _bubble_seed_for(cfg: RunConfig, K, rec, tau: float, L: int):
    pred = solve_F_critical([rec], tau=tau, restarts=min(cfg.predict.restarts, 8), seed=cfg.seed)
    bubbles = pred.bubbles()
    if cfg.general.zonal:
        bubbles = [axis_bubble(b) for b in bubbles]
    return pred, bubbles, bubble_seed(bubbles, L, cfg.layout)


def cmd_solve(cfg: RunConfig) -> Tuple[int, str]:
    """One Newton solve at the configured tau."""
    out, K = _prepare(cfg)
    tau, L = cfg.solve.tau, cfg.resolution
    if cfg.solve.seed_kind == "constant":
        v0 = constant_seed(K, tau, L, cfg.layout)
    elif cfg.solve.seed_kind == "bubble":
        kminus = _blowup_candidates(cfg, _critical_points(cfg, K))
        if not kminus:
            raise PreconditionError("bubble seed needs a critical point in K^-")
        rec = max(kminus, key=lambda r: r.k_value)
        _, _, v0 = _bubble_seed_for(cfg, K, rec, tau, L)
    else:
        raise ConfigError(f"[solve] seed_kind must be 'constant' or 'bubble', got {cfg.solve.seed_kind!r}")

    opts = _options(cfg, cfg.solve.max_iter)
    state = axisym_solve(K, tau, v0, opts) if cfg.general.zonal else newton_solve(v0, tau, K, opts)
    diag = diagnostics(state, K)
    write_json(os.path.join(out, "solve_state.json"), {
        "K": K.expression, "state": state.to_dict(), "diagnostics": diag.to_dict(),
        "energy": energy(state.v, tau, K),
    })
    save_spectrum(os.path.join(out, "solution_spectrum.txt"), state.v)
    if not state.converged:
        return EXIT_SOLVER, f"❌ Newton did not converge at tau={tau:g} (|R| = {state.residual_norm:.3e})"
    top = diag.peaks[0]
    return EXIT_OK, (f"✅ converged at tau={tau:g} in {state.newton_iters} steps; "
                     f"max v = {top.height:.6g}, concentrating = {top.concentrating}")


# ============================================================================
# continue / report
# ============================================================================

def _candidates(entries: Sequence[Tuple[str, float, float]]) -> Dict[str, float]:
    """Theoretical limits of tau m^2: (label, single-point constant, reduced-model constant) per point."""
    out: Dict[str, float] = {}
    for label, single, reduced in entries:
        out[f"single_point{label}"] = float(single)
        out[f"reduced_model{label}"] = float(reduced)
    return out


def _arbitrate(taus: Sequence[float], tm2: Sequence[float], candidates: Dict[str, float],
               n_last: int = 4) -> Dict[str, object]:
    pts = [(t, y) for t, y in zip(taus, tm2) if np.isfinite(y)]
    if len(pts) < 2 or not candidates:
        return {"tau_m2_extrapolated": None, "candidates": candidates}
    t, y = zip(*sorted(pts, reverse=True))
    limit = richardson_limit(t, y, n_last)
    name, dist = nearest_candidate(limit, candidates)
    return {"tau_m2_extrapolated": limit, "tau_m2_cauchy_spread": cauchy_spread(y),
            "candidates": candidates, "nearest": name, "relative_distance": dist}


def cmd_continue(cfg: RunConfig) -> Tuple[int, str]:
    """Continuation of the constant and bubble-seeded branches in tau."""
    out, K = _prepare(cfg)
    c = cfg.continue_
    L = cfg.resolution
    records = _critical_points(cfg, K)
    kminus = _blowup_candidates(cfg, records)
    taus = tau_schedule(c.tau_start, c.tau_end, c.steps)
    tracker = BranchTracker(K, _options(cfg), critical_points=records or None, decompose=c.decompose)

    targets: Dict[str, Optional[np.ndarray]] = {}
    if "constant" in c.branches:
        tracker.add_branch("constant", constant_seed(K, float(taus[0]), L, cfg.layout))
        targets["constant"] = kminus[0].location if kminus else None
    if "bubble" in c.branches:
        for j, rec in enumerate(kminus):
            name = "bubble" if len(kminus) == 1 else f"bubble{j}"
            pred, bubbles, seed = _bubble_seed_for(cfg, K, rec, float(taus[0]), L)
            t0, tau0 = float(pred.t_star[0]), float(taus[0])
            # one point: t* scales exactly like tau^(-1/2)
            tracker.add_branch(name, seed, "bubble", expected_k=1, init_bubbles=bubbles,
                               t_star_fn=lambda tau, t0=t0, tau0=tau0: t0 * math.sqrt(tau0 / tau))
            targets[name] = rec.location

    results = tracker.run_all(taus)
    candidates = _candidates([(f"@{j}" if len(kminus) > 1 else "", single_point_constant([r.k_value], [r.laplacian])[0],
                               reduced_model_height_constant([r.k_value], [r.laplacian])[0])
                              for j, r in enumerate(kminus)])
    report: Dict[str, object] = {"K": K.expression, "L": L, "layout": cfg.layout, "branches": {}}
    for name, branch in tracker.branches.items():
        msg, _ = results[name]
        target = targets.get(name)
        write_branch_csv(os.path.join(out, f"branch_{name}.csv"), branch.points, target)
        write_branch_series(out, name, branch.points, target)
        entry: Dict[str, object] = {
            "status": branch.status, "message": msg, "largest_trustworthy_tau": branch.largest_trustworthy_tau,
            "summary": summarize_branch(branch.points, target),
        }
        if branch.points:
            last = branch.points[-1]
            entry["measured"] = {
                "tau": last.tau, "t_hat": [p.t_hat for p in last.diagnostics.peaks],
                "tau_m2": [p.tau_m2 for p in last.diagnostics.peaks],
                "lambda_hat": last.diagnostics.lambda_hat.tolist(),
                "peak_locations": [p.location.tolist() for p in last.diagnostics.peaks],
            }
            if branch.kind == "bubble" and target is not None:
                rec = next(r for r in kminus if r.location is target)
                entry["predicted"] = {
                    repr(cm): solve_F_critical([rec], tau=last.tau, c_mu=cm, restarts=min(cfg.predict.restarts, 8),
                                               seed=cfg.seed).to_dict()
                    for cm in cfg.predict.c_mu
                }
            conc = [p for p in branch.points if p.top is not None and p.top.concentrating]
            entry["arbitration"] = _arbitrate([p.tau for p in conc], [p.top.tau_m2 for p in conc], candidates,
                                              cfg.report.n_richardson)
        report["branches"][name] = entry
        logger.info("branch %s: %s", name, msg)
    write_json(os.path.join(out, "comparison_report.json"), report)

    if tracker.branches and all(b.status == "failed" or not b.points for b in tracker.branches.values()):
        return EXIT_SOLVER, "❌ all branches failed"
    lines = [results[n][0] for n in tracker.branches]
    return EXIT_OK, "\n".join(lines)


def cmd_predict(cfg: RunConfig) -> Tuple[int, str]:
    """Reduced-model predictions for every feasible configuration in K^-."""
    out, K = _prepare(cfg)
    records = _critical_points(cfg, K)
    degree = index_of_K(K, records, seed=cfg.seed, tol_mu=cfg.tolerances.tol_mu)
    entries = []
    for sub in degree.subsets:
        if sub.contribution == 0 or sub.k > cfg.predict.max_points:
            continue
        pts = [degree.K_minus[i] for i in sub.members]
        for tau in cfg.predict.taus:
            for cm in cfg.predict.c_mu:
                pred = solve_F_critical(pts, tau=tau, c_mu=cm, restarts=cfg.predict.restarts, seed=cfg.seed)
                entries.append({"members": list(sub.members), **pred.to_dict()})
    write_json(os.path.join(out, "predictions.json"), {"K": K.expression, "index": degree.index,
                                                       "predictions": entries})
    if not entries:
        return EXIT_SOLVER, "⚠️ no configuration with mu(M) > 0"
    return EXIT_OK, f"✅ {len(entries)} predictions written"


def cmd_report(cfg: RunConfig) -> Tuple[int, str]:
    """Compare branch tables in the output folder with predictions.json."""
    out = cfg.out
    path = os.path.join(out, "predictions.json")
    if not os.path.exists(path):
        raise ConfigError(f"{path} not found; run the predict command first")
    preds = read_json(path)
    singles = {}
    for e in preds.get("predictions", []):
        if e["k"] == 1:
            singles.setdefault(e["members"][0], (e["point_constant"][0], e["reduced_constant"][0]))
    many = len(singles) > 1
    candidates = _candidates([(f"@{m}" if many else "", s, r) for m, (s, r) in sorted(singles.items())])

    branches = scan_output_folder(out)
    if not branches:
        raise ConfigError(f"no branch_*.csv tables in {out}; run the continue command first")
    report: Dict[str, object] = {"K": preds.get("K"), "branches": {}}
    for name, info in branches.items():
        rows = read_csv(info["path"])
        conc = [r for r in rows if r["concentrating"] == "true"]
        taus = [float(r["tau"]) for r in conc]
        tm2 = [float(r["tau_m2"]) for r in conc]
        report["branches"][name] = {
            "n_rows": len(rows), "n_concentrating": len(conc),
            "arbitration": _arbitrate(taus, tm2, candidates, cfg.report.n_richardson),
        }
    write_json(os.path.join(out, "comparison_report.json"), report)
    return EXIT_OK, f"✅ compared {len(branches)} branches against {len(candidates)} candidates"


COMMANDS = {
    "analyze": cmd_analyze,
    "validate": cmd_validate,
    "solve": cmd_solve,
    "continue": cmd_continue,
    "predict": cmd_predict,
    "report": cmd_report,
}


def run_command(name: str, cfg: RunConfig) -> Tuple[int, str]:
    """Run one command, turning library errors into (exit code, message)."""
    func = COMMANDS.get(name)
    if func is None:
        return EXIT_CONFIG, f"❌ unknown command {name}"
    try:
        return func(cfg)
    except NirenbergError as e:
        code = exit_code_for(e, name)
        logger.debug("%s failed", name, exc_info=True)
        return code, f"❌ {type(e).__name__}: {e}"
