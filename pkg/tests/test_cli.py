"""
Tests for the run configuration, the output files and the commands.
"""

import math
import os

import numpy as np
import pytest

import main as entry
from nirenberg_s3.cli.commands import (
    EXIT_CONFIG, EXIT_DEGENERATE, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_SOLVER, exit_code_for, run_command,
)
from nirenberg_s3.cli.run_config import (
    RunConfig, default_config_text, load_run_config, parse_run_config, section_names,
)
from nirenberg_s3.core.errors import (
    ConfigError, DegenerateKError, DomainError, IntegrationError, NumericError, ResolutionError,
)
from nirenberg_s3.core.spectral import BASIS_ID, HarmonicSpectrum
from nirenberg_s3.utils.file_utils import (
    load_spectrum, read_csv, read_json, save_spectrum, scan_output_folder, write_csv, write_json,
)
from nirenberg_s3.utils.series_utils import BRANCH_COLUMNS, read_series, write_series


def _cfg(tmp_path, text: str = "") -> RunConfig:
    return parse_run_config(text).with_overrides(out=str(tmp_path))


# ============================================================================
# run configuration
# ============================================================================

def test_defaults():
    cfg = RunConfig()
    assert cfg.general.K == "x4 + 2"
    assert cfg.layout == "full"
    assert cfg.resolution == cfg.general.L
    assert cfg.continue_.branches == ("constant", "bubble")
    assert load_run_config(None) == cfg


def test_parse_sections_and_types():
    cfg = parse_run_config("""
[general]
K = "x1*x2 + 3"
zonal = true
L_zonal = 128

[validate]
taus = [0.1, 0.01]
spectral = false

[continue]
steps = 7
""")
    assert cfg.general.K == "x1*x2 + 3"
    assert cfg.layout == "zonal" and cfg.resolution == 128
    assert cfg.validate.taus == (0.1, 0.01)
    assert not cfg.validate.spectral
    assert cfg.continue_.steps == 7


def test_integers_are_accepted_for_floats():
    cfg = parse_run_config("[solve]\ntau = 1\n")
    assert cfg.solve.tau == 1.0 and isinstance(cfg.solve.tau, float)


def test_unknown_section_is_located():
    with pytest.raises(ConfigError) as info:
        parse_run_config("[general]\nseed = 1\n\n[plotting]\ncolor = 1\n")
    assert info.value.line == 4 and info.value.column == 1
    assert "plotting" in str(info.value)


def test_unknown_key_is_located():
    with pytest.raises(ConfigError) as info:
        parse_run_config("[general]\nseed = 1\n  colour = 2\n")
    assert (info.value.line, info.value.column) == (3, 3)


def test_wrong_type_is_located():
    with pytest.raises(ConfigError) as info:
        parse_run_config("[analyze]\nn_starts = 1.5\n")
    assert info.value.line == 2
    assert "integer" in str(info.value)
    with pytest.raises(ConfigError):
        parse_run_config("[general]\nzonal = 1\n")
    with pytest.raises(ConfigError):
        parse_run_config("[rotation]\nplanes = [[1, 2]]\n")


def test_syntax_error_has_a_position():
    with pytest.raises(ConfigError) as info:
        parse_run_config("[general]\nseed = = 1\n")
    assert info.value.line == 2


def test_bad_K_points_at_the_key():
    with pytest.raises(ConfigError) as info:
        parse_run_config('[general]\nseed = 3\nK = "x5 + 1"\n')
    assert (info.value.line, info.value.column) == (3, 1)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / "absent.toml"))


def test_overrides():
    cfg = RunConfig().with_overrides(seed=5, L=20, out="elsewhere")
    assert cfg.seed == 5 and cfg.general.L == 20 and cfg.out == "elsewhere"
    zonal = RunConfig().with_overrides(L=300, zonal=True)
    assert zonal.layout == "zonal" and zonal.resolution == 300
    assert zonal.general.L == RunConfig().general.L
    base = RunConfig()
    assert base.with_overrides() is base


def test_rotation_is_applied_to_K():
    cfg = parse_run_config(f"[rotation]\nplanes = [[1, 2, {math.pi / 2!r}]]\n[general]\nK = \"x1 + 2\"\n")
    R = cfg.rotation_matrix()
    np.testing.assert_allclose(R @ [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], atol=1e-15)
    K = cfg.polynomial()
    # K(x) = (R x)_1 + 2 = 2 - x2
    assert float(K(np.array([0.0, -1.0, 0.0, 0.0]))) == pytest.approx(3.0)


def test_default_config_text_round_trips():
    text = default_config_text()
    assert all(f"[{name}]" in text for name in section_names())
    assert parse_run_config(text) == RunConfig()


# ============================================================================
# exit codes
# ============================================================================

def test_exit_code_mapping():
    assert exit_code_for(ConfigError("x"), "analyze") == EXIT_CONFIG
    assert exit_code_for(DomainError("x"), "solve") == EXIT_CONFIG
    assert exit_code_for(DegenerateKError("x"), "analyze") == EXIT_DEGENERATE
    assert exit_code_for(ResolutionError("x"), "validate") == EXIT_INCONCLUSIVE
    assert exit_code_for(ResolutionError("x"), "continue") == EXIT_SOLVER
    assert exit_code_for(IntegrationError("x"), "validate") == EXIT_INCONCLUSIVE
    assert exit_code_for(NumericError("x"), "solve") == EXIT_SOLVER


def test_unknown_command(tmp_path):
    code, msg = run_command("plot", _cfg(tmp_path))
    assert code == EXIT_CONFIG and "plot" in msg


# ============================================================================
# output files
# ============================================================================

def test_json_and_csv_files(tmp_path):
    path = write_json(str(tmp_path / "r.json"), {"b": np.float64(1.5), "a": np.arange(3), "c": None})
    assert read_json(path) == {"a": [0, 1, 2], "b": 1.5, "c": None}
    csv = write_csv(str(tmp_path / "t.csv"), ["x", "ok", "note"], [[0.1, True, None], [2, False, "q"]],
                    ["first comment"])
    rows = read_csv(csv)
    assert rows == [{"x": "0.10000000000000001", "ok": "true", "note": ""},
                    {"x": "2", "ok": "false", "note": "q"}]
    with open(csv, encoding="utf-8") as f:
        assert f.readline() == "# first comment\n"


@pytest.mark.parametrize("name", ["v.txt", "v.npz"])
def test_spectrum_file(tmp_path, rng, name):
    v = HarmonicSpectrum(6, rng.standard_normal(7), "zonal")
    path = save_spectrum(str(tmp_path / name), v)
    back = load_spectrum(path)
    assert back.L == 6 and back.layout == "zonal"
    np.testing.assert_array_equal(back.coeffs, v.coeffs)


def test_spectrum_text_table_columns(tmp_path):
    v = HarmonicSpectrum.constant(1.0, 2, "full")
    path = save_spectrum(str(tmp_path / "v.txt"), v)
    rows = [ln.split() for ln in open(path, encoding="utf-8") if not ln.startswith("#")]
    assert len(rows) == v.coeffs.size == 14
    # degree 1 holds four modes, degree 2 nine
    assert [r[:2] for r in rows[:6]] == [["0", "0"], ["1", "0"], ["1", "1"], ["1", "2"], ["1", "3"], ["2", "0"]]
    assert rows[-1][:2] == ["2", "8"]


def test_spectrum_file_with_foreign_basis(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("# basis legendre-unnormalised\n# L 1\n# layout zonal\n0 0 1.0\n1 0 0.5\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_spectrum(str(path))
    path.write_text(f"# version 7\n# basis {BASIS_ID}\n# L 0\n# layout zonal\n0 0 1.0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_spectrum(str(path))


def test_scan_output_folder(tmp_path):
    write_csv(str(tmp_path / "branch_bubble.csv"), BRANCH_COLUMNS, [])
    write_csv(str(tmp_path / "branch_constant.csv"), BRANCH_COLUMNS, [])
    write_series(str(tmp_path / "series_bubble_logm.dat"), [(0.0, 1.0)])
    found = scan_output_folder(str(tmp_path))
    assert sorted(found) == ["bubble", "constant"]
    assert found["bubble"]["series_path"].endswith("series_bubble_logm.dat")
    assert found["constant"]["series_path"] is None
    assert scan_output_folder(str(tmp_path / "missing")) == {}


def test_series_file(tmp_path):
    path = write_series(str(tmp_path / "s.dat"), [(0.5, 1.0), (0.25, 2.0)], "tau, m")
    np.testing.assert_array_equal(read_series(path), [[0.5, 1.0], [0.25, 2.0]])


# ============================================================================
# commands
# ============================================================================

def test_analyze_writes_degree_report(tmp_path):
    code, msg = run_command("analyze", _cfg(tmp_path, "[analyze]\nn_starts = 32\n"))
    assert code == EXIT_OK, msg
    report = read_json(str(tmp_path / "degree_report.json"))
    assert report["statistics"]["index"] == -2
    assert report["degenerate"] is False
    assert report["M"]["mu_min"] == pytest.approx(1.0 / 9.0)
    rows = read_csv(str(tmp_path / "critical_points.csv"))
    assert sorted(r["class"] for r in rows) == ["K_MINUS", "K_PLUS"]


def test_analyze_flat_laplacian_point_is_not_degenerate(tmp_path):
    cfg = _cfg(tmp_path, '[general]\nK = "4 + x1^2 + 2*x2^2 - 3*x3^2"\n[analyze]\nn_starts = 128\n')
    code, msg = run_command("analyze", cfg)
    assert code == EXIT_OK, msg
    report = read_json(str(tmp_path / "degree_report.json"))
    assert report["degenerate"] is False
    assert report["statistics"]["in_A"] is False
    assert report["statistics"]["index"] == -1
    assert len(report["statistics"]["H_configs"]) == 2
    rows = read_csv(str(tmp_path / "critical_points.csv"))
    assert [r["class"] for r in rows].count("DEGENERATE") == 2


def test_analyze_constant_K_is_degenerate(tmp_path):
    code, _ = run_command("analyze", _cfg(tmp_path, '[general]\nK = "2"\n'))
    assert code == EXIT_DEGENERATE
    assert read_json(str(tmp_path / "degree_report.json"))["degenerate"] is True


def test_solve_constant_K(tmp_path):
    cfg = _cfg(tmp_path, '[general]\nK = "1"\nL = 4\n[solve]\ntau = 0.3\n')
    code, msg = run_command("solve", cfg)
    assert code == EXIT_OK, msg
    state = read_json(str(tmp_path / "solve_state.json"))
    assert state["state"]["converged"]
    v = load_spectrum(str(tmp_path / "solution_spectrum.txt"))
    assert v.L == 4


def test_solve_rejects_unknown_seed_kind(tmp_path):
    code, _ = run_command("solve", _cfg(tmp_path, '[general]\nK = "1"\nL = 2\n[solve]\nseed_kind = "random"\n'))
    assert code == EXIT_CONFIG


def test_report_needs_predictions(tmp_path):
    code, msg = run_command("report", _cfg(tmp_path))
    assert code == EXIT_CONFIG and "predict" in msg


def test_predict_then_report(tmp_path):
    cfg = _cfg(tmp_path, "[analyze]\nn_starts = 32\n[predict]\ntaus = [0.01]\nc_mu = [1.0]\nrestarts = 2\n")
    code, msg = run_command("predict", cfg)
    assert code == EXIT_OK, msg
    preds = read_json(str(tmp_path / "predictions.json"))
    assert preds["index"] == -2
    (entry_,) = preds["predictions"]
    assert entry_["reduced_constant"] == [pytest.approx(1.0 / 18.0)]

    # a branch whose tau m^2 tends to the reduced-model constant
    taus = [0.04, 0.02, 0.01, 0.005]
    rows = []
    for tau in taus:
        row = {c: 0.0 for c in BRANCH_COLUMNS}
        row.update(tau=tau, tau_m2=1.0 / 18.0 + tau, concentrating=True)
        rows.append([row[c] for c in BRANCH_COLUMNS])
    write_csv(str(tmp_path / "branch_bubble.csv"), BRANCH_COLUMNS, rows)

    code, msg = run_command("report", cfg)
    assert code == EXIT_OK, msg
    arb = read_json(str(tmp_path / "comparison_report.json"))["branches"]["bubble"]["arbitration"]
    assert arb["tau_m2_extrapolated"] == pytest.approx(1.0 / 18.0)
    assert arb["nearest"] == "reduced_model"
    assert arb["candidates"]["single_point"] == pytest.approx(4.0 / 9.0)


def test_main_runs_analyze(tmp_path, capsys):
    assert entry.main(["analyze", "--out", str(tmp_path), "--seed", "3"]) == EXIT_OK
    assert os.path.exists(tmp_path / "degree_report.json")
    assert "Index(K) = -2" in capsys.readouterr().out


def test_main_reports_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[general]\nseed = \"x\"\n", encoding="utf-8")
    assert entry.main(["analyze", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
