import json

import pytest

from spiralseg.analysis import evaluate_checks, recheck, write_report
from spiralseg.cli import EXIT_ANALYSIS, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, load_run, main
from spiralseg.config import PRESETS, ConfigError, ExperimentConfig, parse_config_text, preset
from spiralseg.selftest import CONSTANTS_TABLE, check_constants, run_all


# -- configuration ------------------------------------------------------------------

def test_presets():
    assert set(PRESETS) == {"fig1a", "fig1b", "fig1c"}
    b = preset("fig1b")
    assert b.matrix == "cyclic:4" and b.n_theta == 512 and b.n_y == 512 and b.y_max == 8.0
    assert b.beta_schedule[0] == 10.0 and b.beta_schedule[-1] == 1e7
    assert b.competition().a[0, 1] == 4.0
    with pytest.raises(ConfigError):
        preset("fig9")


def test_text_roundtrip():
    cfg = preset("fig1c", n_theta=64, n_y=32, fit_window=(1.0, 2.5))
    assert parse_config_text(cfg.to_text()) == cfg


def test_parse_preset_grid_and_beta_max():
    cfg = parse_config_text("preset = fig1b\ngrid = 64x32  # coarse\nbeta_max = 1e3\n")
    assert cfg.matrix == "cyclic:4" and (cfg.n_theta, cfg.n_y) == (64, 32)
    assert cfg.beta_schedule == (10.0, 100.0, 1000.0)


@pytest.mark.parametrize("text, where", [
    ("h = 3\nbogus = 1\n", "<config>:2"),
    ("h = three\n", "<config>:1"),
    ("just words\n", "<config>:1"),
    ("fit_window = 1\n", "<config>:1"),
    ("preset = fig7\n", "<config>"),
])
def test_parse_errors_name_location(text, where):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert str(exc.value).startswith(where)


@pytest.mark.parametrize("over", [
    dict(h=2), dict(h=3, k=2), dict(beta_schedule=()), dict(beta_schedule=(10.0, 5.0)),
    dict(method="jacobi"), dict(threshold_scale="col"), dict(delta=0.0), dict(rho=1),
    dict(tol=0.0), dict(fit_window=(3.0, 1.0)), dict(fit_window=(1.0, 9.0)),
])
def test_invalid_configs(over):
    with pytest.raises(ConfigError):
        ExperimentConfig(**over)


def test_invalid_matrix_and_grid_surface_as_config_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig(matrix="0,1,1; 1,0,-1; 1,1,0").competition()
    with pytest.raises(ConfigError):
        ExperimentConfig(n_theta=15).grid()


def test_truncated_schedule():
    cfg = preset("fig1a").truncated(1e4)
    assert cfg.beta_schedule[-1] == 1e4
    with pytest.raises(ConfigError):
        preset("fig1a").truncated(1.0)


# -- self test -----------------------------------------------------------------------

def test_selftest_passes():
    results = run_all()
    assert all(ok for _, ok, _ in results), results
    assert len(results) == 8


def test_selftest_detects_mutated_constants():
    bad = dict(CONSTANTS_TABLE)
    lam, alpha = bad["cyclic:4"]
    bad["cyclic:4"] = (2 * lam, alpha)
    assert not check_constants(bad)[1]
    assert not all(ok for _, ok, _ in run_all(constants_table=bad))


# -- command line --------------------------------------------------------------------

def test_cli_selftest(capsys):
    assert main(["selftest"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 8 and "FAIL" not in out


def test_cli_missing_config(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG
    assert "nope.cfg" in capsys.readouterr().err


def test_cli_no_experiment(capsys):
    assert main(["solve"]) == EXIT_CONFIG


def test_cli_invalid_matrix(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("matrix = 0,1,1; 1,0,-2; 1,1,0\ngrid = 32x16\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_cli_bad_arguments():
    assert main(["solve", "--grid", "64by64", "--preset", "fig1a"]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG


def test_cli_corrupt_checkpoint(tmp_path):
    d = tmp_path / "ck"
    d.mkdir()
    (d / "manifest.json").write_text(json.dumps({"k": 3, "beta": 1.0, "files": ["x.csv"]}))
    (d / "x.csv").write_text("n_theta,n_y,y_max,role\n16,2,1,species\n1,2\n")
    assert main(["analyze", str(d)]) == EXIT_CONFIG


def test_cli_solver_failure(tmp_path):
    cfg = tmp_path / "hard.cfg"
    cfg.write_text("preset = fig1a\ngrid = 32x16\nbeta_schedule = 1e2, 1e6\n"
                   "tol = 1e-14\nmax_outer = 1\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_SOLVER


@pytest.fixture(scope="module")
def coarse_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["solve", "--preset", "fig1b", "--grid", "64x64", "--beta-max", "1e3",
                 "--out", str(out)])
    return out, code


def test_cli_solve_writes_checkpoints(coarse_run):
    out, code = coarse_run
    assert code == EXIT_OK
    cks = sorted((out / "checkpoints").iterdir())
    assert [c.name for c in cks] == ["00_beta_10", "01_beta_100", "02_beta_1000"]
    traj, cfg = load_run(out)
    assert [s.beta for s in traj] == [10.0, 100.0, 1000.0]
    assert cfg.matrix == "cyclic:4" and cfg.n_theta == 64
    assert all(s.converged for s in traj)


def test_cli_analyze_outputs(coarse_run, capsys):
    out, _ = coarse_run
    dest = out / "an"
    code = main(["analyze", str(out), "--out", str(dest)])
    assert code in (EXIT_OK, EXIT_ANALYSIS)
    for name in ("constants", "fits", "order", "overlap", "sign_defects", "singular", "angles",
                 "checks"):
        assert (dest / f"{name}.csv").exists()
    for name in ("species_strip.pgm", "species_disk.pgm", "multiplicity.pgm", "report.json"):
        assert (dest / name).exists()
    report = json.loads((dest / "report.json").read_text())
    stored = {k: (v["passed"], v["detail"]) for k, v in report["checks"].items()}
    assert stored == recheck(dest)
    assert code == (EXIT_OK if all(ok for ok, _ in stored.values()) else EXIT_ANALYSIS)
    assert "analysis of fig1b" in capsys.readouterr().out


def test_cli_analyze_single_checkpoint(coarse_run):
    out, _ = coarse_run
    ck = sorted((out / "checkpoints").iterdir())[-1]
    assert main(["analyze", str(ck)]) in (EXIT_OK, EXIT_ANALYSIS)
    assert (ck / "analysis" / "checks.csv").exists()


def test_cli_sweep(tmp_path):
    out = tmp_path / "sw"
    code = main(["sweep", "--preset", "fig1a", "--grid", "32x32", "--beta-max", "1e2",
                 "--out", str(out)])
    assert code in (EXIT_OK, EXIT_ANALYSIS)
    assert sorted(p.name for p in (out / "analysis").iterdir()) == ["00_beta_10", "01_beta_100"]


# -- report re-derivation ---------------------------------------------------------------

def test_recheck_matches_report(small_run, tmp_path):
    write_report(small_run.report, tmp_path, small_run.state)
    assert recheck(tmp_path) == small_run.report.checks


def test_checks_flip_when_tables_change(fig1b_run):
    tables = {k: [dict(r) for r in v] for k, v in fig1b_run.report.tables.items()}
    assert all(ok for ok, _ in evaluate_checks(tables).values())
    for row in tables["fits"]:
        row["alpha_fit"] = str(-float(row["alpha_fit"]))
    assert not evaluate_checks(tables)["alpha"][0]
