"""Configuration parsing, persistence and command-line behaviour."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from blowup_lab.cli import EXIT_CHECKS, EXIT_CONFIG, EXIT_CORE, EXIT_OK, EXIT_SOLVER, main, run_id_for
from blowup_lab.config import ConfigError, parse_config
from blowup_lab.persistence import load_run, read_csv, read_json, save_run, write_csv, write_json
from blowup_lab.pde_solver import solve

CHEAP_RUN = """
[run]
n = 1
nodes = 120
grading = 1.05
core_nodes = 30
U_max = 1e7
safety = 0.05
rtol = 1e-5
n_snapshots = 24
"""


def _ini(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestParseConfig:
    def test_defaults_are_listed(self):
        cfg = parse_config("[nonlinearity]\np = 2\n")
        assert cfg.spec.p == 2.0 and cfg.spec.family.key == "pure_power"
        assert "nonlinearity.family" in cfg.defaulted and "run.nodes" in cfg.defaulted
        assert "analysis.K" in cfg.defaulted and cfg.analysis.K == 2.0
        assert "resolvent.A" not in cfg.defaulted  # optional and absent
        assert cfg.run is not None and cfg.run.grid.nodes == 760

    def test_given_keys_not_defaulted(self):
        cfg = parse_config("[nonlinearity]\np = 3\nfamily = log_power\nK = 3\na = 0.5\n[run]\nnodes = 200\n")
        assert "run.nodes" not in cfg.defaulted and cfg.run.grid.nodes == 200
        assert "nonlinearity.K" not in cfg.defaulted
        assert cfg.echo()["nonlinearity"]["family"] == "log_power"

    @pytest.mark.parametrize(
        "text, key",
        [
            ("[nonlinearity]\np = 2\n[run]\nbogus = 1\n", "run.bogus"),
            ("[nonlinearity]\np = 2\n[extras]\nx = 1\n", "extras"),
            ("[run]\nn = 1\n", "nonlinearity"),
            ("[nonlinearity]\np = 2\n[run]\nnodes = many\n", "run.nodes"),
            ("[nonlinearity]\np = two\n", "nonlinearity.p"),
            ("[nonlinearity]\np = 2\nfamily = exp_log_cos\nnu = 0.3\ngamma = 0.3\n", "nonlinearity.nu"),
            ("[nonlinearity]\np = 2\nfamily = log_power\nq = 1\n", "nonlinearity.q"),
            ("[nonlinearity]\np = 2\n[verification]\ncriteria = 1, 15\n", "verification.criteria"),
            ("[nonlinearity]\np = 2\n[run]\ndomain = torus\n", "run.domain"),
            ("not an ini file", "file"),
        ],
    )
    def test_errors_name_the_key(self, text, key):
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        assert exc.value.key == key and str(exc.value).startswith(key + ":")

    def test_run_optional_unless_required(self):
        text = "[nonlinearity]\np = 2\n"
        assert parse_config(text, require_run=True).run is not None
        cfg = parse_config("[nonlinearity]\np = 2\nfamily = exp_log_cos\nnu = 0.3\ngamma = 0.3\nenforce_constraints = false\n")
        assert cfg.spec.family.key == "exp_log_cos"

    def test_run_id_is_deterministic(self):
        a = parse_config("[nonlinearity]\np = 2\n" + CHEAP_RUN)
        b = parse_config("[nonlinearity]\np = 2\n" + CHEAP_RUN + "[output]\ndir = elsewhere\n")
        c = parse_config("[nonlinearity]\np = 3\n" + CHEAP_RUN)
        assert run_id_for(a) == run_id_for(b) != run_id_for(c)
        assert len(run_id_for(a)) == 12


class TestPersistence:
    def test_csv_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((50, 3)) * 10.0 ** rng.uniform(-300, 300, (50, 3))
        write_csv(tmp_path / "a.csv", ["x", "y", "z"], data)
        header, back = read_csv(tmp_path / "a.csv")
        assert header == ["x", "y", "z"] and np.array_equal(back, data)

    def test_json_non_finite(self, tmp_path):
        write_json(tmp_path / "a.json", {"a": math.inf, "b": -math.inf, "c": math.nan, "d": np.float64(0.5), "e": np.arange(2)})
        assert read_json(tmp_path / "a.json") == {"a": "inf", "b": "-inf", "c": "nan", "d": 0.5, "e": [0, 1]}

    def test_run_round_trip(self, tmp_path):
        cfg = parse_config("[nonlinearity]\np = 2\n" + CHEAP_RUN)
        rec = solve(cfg.run, run_id="rt")
        run_dir = save_run(rec, tmp_path, config_echo=cfg.echo(), defaulted=cfg.defaulted)
        back = load_run(run_dir, cfg.run)
        assert back.status == rec.status == "blow-up"
        assert back.estimate.T_hat == rec.estimate.T_hat
        assert np.array_equal(back.m_hist, rec.m_hist)
        for a, b in zip(back.snapshots, rec.snapshots):
            assert a.t == b.t and np.array_equal(a.u, b.u)
        manifest = read_json(run_dir / "manifest.json")
        assert manifest["config"]["run"]["nodes"] == 120 and "run.dt_min" in manifest["defaulted"]


class TestCli:
    def test_bad_config_exit(self, tmp_path, capsys):
        assert main(["resolvent", "--config", _ini(tmp_path, "[nonlinearity]\np = 0.5\n")]) == EXIT_CONFIG
        assert "config error: nonlinearity.p" in capsys.readouterr().err
        assert main(["solve", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG

    def test_resolvent_outputs(self, tmp_path):
        cfg = _ini(tmp_path, "[nonlinearity]\np = 2\nfamily = log_power\n[resolvent]\nA = 1.0\nX_hi = 1e20\n")
        out = tmp_path / "out"
        assert main(["resolvent", "--config", cfg, "--out", str(out)]) == EXIT_OK
        for name in ("G_table.csv", "H_table.csv", "asymptotics.json", "asymptotics.csv", "hypotheses.json", "manifest.json"):
            assert (out / name).is_file(), name
        header, rows = read_csv(out / "G_table.csv")
        assert header == ["X", "G", "rel_err"] and np.all(np.diff(rows[:, 1]) < 0)
        manifest = read_json(out / "manifest.json")
        assert manifest["command"] == "resolvent" and manifest["config"]["resolvent"]["A"] == 1.0

    def test_resolvent_is_deterministic(self, tmp_path):
        cfg = _ini(tmp_path, "[nonlinearity]\np = 2\nfamily = iterated_log\n[resolvent]\nX_hi = 1e15\n")
        main(["resolvent", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["resolvent", "--config", cfg, "--out", str(tmp_path / "b")])
        for name in ("G_table.csv", "asymptotics.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_synthetic_analyze(self, tmp_path):
        cfg = _ini(tmp_path, "[nonlinearity]\np = 2\n[analysis]\nsynthetic = true\n")
        out = tmp_path / "syn"
        assert main(["analyze", "--config", cfg, "--out", str(out), "--strict"]) == EXIT_OK
        summary = read_json(out / "analysis.json")
        assert all(summary["flags"].values())
        _, rows = read_csv(out / "spectral.csv")
        np.testing.assert_allclose(rows[:, 5], rows[:, 6], rtol=1e-6)  # s*b against its target

    def test_step_budget_exit(self, tmp_path):
        cfg = _ini(tmp_path, "[nonlinearity]\np = 2\n" + CHEAP_RUN + "max_steps = 50\n")
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_SOLVER

    def test_solve_then_analyze(self, tmp_path, capsys):
        cfg = _ini(tmp_path, "[nonlinearity]\np = 2\n" + CHEAP_RUN + "[analysis]\nmin_core_nodes = 20\ntau_margin = 10\n")
        out = tmp_path / "o"
        assert main(["solve", "--config", cfg, "--out", str(out)]) == EXIT_OK
        run_dirs = list(out.glob("run-*"))
        assert len(run_dirs) == 1 and (run_dirs[0] / "m_history.csv").is_file()
        assert main(["analyze", "--config", cfg, "--out", str(out / "ana"), "--run", str(run_dirs[0])]) == EXIT_OK
        for name in ("spectral.csv", "residuals.csv", "h_of_s.csv", "m_vs_psi.csv", "profile_ratio.csv", "analysis.json"):
            assert (out / "ana" / name).is_file(), name
        assert "T_hat" in capsys.readouterr().out

    def test_unresolved_core_exit(self, tmp_path):
        cfg = _ini(tmp_path, "[nonlinearity]\np = 2\n" + CHEAP_RUN + "[analysis]\nmin_core_nodes = 100000\ntau_margin = 10\n")
        assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CORE

    def test_verify_subset(self, tmp_path, capsys):
        cfg = _ini(tmp_path, "[nonlinearity]\np = 2\n[verification]\ncriteria = 1, 9\nsamples = 200\n")
        out = tmp_path / "v"
        assert main(["verify", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = read_json(out / "verify.json")
        assert report["all_passed"] and [c["number"] for c in report["criteria"]] == [1, 9]
        assert capsys.readouterr().out.count("[PASS]") == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0 and capsys.readouterr().out.strip().endswith("0.1.0")
