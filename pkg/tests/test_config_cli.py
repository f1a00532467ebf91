"""Config parsing/round-trips and the CLI contract (exit codes, files, determinism)."""
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from smallmass.cli import main
from smallmass.config import (
    ExperimentConfig,
    build_model,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
)
from smallmass.exceptions import ConfigError

SMOKE = {
    "model": {"family": "reference1d"},
    "integrator": {"scheme": "kinetic_exponential", "dt_max": 1e-2, "mass_cfl": 0.2},
    "sampling": {"n_samples": 3000, "n_chains": 64},
    "sweep": {"m_grid": [0.0625, 0.03125, 0.015625, 0.0078125], "limit_dt_max": 5e-3},
    "stein": {"h": "tanh", "m": 0.03125, "n_samples": 20000},
    "master_seed": 99,
}


def _write(tmp_path: Path, data: dict, name="cfg.yaml") -> str:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


class TestConfig:
    def test_round_trip_identity(self):
        cfg = config_from_dict(SMOKE)
        again = config_from_dict(config_to_dict(cfg))
        assert again == cfg

    def test_file_round_trip(self, tmp_path):
        cfg = config_from_dict(SMOKE)
        save_config(cfg, tmp_path / "c.yaml")
        assert load_config(tmp_path / "c.yaml") == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown top-level"):
            config_from_dict({"modle": {}})
        with pytest.raises(ConfigError, match="unknown key"):
            config_from_dict({"model": {"famly": "linear"}})

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigError, match="registry"):
            config_from_dict({"model": {"family": "doesnotexist"}})

    def test_nonpositive_damping_rejected_at_parse(self):
        bad = dict(SMOKE)
        bad["model"] = {"family": "reference1d", "constants": {"dissipative_c2": -0.5}}
        with pytest.raises(ConfigError):
            config_from_dict(bad)

    def test_constants_override_applied(self):
        data = dict(SMOKE)
        data["model"] = {"family": "reference1d", "constants": {"sigma_sup": 1.75}}
        spec = build_model(config_from_dict(data))
        assert spec.sigma_sup == 1.75

    def test_yaml_error_reports_location(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("model:\n  family: [unclosed\n")
        with pytest.raises(ConfigError, match="line"):
            load_config(path)

    def test_defaults_are_valid(self):
        cfg = ExperimentConfig()
        assert config_from_dict(config_to_dict(cfg)) == cfg


class TestCLI:
    def test_validate_good_model(self, tmp_path):
        cfg = _write(tmp_path, SMOKE)
        assert main(["validate", cfg]) == 0

    def test_validate_expanding_drift_fails(self, tmp_path, capsys):
        bad = dict(SMOKE)
        bad["model"] = {"family": "linear", "params": {"rate": -1.0}}
        bad["sweep"] = {"m_grid": [0.25]}
        cfg = _write(tmp_path, bad)
        assert main(["validate", cfg]) == 1
        out = capsys.readouterr().out
        assert "dissipativity" in out and "FAIL" in out

    def test_missing_config_is_usage_error(self):
        assert main(["validate", "/nonexistent/cfg.yaml"]) == 2

    def test_sweep_produces_outputs_and_resumes(self, tmp_path):
        data = dict(SMOKE)
        cfg = _write(tmp_path, data)
        out1 = tmp_path / "out1"
        assert main(["sweep", cfg, "--output", str(out1), "--threads", "2"]) == 0
        table = out1 / "sweep_table.csv"
        assert table.exists()
        assert (out1 / "rate_fit.json").exists()
        assert (out1 / "plot_data.dat").exists()
        first = table.read_text()
        # rerun: resumed table identical
        assert main(["sweep", cfg, "--output", str(out1), "--threads", "2"]) == 0
        assert table.read_text() == first

    def test_sweep_deterministic_across_directories(self, tmp_path):
        cfg = _write(tmp_path, SMOKE)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", cfg, "--output", str(out_a), "--threads", "2"]) == 0
        assert main(["sweep", cfg, "--output", str(out_b), "--threads", "1"]) == 0
        assert (out_a / "sweep_table.csv").read_text() == (out_b / "sweep_table.csv").read_text()
        assert (out_a / "plot_data.dat").read_text() == (out_b / "plot_data.dat").read_text()

    def test_null_case_sweep_reports_zero_rate(self, tmp_path, capsys):
        data = dict(SMOKE)
        data["model"] = {"family": "linear",
                         "params": {"dimension": 1, "rate": 1.0, "sigma": 1.4142135623730951}}
        data["sampling"] = {"n_samples": 20000, "n_chains": 64}
        data["sweep"] = {"m_grid": [0.25, 0.125, 0.0625, 0.03125], "limit_dt_max": 2e-3}
        cfg = _write(tmp_path, data)
        out = tmp_path / "null_out"
        assert main(["sweep", cfg, "--output", str(out)]) == 0
        payload = json.loads((out / "rate_fit.json").read_text())
        assert payload["verdict"] in ("indistinguishable_from_zero", "fit_skipped")

    def test_stein_command_full_report(self, tmp_path):
        cfg = _write(tmp_path, SMOKE)
        out = tmp_path / "stein_out"
        assert main(["stein", cfg, "--output", str(out), "--threads", "2"]) == 0
        report = json.loads((out / "stein_report.json").read_text())
        assert report["passed"]
        assert report["residual_sup"] < 1e-8
        sol = np.loadtxt(out / "stein_solution.csv", delimiter=",", skiprows=1)
        assert sol.shape[1] == 6

    def test_stein_refuses_2d_models(self, tmp_path, capsys):
        data = dict(SMOKE)
        data["model"] = {"family": "curl2d"}
        data["sweep"] = {"m_grid": [0.0625]}
        cfg = _write(tmp_path, data)
        assert main(["stein", cfg]) == 1
        assert "one-dimensional" in capsys.readouterr().err

    def test_simulate_writes_path(self, tmp_path):
        data = dict(SMOKE)
        data["simulate"] = {"kind": "kinetic", "m": 0.125, "horizon": 2.0,
                            "record_stride": 10}
        cfg = _write(tmp_path, data)
        out = tmp_path / "sim_out"
        assert main(["simulate", cfg, "--output", str(out)]) == 0
        arr = np.loadtxt(out / "path.csv", delimiter=",", skiprows=1)
        assert arr.shape[1] == 3
        meta = json.loads((out / "path.json").read_text())
        assert meta["scheme"] == "kinetic_exponential"

    def test_report_rerenders_fit(self, tmp_path):
        cfg = _write(tmp_path, SMOKE)
        out = tmp_path / "out_rep"
        assert main(["sweep", cfg, "--output", str(out), "--threads", "2"]) == 0
        out2 = tmp_path / "rerender"
        assert main(["report", str(out / "sweep_table.csv"), "--output", str(out2)]) == 0
        assert (out2 / "rate_fit.json").exists()

    def test_report_missing_table_is_usage_error(self, tmp_path):
        assert main(["report", str(tmp_path / "nope.csv")]) == 2

    def test_bench_runs(self, tmp_path, capsys):
        assert main(["bench", "--chains", "32", "--steps", "2000",
                     "--json", str(tmp_path / "bench.json")]) == 0
        out = capsys.readouterr().out
        assert "chain-steps/s" in out
        assert (tmp_path / "bench.json").exists()

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        cfg = _write(tmp_path, SMOKE)
        target = tmp_path / "env_out"
        monkeypatch.setenv("SMALLMASS_OUTPUT_DIR", str(target))
        data = dict(SMOKE)
        data["simulate"] = {"kind": "limit", "horizon": 1.0}
        cfg = _write(tmp_path, data, name="cfg2.yaml")
        assert main(["simulate", cfg]) == 0
        assert (target / "path.csv").exists()

    def test_seed_override_changes_results(self, tmp_path):
        cfg = _write(tmp_path, SMOKE)
        out_a, out_b = tmp_path / "s1", tmp_path / "s2"
        assert main(["sweep", cfg, "--output", str(out_a), "--seed", "1"]) == 0
        assert main(["sweep", cfg, "--output", str(out_b), "--seed", "2"]) == 0
        assert (out_a / "sweep_table.csv").read_text() != (out_b / "sweep_table.csv").read_text()
