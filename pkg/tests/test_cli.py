import json
from pathlib import Path

import numpy as np
import pytest

from damagebar import ConfigError, parse_config, parse_config_data
from damagebar.audit import LEDGER_COLUMNS
from damagebar.cli import cli


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


STRETCH = {
    "mesh": {"L": 1.0, "N": 8},
    "time": {"T": 1.0, "M": 15},
    "scenario": {
        "boundary": {"family": "ramp", "rate": 2.0},
        "initial": {"v0": "boundary_rate"},
    },
}

TINY = {
    "mesh": {"L": 1.0, "N": 1},
    "time": {"T": 0.2, "M": 2},
    "scenario": {"boundary": {"family": "ramp", "rate": 4.0}},
}


class TestParseConfig:
    def test_minimal_defaults(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, {}))
        assert cfg.material.p == 2.0
        assert cfg.material.delta == 1e-3
        assert cfg.material.kappa == 0.5
        assert cfg.mesh.num_elements == 32
        assert cfg.time_grid.num_steps == 100
        assert cfg.echo["material"]["p"] == 2.0
        assert cfg.echo["solver"]["tol_z"] == 1e-9

    def test_invalid_step_count_names_key(self, tmp_path):
        with pytest.raises(ConfigError, match="time.M"):
            parse_config(write_config(tmp_path, {"time": {"M": 0}}))
        with pytest.raises(ConfigError, match="time.M"):
            parse_config(write_config(tmp_path, {"time": {"M": -5}}))

    def test_unknown_key_suggestion(self, tmp_path):
        with pytest.raises(ConfigError, match="materail.*material"):
            parse_config(write_config(tmp_path, {"materail": {}}))

    def test_nested_unknown_key(self):
        with pytest.raises(ConfigError, match="solver.tol_zz"):
            parse_config_data({"solver": {"tol_zz": 1e-9}})

    def test_family_specific_keys(self):
        with pytest.raises(ConfigError, match="scenario.boundary.rate"):
            parse_config_data({"scenario": {"boundary": {"family": "constant", "rate": 1.0}}})

    def test_inadmissible_material_rejected(self):
        with pytest.raises(ConfigError, match="material"):
            parse_config_data({"material": {"h": [0.0, -1.0]}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            parse_config(path)

    def test_type_errors_name_keys(self):
        with pytest.raises(ConfigError, match="mesh.N"):
            parse_config_data({"mesh": {"N": 2.5}})
        with pytest.raises(ConfigError, match="seed"):
            parse_config_data({"seed": "abc"})


class TestRunCommand:
    def test_run_writes_outputs_and_passes(self, tmp_path, capsys):
        cfg = write_config(tmp_path, STRETCH)
        out = tmp_path / "out"
        assert cli(["run", "--config", str(cfg), "--out", str(out)]) == 0
        captured = capsys.readouterr().out
        assert "check energy_inequality: PASS" in captured
        assert (out / "ledger.csv").exists()
        assert (out / "summary.json").exists()
        assert (out / "config_echo.json").exists()
        snapshots = sorted((out / "snapshots").iterdir())
        assert len(snapshots) == STRETCH["time"]["M"] + 1

    def test_ledger_header(self, tmp_path):
        cfg = write_config(tmp_path, STRETCH)
        out = tmp_path / "out"
        cli(["run", "--config", str(cfg), "--out", str(out)])
        header = (out / "ledger.csv").read_text().splitlines()[0]
        assert header == ",".join(LEDGER_COLUMNS)

    def test_determinism_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, STRETCH)
        cli(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
        cli(["run", "--config", str(cfg), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a/ledger.csv").read_bytes() == (tmp_path / "b/ledger.csv").read_bytes()
        assert (tmp_path / "a/summary.json").read_bytes() == (tmp_path / "b/summary.json").read_bytes()

    def test_missing_config_is_usage_error(self):
        assert cli(["run"]) == 2

    def test_nonexistent_config_is_config_error(self, tmp_path, capsys):
        assert cli(["run", "--config", str(tmp_path / "nope.json")]) == 2


class TestAuditCommand:
    def test_round_trip_identical_ledger(self, tmp_path):
        cfg = write_config(tmp_path, STRETCH)
        out = tmp_path / "out"
        cli(["run", "--config", str(cfg), "--out", str(out)])
        re_out = tmp_path / "re"
        code = cli(["audit", "--config", str(out / "config_echo.json"), "--out", str(re_out)])
        assert code == 0
        assert (out / "ledger.csv").read_bytes() == (re_out / "ledger.csv").read_bytes()

    def test_missing_snapshots_rejected(self, tmp_path):
        cfg = write_config(tmp_path, STRETCH)
        out = tmp_path / "out"
        cli(["run", "--config", str(cfg), "--out", str(out)])
        (out / "snapshots" / "step_00003.csv").unlink()
        assert cli(["audit", "--config", str(out / "config_echo.json"), "--out", str(tmp_path / "re")]) == 2


class TestSweepCommands:
    def test_sweep_tau(self, tmp_path, capsys):
        data = dict(STRETCH)
        data["time"] = {"T": 1.0, "M": 10}
        cfg = write_config(tmp_path, data)
        out = tmp_path / "sw"
        assert cli(["sweep-tau", "--config", str(cfg), "--out", str(out), "--levels", "3"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["kind"] == "tau"
        assert report["passed"] is True
        assert len(report["levels"]) == 3

    def test_sweep_delta(self, tmp_path):
        data = {
            "mesh": {"L": 1.0, "N": 8},
            "time": {"T": 1.0, "M": 20},
            "material": {"delta": 1e-2},
            "scenario": {"boundary": {"family": "ramp", "rate": 2.0}},
        }
        cfg = write_config(tmp_path, data)
        out = tmp_path / "sd"
        assert cli(["sweep-delta", "--config", str(cfg), "--out", str(out), "--levels", "3"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["kind"] == "delta"
        assert len(report["monitors"]["sqrt_delta_sup_u_H2"]) == 3


class TestOracleAndValidate:
    def test_oracle_check(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TINY)
        out = tmp_path / "oc"
        assert cli(["oracle-check", "--config", str(cfg), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["passed"] is True
        assert len(report["steps"]) == 2

    def test_oracle_budget_error(self, tmp_path):
        cfg = write_config(tmp_path, STRETCH)  # N = 8 exceeds the budget
        assert cli(["oracle-check", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2

    def test_validate_ok(self, tmp_path, capsys):
        cfg = write_config(tmp_path, STRETCH)
        assert cli(["validate", "--config", str(cfg)]) == 0
        assert "configuration valid" in capsys.readouterr().out

    def test_validate_usage(self):
        assert cli(["frobnicate"]) == 2
        assert cli([]) == 2
