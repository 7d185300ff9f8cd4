from __future__ import annotations

import json

import yaml
from typer.testing import CliRunner

from hyperlab.cli import app

runner = CliRunner()


def test_spectrum_command_prints_exponent(tmp_path):
    result = runner.invoke(app, ["spectrum", "--matrix", "2,1;1,1", "--out-dir", str(tmp_path / "run")])
    assert result.exit_code == 0, result.output
    assert "top_exponent=0.962424" in result.output
    report = json.loads((tmp_path / "run" / "report.json").read_text(encoding="utf-8"))
    assert report["blocks"][0]["status"] == "ok"


def test_default_output_dir_uses_hash(tmp_path):
    result = runner.invoke(app, ["spectrum", "--matrix", "0,0,-1;1,0,0;0,1,3"])
    assert result.exit_code == 0, result.output
    [run] = list((tmp_path / "out").iterdir())
    assert run.name.startswith("spectrum-")
    assert (run / "report.json").exists()


def test_malformed_matrix_is_a_config_error():
    result = runner.invoke(app, ["spectrum", "--matrix", "2,1;1"])
    assert result.exit_code == 1


def test_bad_shear_option_is_rejected():
    result = runner.invoke(app, ["exponents", "--matrix", "2,1;1,1", "--shear", "0,1"])
    assert result.exit_code != 0


def test_missing_config_file_is_a_config_error(tmp_path):
    result = runner.invoke(app, ["spectrum", "--config", str(tmp_path / "missing.yaml")])
    assert result.exit_code == 1


def test_failed_block_exits_with_numeric_code():
    result = runner.invoke(app, ["spectrum", "--matrix", "2,1;1,3"])
    assert result.exit_code == 2
    assert "[error] spectrum: NotUnimodular" in result.output


def test_config_file_with_overrides(tmp_path):
    config = tmp_path / "exp.yaml"
    config.write_text(
        yaml.safe_dump(
            {
                "map": {"kind": "linear", "matrix": [[2, 1], [1, 1]]},
                "params": {"orbit_length": 1000, "samples": 2, "diagnostic_points": 2},
                "seed": 5,
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "run"
    result = runner.invoke(app, ["exponents", "--config", str(config), "--seed", "7", "--out-dir", str(out), "--no-cache"])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["config"]["seed"] == 7
    assert report["sidecars"] == ["exponents-exponents.csv"]
    assert (out / "exponents-exponents.csv").exists()


def test_schema_export(tmp_path):
    result = runner.invoke(app, ["schema", "--out-dir", str(tmp_path / "schemas")])
    assert result.exit_code == 0, result.output
    names = sorted(p.name for p in (tmp_path / "schemas").iterdir())
    assert names == ["ExperimentConfig.schema.json", "MapDocument.schema.json", "Report.schema.json"]
