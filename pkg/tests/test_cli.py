"""
Tests for the command-line interface and its exit codes.
"""

import json

from typer.testing import CliRunner

from algostab.cli import main
from algostab.cli.main import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VIOLATIONS, app
from algostab.errors import AlgostabError

runner = CliRunner()


def _config(path, experiment, **parameters):
    path.write_text(
        json.dumps({"experiment": experiment, "seed": 7, "output_dir": "unused", "parameters": parameters}),
        encoding="utf-8",
    )
    return str(path)


def test_run_small_gain_passes(tmp_path):
    config = _config(tmp_path / "sg.json", "small_gain")
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", config, "--out", str(out)])
    assert result.exit_code == EXIT_OK
    assert "passed" in result.output
    assert (out / "manifest.json").exists()


def test_violations_exit_with_two(tmp_path):
    """A run whose convergence target is not reached fails its assertions."""
    config = _config(tmp_path / "sg.json", "small_gain", n_steps=5)
    result = runner.invoke(app, ["run", config, "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_VIOLATIONS
    assert (tmp_path / "out" / "violations.json").exists()


def test_seed_override_reaches_manifest(tmp_path):
    config = _config(tmp_path / "sg.json", "small_gain")
    runner.invoke(app, ["run", config, "--out", str(tmp_path / "a"), "--seed", "1"])
    runner.invoke(app, ["run", config, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = json.loads((tmp_path / "a" / "manifest.json").read_text(encoding="utf-8"))
    b = json.loads((tmp_path / "b" / "manifest.json").read_text(encoding="utf-8"))
    assert a["config_hash"] != b["config_hash"]


def test_missing_config_is_io_error(tmp_path):
    result = runner.invoke(app, ["run", str(tmp_path / "missing.json")])
    assert result.exit_code == EXIT_IO


def test_invalid_config_is_usage_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"experiment": "small_gain"}), encoding="utf-8")
    result = runner.invoke(app, ["run", str(path)])
    assert result.exit_code == EXIT_USAGE


def test_other_toolkit_errors_are_usage_errors(tmp_path, monkeypatch):
    """Errors outside the named families still exit with 64, not a traceback."""

    def fail(config, jobs):
        raise AlgostabError("unsupported combination")

    monkeypatch.setattr(main, "execute", fail)
    config = _config(tmp_path / "sg.json", "small_gain")
    result = runner.invoke(app, ["run", config, "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_USAGE
    assert not isinstance(result.exception, AlgostabError)


def test_command_rejects_other_experiments(tmp_path):
    """verify-bound only runs bound_check configs."""
    config = _config(tmp_path / "sg.json", "small_gain")
    result = runner.invoke(app, ["verify-bound", config, "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_USAGE


def test_jobs_must_be_positive(tmp_path):
    config = _config(tmp_path / "sg.json", "small_gain")
    result = runner.invoke(app, ["run", config, "--jobs", "0"])
    assert result.exit_code != EXIT_OK


def test_estimate_lyapunov_prints_json(tmp_path):
    """A single factory prints one JSON object."""
    config = _config(
        tmp_path / "audit.json",
        "lyapunov_audit",
        factories=[{"algo": "gd_strongly_convex", "gamma": 1.0, "beta": 3.0}],
        n_samples=20,
        k_max=3,
        n_pairs=50,
    )
    result = runner.invoke(app, ["estimate-lyapunov", config, "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_OK
    assert '"algo": "gd_strongly_convex"' in result.output
    assert '"L_V_analytic": 1' in result.output
