"""
Tests for CSV/JSON emission, config loading and the run manifest.
"""

import json

import pytest

from algostab.errors import ConfigError, InputError
from algostab.reporting import (
    build_manifest,
    canonical_json,
    config_hash,
    emit_csv,
    load_config,
    read_csv,
    violation_summary,
    write_json,
)
from algostab.schema import ExperimentConfig, Violation
from algostab.utils.stats import fit_powerlaw


def _write_config(path, **fields):
    data = {"experiment": "small_gain", "seed": 7, "output_dir": "out", "parameters": {}}
    data.update(fields)
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_emit_csv_header_only_for_empty_table(tmp_path):
    """An empty table still writes its header row."""
    path = emit_csv({"k": [], "bound": []}, tmp_path / "empty.csv")
    assert path.read_text(encoding="utf-8") == "k,bound\n"


def test_emit_csv_is_stable_after_reading_back(tmp_path):
    """Floats parse back exactly, so a re-emitted table is byte-identical."""
    table = {"k": [0, 1], "value": [0.1, 1.0 / 3.0], "passed": [True, False], "algo": ["gd", "agd"]}
    first = emit_csv(table, tmp_path / "a.csv")
    loaded = read_csv(first)
    assert loaded["value"] == [0.1, 1.0 / 3.0]
    assert loaded["passed"] == ["true", "false"]
    assert loaded["algo"] == ["gd", "agd"]
    second = emit_csv(loaded, tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()


def test_emit_csv_rejects_ragged_table(tmp_path):
    with pytest.raises(InputError):
        emit_csv({"a": [1, 2], "b": [1]}, tmp_path / "bad.csv")


def test_write_json_non_finite_values(tmp_path):
    """NaN and infinities are written as strings with sorted keys."""
    path = write_json({"b": float("nan"), "a": float("inf")}, tmp_path / "x.json")
    text = path.read_text(encoding="utf-8")
    assert json.loads(text) == {"a": "inf", "b": "nan"}
    assert text.index('"a"') < text.index('"b"')
    assert text.endswith("\n")


def test_canonical_json_normalizes_numbers():
    """1 and 1.0 give the same canonical text."""
    assert canonical_json({"x": 1, "y": [2]}) == canonical_json({"y": [2.0], "x": 1.0})


def test_config_hash_tracks_content():
    base = ExperimentConfig(experiment="small_gain", seed=7)
    assert config_hash(base) == config_hash(ExperimentConfig(experiment="small_gain", seed=7))
    assert config_hash(base) != config_hash(ExperimentConfig(experiment="small_gain", seed=8))


def test_load_config_applies_overrides(tmp_path):
    """Non-None overrides replace file values."""
    path = _write_config(tmp_path / "c.json")
    config = load_config(path, {"seed": 11, "output_dir": None})
    assert config.seed == 11
    assert config.output_dir == "out"
    assert config.typed_parameters().rho == 0.5


def test_load_config_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "nope.json")


def test_load_config_bad_json(tmp_path):
    """Parse errors carry the offending line."""
    path = tmp_path / "bad.json"
    path.write_text('{\n  "seed": 7,\n}', encoding="utf-8")
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    assert exc_info.value.diagnostics[0].startswith("line 3")


def test_load_config_non_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_validation_diagnostics(tmp_path):
    """Unknown fields and a missing seed are both reported."""
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"experiment": "small_gain", "colour": "red"}), encoding="utf-8")
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    joined = "\n".join(exc_info.value.diagnostics)
    assert "seed" in joined
    assert "colour" in joined


def test_load_config_rejects_bad_parameters(tmp_path):
    """Parameters are validated against the experiment's model."""
    path = _write_config(tmp_path / "c.json", parameters={"rho": 1.5})
    with pytest.raises(ConfigError):
        load_config(path)


def test_violation_summary_counts_checks():
    violations = [
        Violation(check="deterministic_bound", k=1, excess=0.1),
        Violation(check="deterministic_bound", k=2, excess=0.2),
        Violation(check="steady_state", k=5, excess=0.01),
    ]
    assert violation_summary(violations) == {
        "total": 3,
        "counts": {"deterministic_bound": 2, "steady_state": 1},
    }


def test_build_manifest_relative_sorted_paths(tmp_path):
    """Output records are relative to the run directory and sorted."""
    b = emit_csv({"k": [0]}, tmp_path / "b.csv")
    a = write_json({"x": 1}, tmp_path / "a.json")
    config = ExperimentConfig(experiment="small_gain", seed=7, output_dir=str(tmp_path))
    manifest = build_manifest(config, [b, a], tmp_path, violation_count=0, warning_count=1)
    assert [r.path for r in manifest.outputs] == ["a.json", "b.csv"]
    assert all(len(r.sha256) == 64 for r in manifest.outputs)
    assert manifest.passed
    strict = build_manifest(config, [b, a], tmp_path, violation_count=0, warning_count=1, strict=True)
    assert not strict.passed


def test_fit_powerlaw_recovers_slope():
    """y = 3 / x is a line of slope -1 in log-log."""
    xs = [1.0, 2.0, 4.0, 8.0]
    fit = fit_powerlaw(xs, [3.0 / x for x in xs])
    assert fit.slope == pytest.approx(-1.0)
