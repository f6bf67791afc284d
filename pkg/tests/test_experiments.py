"""
Tests for the experiment runners and their written outputs.
"""

import json
from pathlib import Path

import pytest

from algostab import experiments
from algostab.errors import ConfigError, ContractViolationError, InputError
from algostab.experiments import ExperimentOutcome, execute, run_experiment, write_outputs
from algostab.reporting import load_config, read_csv
from algostab.schema import ExperimentConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
AUDIT_FACTORY = {"algo": "gd_strongly_convex", "gamma": 1.0, "beta": 3.0}


def _config(experiment, tmp_path, **parameters):
    return ExperimentConfig(experiment=experiment, seed=7, output_dir=str(tmp_path / experiment), parameters=parameters)


def test_small_gain_certificate_and_convergence(tmp_path):
    """The midpoint weight is 25.5 and the infeasible coupling has none."""
    outcome = execute(_config("small_gain", tmp_path))
    assert outcome.summary["certificate"]["m"] == pytest.approx(25.5)
    assert outcome.summary["infeasible_certificate"] is None
    assert outcome.summary["final_joint_norm"] < 1e-8
    assert outcome.passed
    assert list(outcome.tables) == ["small_gain", "static_map"]


def test_small_gain_outputs_and_manifest(tmp_path):
    """Tables, summary and manifest land in output_dir; no violations file on a pass."""
    config = _config("small_gain", tmp_path, n_steps=40)
    manifest = run_experiment(config)
    root = tmp_path / "small_gain"
    assert sorted(p.name for p in root.iterdir()) == ["manifest.json", "small_gain.csv", "static_map.csv", "summary.json"]
    assert [r.path for r in manifest.outputs] == ["small_gain.csv", "static_map.csv", "summary.json"]
    summary = json.loads((root / "summary.json").read_text(encoding="utf-8"))
    assert summary["experiment"] == "small_gain"
    assert summary["passed"] is True
    assert summary["violations"] == {"total": 0, "counts": {}}
    assert len(read_csv(root / "small_gain.csv")["W"]) == 41


def test_rerun_is_byte_identical(tmp_path):
    """Same config, same bytes."""
    config = _config("small_gain", tmp_path, n_steps=20)
    run_experiment(config)
    first = {p.name: p.read_bytes() for p in (tmp_path / "small_gain").iterdir()}
    run_experiment(config)
    second = {p.name: p.read_bytes() for p in (tmp_path / "small_gain").iterdir()}
    assert first == second


def test_render_plots_writes_svg(tmp_path):
    config = ExperimentConfig(
        experiment="small_gain", seed=7, output_dir=str(tmp_path / "plots"), parameters={"n_steps": 20}, render_plots=True
    )
    manifest = run_experiment(config)
    assert "small_gain.svg" in [r.path for r in manifest.outputs]
    assert (tmp_path / "plots" / "small_gain.svg").exists()


def test_bound_check_worst_case_meets_bounds(tmp_path):
    """Worst-case sign disturbances stay under the deterministic and steady-state bounds."""
    config = _config(
        "bound_check",
        tmp_path,
        factory=AUDIT_FACTORY,
        disturbance={"kind": "worst_case_sign", "delta": 0.1},
        n_steps=20,
        n_random=20,
    )
    outcome = execute(config)
    assert outcome.passed
    table = outcome.tables["bound_check"]
    assert {"k", "bound", "empirical", "ensemble_max"} <= set(table)
    assert len(table["k"]) == 21
    assert outcome.summary["steady_state_bound"] == pytest.approx(0.1)
    assert set(outcome.summary["holder_bounds"]) == {"1.5", "2.0", "4.0", "inf"}


def test_bound_check_gaussian_needs_hessian_bound(tmp_path):
    config = _config("bound_check", tmp_path, factory=AUDIT_FACTORY, disturbance={"kind": "gaussian", "sigma2": 0.1})
    with pytest.raises(ConfigError):
        execute(config)


def test_lyapunov_audit_single_factory(tmp_path):
    """Strongly convex GD passes every audit check with the distance as V."""
    config = _config("lyapunov_audit", tmp_path, factories=[AUDIT_FACTORY], n_samples=20, k_max=3, n_pairs=50)
    outcome = execute(config)
    assert outcome.passed
    table = outcome.tables["lyapunov_audit"]
    assert table["algo"] == ["gd_strongly_convex"]
    assert table["L_V_analytic"] == [pytest.approx(1.0)]
    assert table["L_V_empirical"][0] <= 1.05


def test_admm_calibration_failure_is_a_violation(tmp_path, monkeypatch):
    """An uncertifiable network is reported, not raised."""

    def refuse(net):
        raise ContractViolationError("calibration failure: rate too fast")

    monkeypatch.setattr(experiments, "network_certificate", refuse)
    outcome = execute(_config("admm_tradeoff", tmp_path, n_agents=2, iters=10, n_starts=1))
    assert [v.check for v in outcome.violations] == ["calibration_failure"]
    assert "calibration failure" in outcome.summary["calibration_failure"]
    assert outcome.tables == {}


def test_admm_tradeoff_table_header(tmp_path):
    """The sweep table has one row per threshold, sorted ascending."""
    config = _config("admm_tradeoff", tmp_path, n_agents=3, deltas=[0.1, 0.01], iters=60, n_starts=2)
    run_experiment(config, jobs=2)
    path = tmp_path / "admm_tradeoff" / "admm_tradeoff.csv"
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "delta,steady_state_error,total_comms,bound_value"
    assert read_csv(path)["delta"] == [0.01, 0.1]


def test_strict_mode_fails_on_warnings(tmp_path):
    """Warnings only fail a run under strict."""
    config = _config("small_gain", tmp_path)
    outcome = ExperimentOutcome("small_gain", tables={"t": {"k": [0, 1]}})
    outcome.warn("slope skipped")
    assert write_outputs(config, outcome).passed
    manifest = write_outputs(config, outcome, strict=True)
    assert not manifest.passed
    assert manifest.warning_count == 1


def test_violations_file_written_on_failure(tmp_path):
    config = _config("small_gain", tmp_path)
    outcome = ExperimentOutcome("small_gain")
    outcome.fail("deterministic_bound", 0.5, k=3)
    manifest = write_outputs(config, outcome)
    assert not manifest.passed
    records = json.loads((tmp_path / "small_gain" / "violations.json").read_text(encoding="utf-8"))
    assert records[0]["check"] == "deterministic_bound"
    assert records[0]["k"] == 3


def test_execute_rejects_non_positive_jobs(tmp_path):
    with pytest.raises(InputError):
        execute(_config("small_gain", tmp_path), jobs=0)


def _sample_config(name, tmp_path):
    return load_config(CONFIGS / f"{name}.json", {"output_dir": str(tmp_path / name), "render_plots": False})


def test_stability_scaling_follows_one_over_n(tmp_path):
    """Replace-one stability decays like 1/n and stays under its bound."""
    outcome = execute(_sample_config("stability_scaling", tmp_path))
    assert outcome.passed
    fit = outcome.summary["fit"]
    assert fit["slope"] == pytest.approx(-1.0, abs=0.15)
    assert fit["r2"] >= 0.9
    table = outcome.tables["stability_scaling"]
    assert all(e <= b for e, b in zip(table["estimate"], table["bound"]))
    assert "stability_convex" in outcome.tables


def test_privacy_utility_sample_config(tmp_path):
    """Suboptimality falls with N, fits sigma2 log N / N, and the recursion check has O(1) constants."""
    outcome = execute(_sample_config("privacy_utility", tmp_path))
    assert outcome.passed
    assert outcome.summary["fit"]["r2"] >= 0.9
    means = outcome.tables["privacy_utility"]["mean_suboptimality"]
    assert means == sorted(means, reverse=True)
    constants = outcome.tables["privacy_constants"]
    for kappa, ratio in zip(constants["kappa"], constants["ratio"]):
        assert kappa / 8.0 <= ratio <= 2.0 * kappa
    rhs = outcome.tables["stochastic_recursion"]["rhs"]
    assert len(rhs) == 20
    assert all(0.0 < value < 100.0 for value in rhs)
