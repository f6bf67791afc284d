"""
Experiment Runner

Config-driven studies with embedded pass/fail assertions. Each experiment
returns tables, a JSON summary, violations and warnings; write_outputs turns
them into CSV/JSON/SVG files plus the run manifest.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from algostab.algozoo import (
    StepPolicy,
    factory_from_spec,
    horizon_tuned_step,
    make_gd_strongly_convex,
    make_noisy_gd,
    privacy_bound_constants,
    quadratic_problem,
    run_stability_experiment,
)
from algostab.bounds import (
    LOWER_CONFIDENCE,
    deterministic_bound,
    deterministic_bound_series,
    holder_bound,
    steady_state_bound,
    stochastic_bound,
    stochastic_bound_series,
    verify_trajectory_bound,
)
from algostab.disturbance import (
    DissipationCertificate,
    DisturbanceSource,
    as_disturbance_fn,
    check_dissipation,
    draw_block,
    from_spec,
    norm_storage,
    run_interconnection,
    small_gain_certificate,
)
from algostab.distsim import network_certificate, quadratic_network, steady_state_bound_for, tradeoff_sweep
from algostab.dynamics import distance_to_equilibrium, simulate, simulate_ensemble
from algostab.errors import ConfigError, ContractViolationError, InputError
from algostab.lyapunov import (
    lipschitz_LV_empirical,
    verify_decrease,
    verify_perturbed_decrease,
    verify_sandwich,
    verify_stochastic_decrease,
    verify_stochastic_recursion,
)
from algostab.metrics import schedule_from_spec
from algostab.reporting import build_manifest, emit_csv, violation_summary, write_json
from algostab.schema import (
    AdmmTradeoffParams,
    BoundCheckParams,
    ExperimentConfig,
    FactorySpec,
    LyapunovAuditParams,
    PrivacyUtilityParams,
    Region,
    RunManifest,
    SmallGainParams,
    StabilityScalingParams,
    Violation,
)
from algostab.utils.plotting import log_axis_ok, render_line_chart
from algostab.utils.sampling import gaussian_draws, rng_stream, sample_region
from algostab.utils.stats import ci_half_width, fit_powerlaw, linear_fit_r2

logger = logging.getLogger(__name__)

MONOTONE_ALLOWANCE = 0.05
KAPPA_SCALING_FACTOR = 1.3


@dataclass
class PlotSpec:
    x: str
    ys: List[str]
    title: str = ""
    log_x: bool = False
    log_y: bool = False


@dataclass
class ExperimentOutcome:
    """What one experiment produced, before anything is written."""

    experiment: str
    tables: Dict[str, Dict[str, List[Any]]] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    violations: List[Violation] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    plots: Dict[str, PlotSpec] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def fail(self, check: str, excess: float, k: int = 0, witness: Optional[Sequence[float]] = None) -> None:
        self.violations.append(
            Violation(check=check, k=int(k), excess=float(excess), witness=None if witness is None else list(witness))
        )

    def warn(self, message: str) -> None:
        logger.warning(message)
        self.warnings.append(message)


def _pool_map(fn: Callable, items: Sequence, jobs: int) -> List:
    """Order-preserving map, threaded when jobs > 1."""
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# lyapunov_audit
# ---------------------------------------------------------------------------


def _audit_indices(k_max: int) -> List[int]:
    return sorted(set(np.linspace(0, k_max, min(k_max + 1, 6)).astype(int).tolist()))


def _audit_factory(spec: FactorySpec, params: LyapunovAuditParams, seed: int) -> Dict[str, Any]:
    bundle = factory_from_spec(spec, params.disturbance_radius)
    samples = sample_region(bundle.region, params.n_samples, seed)
    ks = _audit_indices(params.k_max)
    sup = bundle.lyapunov("sup")
    sandwich = verify_sandwich(sup, samples, ks)
    decrease = verify_decrease(sup, samples, ks)
    region_e = Region.disturbance_set(bundle.system.dim_disturbance, params.disturbance_radius)
    perturbed = verify_perturbed_decrease(sup, samples, region_e, ks, seed)
    lv_empirical = lipschitz_LV_empirical(sup, bundle.region, params.n_pairs, ks, seed)
    record = {
        "algo": spec.algo,
        "K": bundle.schedule.horizon_K,
        "c0": bundle.schedule.c0,
        "L_V_analytic": bundle.constants["L_V"],
        "L_V_empirical": lv_empirical,
        "sandwich_max_violation": sandwich.max_violation,
        "decrease_max_violation": decrease.max_relative_violation,
        "perturbed_max_violation": perturbed.max_relative_violation,
        "sum_sandwich_max_violation": float("nan"),
        "sum_decrease_max_violation": float("nan"),
        "stochastic_slack": float("nan"),
        "reports": {"sandwich": sandwich, "decrease": decrease, "perturbed": perturbed},
    }
    if params.include_sum_form:
        total = bundle.lyapunov("sum")
        sum_sandwich = verify_sandwich(total, samples, ks)
        sum_decrease = verify_decrease(total, samples, ks)
        record["sum_sandwich_max_violation"] = sum_sandwich.max_violation
        record["sum_decrease_max_violation"] = sum_decrease.max_relative_violation
        record["reports"].update(sum_sandwich=sum_sandwich, sum_decrease=sum_decrease)
        if spec.sigma2 > 0 and params.stochastic_points > 0 and "L_H" in bundle.constants:
            stochastic = verify_stochastic_decrease(
                total,
                spec.sigma2,
                n_mc=params.stochastic_n_mc,
                seed=seed,
                sample_set=samples[: params.stochastic_points],
            )
            record["stochastic_slack"] = stochastic.slack
            record["reports"]["stochastic"] = stochastic
    return record


def run_lyapunov_audit(params: LyapunovAuditParams, config: ExperimentConfig, jobs: int) -> ExperimentOutcome:
    """Sandwich, decrease and Lipschitz checks of V and V~ for every configured factory."""
    outcome = ExperimentOutcome("lyapunov_audit")
    records = _pool_map(lambda spec: _audit_factory(spec, params, config.seed), params.factories, jobs)
    columns = [
        "algo",
        "K",
        "c0",
        "L_V_analytic",
        "L_V_empirical",
        "sandwich_max_violation",
        "decrease_max_violation",
        "perturbed_max_violation",
        "sum_sandwich_max_violation",
        "sum_decrease_max_violation",
        "stochastic_slack",
    ]
    outcome.tables["lyapunov_audit"] = {c: [r[c] for r in records] for c in columns}
    for i, r in enumerate(records):
        reports = r["reports"]
        for name in ("sandwich", "decrease", "perturbed", "sum_sandwich", "sum_decrease", "stochastic"):
            report = reports.get(name)
            if report is None or report.passed:
                continue
            if name == "stochastic":
                outcome.fail(f"{r['algo']}:stochastic_decrease", -report.slack, report.k)
            else:
                excess = getattr(report, "max_relative_violation", None)
                excess = report.max_violation if excess is None else excess
                outcome.fail(f"{r['algo']}:{name}", excess, report.witness_k or 0, report.witness_xi)
        if r["L_V_empirical"] > r["L_V_analytic"] * params.lv_slack:
            outcome.fail(f"{r['algo']}:lipschitz_LV", r["L_V_empirical"] - r["L_V_analytic"] * params.lv_slack, i)
    outcome.summary["factories"] = [{c: r[c] for c in columns} for r in records]
    return outcome


# ---------------------------------------------------------------------------
# bound_check
# ---------------------------------------------------------------------------


def run_bound_check(params: BoundCheckParams, config: ExperimentConfig, jobs: int) -> ExperimentOutcome:
    """
    Simulated distances against the disturbance bounds.

    Bounded disturbances are checked against the deterministic series built
    with |e_j| <= Delta, on the configured trajectory and on n_random
    uniform-ball trajectories; the steady state against L_V L_e Delta/(1 - tau).
    Gaussian disturbances use an n_mc ensemble and the stochastic series.
    """
    outcome = ExperimentOutcome("bound_check")
    bundle = factory_from_spec(params.factory, max(params.disturbance.delta, 1e-12))
    sys, metric, constants = bundle.system, bundle.metric, bundle.constants
    schedule = bundle.schedule if params.schedule is None else schedule_from_spec(params.schedule)
    x_star = np.asarray(sys.equilibrium, dtype=float)
    z0 = x_star.copy()
    z0[0] += params.z0_offset
    d0 = float(distance_to_equilibrium(sys, z0, metric))
    n = params.n_steps
    L_V, L_e = constants["L_V"], sys.gain(0)
    source = from_spec(params.disturbance, sys.dim_disturbance, equilibrium=x_star[: sys.dim_disturbance])
    summary = outcome.summary
    summary["constants"] = {"c0": schedule.c0, "K": schedule.horizon_K, "L_V": L_V, "L_e": L_e, "d0": d0}

    if source.kind == "gaussian":
        if "L_H" not in constants:
            raise ConfigError(
                "gaussian disturbances need a factory with an L_H certificate",
                [f"factory.algo: {params.factory.algo} has no Hessian bound; use noisy_gd or accelerated_gd"],
            )
        cbar0 = (schedule.horizon_K + 1) * schedule.c0
        bound = stochastic_bound_series(cbar0, schedule, d0, constants["L_H"], source.sigma2, L_e, n)
        noise = gaussian_draws(source.sigma2, (n, config.n_mc, sys.dim_disturbance), source.seed, 0)
        states = simulate_ensemble(sys, z0, noise)
        empirical = np.asarray(distance_to_equilibrium(sys, states, metric)).T
        report = verify_trajectory_bound(empirical, bound, stochastic=True, constants_used=summary["constants"])
        outcome.tables["bound_check"] = report.to_table()
        outcome.violations.extend(report.violations)
        summary["mean_final"] = float(empirical[:, -1].mean())
        outcome.plots["bound_check"] = PlotSpec("k", ["bound", "empirical"], "Stochastic bound", log_y=True)
        return outcome

    if not source.bounded:
        raise ConfigError(
            f"bound_check supports bounded or gaussian disturbances, got {source.kind}",
            ["disturbance.kind: use the small_gain experiment for state-dependent disturbances"],
        )
    Delta = source.bound_Delta
    bound = deterministic_bound_series(schedule.c0, schedule, d0, L_V, L_e, Delta, n)
    main = simulate(sys, z0, n, as_disturbance_fn(source), metric)
    report = verify_trajectory_bound(main.metric_values, bound, constants_used=summary["constants"])
    outcome.violations.extend(report.violations)
    table = report.to_table()

    if params.n_random > 0 and Delta > 0:
        ball = DisturbanceSource(kind="uniform_ball", dim=sys.dim_disturbance, bound_Delta=Delta, seed=config.seed)
        noise = np.stack([draw_block(ball, k, params.n_random, stream_base=1) for k in range(n)])
        states = simulate_ensemble(sys, z0, noise)
        empirical = np.asarray(distance_to_equilibrium(sys, states, metric)).T
        ensemble = verify_trajectory_bound(empirical, bound, constants_used=summary["constants"])
        outcome.violations.extend(Violation(**{**v.model_dump(), "check": "random_disturbance_bound"}) for v in ensemble.violations)
        table["ensemble_max"] = ensemble.empirical_series
    outcome.tables["bound_check"] = table

    sizes = np.linalg.norm(main.disturbances, axis=1) if n else np.zeros(0)
    reference = deterministic_bound(schedule.c0, schedule, d0, L_V, L_e, sizes, n)
    holder = {}
    for p in (1.5, 2.0, 4.0, np.inf):
        value = holder_bound(schedule.c0, schedule, d0, L_V, L_e, sizes, n, p)
        holder["inf" if np.isinf(p) else str(p)] = value
        if value < reference * (1.0 - 1e-12):
            outcome.fail("holder_dominance", reference - value, n)
    summary["holder_bounds"] = holder
    summary["deterministic_bound_final"] = float(bound[-1])
    summary["final_error"] = float(main.metric_values[-1])

    if schedule.kind == "constant" and schedule.tau(0) < 1:
        tau = schedule.tau(0)
        steady = steady_state_bound(L_V, L_e, Delta, tau)
        transient = schedule.c0 * tau ** n * d0
        summary["steady_state_bound"] = steady
        if main.metric_values[-1] > (steady + transient) * (1.0 + 1e-6):
            outcome.fail("steady_state", float(main.metric_values[-1]) - steady - transient, n)
    outcome.plots["bound_check"] = PlotSpec("k", ["bound", "empirical"], "Deterministic bound", log_y=True)
    return outcome


# ---------------------------------------------------------------------------
# admm_tradeoff
# ---------------------------------------------------------------------------


def run_admm_tradeoff(params: AdmmTradeoffParams, config: ExperimentConfig, jobs: int) -> ExperimentOutcome:
    """Error, communication and bound for each trigger threshold Delta."""
    outcome = ExperimentOutcome("admm_tradeoff")
    net = quadratic_network(
        params.n_agents, params.dim, params.gamma, params.beta, config.seed, params.alpha, params.epsilon_tuning
    )
    try:
        cert = network_certificate(net)
    except ContractViolationError as exc:
        outcome.fail("calibration_failure", 1.0)
        outcome.summary["calibration_failure"] = str(exc)
        return outcome
    order = sorted(range(len(params.deltas)), key=lambda i: params.deltas[i])
    deltas = [params.deltas[i] for i in order]
    table, reports = tradeoff_sweep(
        net, deltas, params.iters, config.seed, params.n_starts, params.start_scale, params.jitter, jobs
    )
    outcome.tables["admm_tradeoff"] = table
    for report in reports:
        outcome.violations.extend(report.violations)

    errors, comms, bounds = table["steady_state_error"], table["total_comms"], table["bound_value"]
    for i, (err, bnd) in enumerate(zip(errors, bounds)):
        if err > bnd * (1.0 + 1e-9):
            outcome.fail("admm_bound", err - bnd, i)
    for i in range(1, len(deltas)):
        if errors[i] < errors[i - 1] * (1.0 - MONOTONE_ALLOWANCE):
            outcome.fail("admm_error_monotone", errors[i - 1] - errors[i], i)
        if comms[i] > comms[i - 1] * (1.0 + MONOTONE_ALLOWANCE):
            outcome.fail("admm_comms_monotone", comms[i] - comms[i - 1], i)

    positive = [(d, e) for d, e in zip(deltas, errors) if d > 0 and e > 0]
    if len(positive) >= 3:
        fit = fit_powerlaw([d for d, _ in positive], [e for _, e in positive])
        outcome.summary["error_slope"] = fit.slope
        if abs(fit.slope - 1.0) > params.slope_tolerance:
            outcome.fail("admm_slope", abs(fit.slope - 1.0) - params.slope_tolerance)
    else:
        outcome.warn("error-vs-Delta slope needs three positive thresholds; skipped")

    reference = max(deltas) if max(deltas) > 0 else 1.0
    scaled = quadratic_network(
        params.n_agents, params.dim, params.gamma, 10.0 * params.beta, config.seed, params.alpha, params.epsilon_tuning
    )
    try:
        ratio = steady_state_bound_for(scaled, reference) / steady_state_bound_for(net, reference, cert)
        relative = ratio / np.sqrt(10.0)
        outcome.summary["kappa_scaling"] = {"bound_ratio": ratio, "relative_to_sqrt10": relative}
        if not 1.0 / KAPPA_SCALING_FACTOR <= relative <= KAPPA_SCALING_FACTOR:
            outcome.fail("admm_kappa_scaling", abs(np.log(relative)))
    except ContractViolationError as exc:
        outcome.warn(f"kappa scaling skipped: {exc}")

    outcome.summary["certificate"] = {"c0": cert.c0, "K": cert.K, "L_V": cert.L_V, "kappa": net.kappa, "rho": net.step}
    if log_axis_ok([d for d in deltas]) and log_axis_ok(errors):
        outcome.plots["admm_tradeoff"] = PlotSpec(
            "delta", ["steady_state_error", "bound_value"], "Event-triggered ADMM", log_x=True, log_y=True
        )
    return outcome


# ---------------------------------------------------------------------------
# stability_scaling
# ---------------------------------------------------------------------------


def run_stability_scaling(params: StabilityScalingParams, config: ExperimentConfig, jobs: int) -> ExperimentOutcome:
    """Replace-one stability of gradient descent against its bound as n grows."""
    outcome = ExperimentOutcome("stability_scaling")
    policy = StepPolicy("constant")
    results = _pool_map(
        lambda n: run_stability_experiment(
            n,
            params.iters,
            policy,
            config.seed,
            "ridge",
            params.dim,
            params.lam,
            params.n_draws,
            params.n_probe,
            params.slack_delta,
        ),
        params.ns,
        jobs,
    )
    outcome.tables["stability_scaling"] = {
        "n": [r.n for r in results],
        "estimate": [r.estimate for r in results],
        "bound": [r.bound for r in results],
    }
    for i, r in enumerate(results):
        if not r.within_bound:
            outcome.fail("stability_bound", r.estimate - r.bound, i)
    if all(r.estimate > 0 for r in results):
        fit = fit_powerlaw([r.n for r in results], [r.estimate for r in results])
        outcome.summary["fit"] = fit._asdict()
        if abs(fit.slope + 1.0) > params.slope_tolerance:
            outcome.fail("stability_slope", abs(fit.slope + 1.0) - params.slope_tolerance)
        if fit.r2 < 0.9:
            outcome.fail("stability_r2", 0.9 - fit.r2)
    else:
        outcome.fail("stability_slope", 1.0)
    outcome.plots["stability_scaling"] = PlotSpec("n", ["estimate", "bound"], "Stability vs n", log_x=True, log_y=True)

    if params.include_convex:
        decaying = StepPolicy("decaying", params.convex_step_scale)
        convex = _pool_map(
            lambda iters: run_stability_experiment(
                params.convex_n,
                iters,
                decaying,
                config.seed,
                "logistic",
                params.dim,
                0.0,
                params.convex_draws,
                params.n_probe,
            ),
            params.convex_iters,
            jobs,
        )
        outcome.tables["stability_convex"] = {
            "iters": [r.iters for r in convex],
            "estimate": [r.estimate for r in convex],
            "bound": [r.bound for r in convex],
        }
        for i, r in enumerate(convex):
            if not r.within_bound:
                outcome.fail("stability_convex_bound", r.estimate - r.bound, i)
    outcome.summary["L_ell"] = results[0].L_ell
    return outcome


# ---------------------------------------------------------------------------
# privacy_utility
# ---------------------------------------------------------------------------


def _privacy_run(N: int, params: PrivacyUtilityParams, config: ExperimentConfig) -> Dict[str, float]:
    center = rng_stream(config.seed, 9).uniform(-1.0, 1.0, params.dim)
    problem = quadratic_problem(gamma=params.gamma, beta=params.beta, n=params.dim, center=center)
    h = horizon_tuned_step(params.gamma, params.beta, N)
    bundle = make_noisy_gd(problem, params.sigma2, h, region_radius=max(params.start_offset, 1e-3), seed=config.seed)
    sys, schedule = bundle.system, bundle.schedule
    z0 = problem.minimizer + params.start_offset / np.sqrt(params.dim)
    d0 = float(distance_to_equilibrium(sys, z0, bundle.metric))
    noise = gaussian_draws(params.sigma2, (N, config.n_mc, params.dim), config.seed, N)
    final = simulate_ensemble(sys, z0, noise)[-1]
    gaps = np.asarray(distance_to_equilibrium(sys, final, bundle.metric), dtype=float)
    cbar0 = (schedule.horizon_K + 1) * schedule.c0
    bound = stochastic_bound(cbar0, schedule, d0, bundle.constants["L_H"], params.sigma2, h, N)
    return {
        "N": N,
        "step": h,
        "mean_suboptimality": float(gaps.mean()),
        "half_width": float(ci_half_width(gaps, LOWER_CONFIDENCE)),
        "bound": bound,
        "sigma2_logN_over_N": params.sigma2 * np.log(N) / N,
    }


def run_privacy_utility(params: PrivacyUtilityParams, config: ExperimentConfig, jobs: int) -> ExperimentOutcome:
    """Last-iterate suboptimality of noisy GD, plain-vs-accelerated constants, and the stochastic recursion."""
    outcome = ExperimentOutcome("privacy_utility")
    rows = _pool_map(lambda N: _privacy_run(N, params, config), sorted(params.Ns), jobs)
    columns = ["N", "step", "mean_suboptimality", "half_width", "bound", "sigma2_logN_over_N"]
    outcome.tables["privacy_utility"] = {c: [r[c] for r in rows] for c in columns}
    for i, r in enumerate(rows):
        if r["mean_suboptimality"] - r["half_width"] > r["bound"]:
            outcome.fail("privacy_bound", r["mean_suboptimality"] - r["half_width"] - r["bound"], r["N"])
        if i and r["mean_suboptimality"] > rows[i - 1]["mean_suboptimality"]:
            outcome.fail("privacy_monotone", r["mean_suboptimality"] - rows[i - 1]["mean_suboptimality"], r["N"])
    fit = linear_fit_r2([r["sigma2_logN_over_N"] for r in rows], [r["mean_suboptimality"] for r in rows])
    outcome.summary["fit"] = fit._asdict()
    if fit.r2 < params.min_r2:
        outcome.fail("privacy_fit_r2", params.min_r2 - fit.r2)
    outcome.plots["privacy_utility"] = PlotSpec("N", ["mean_suboptimality", "bound"], "Noisy GD", log_x=True, log_y=True)

    constants = [privacy_bound_constants(params.gamma, params.gamma * kappa) for kappa in params.kappas]
    outcome.tables["privacy_constants"] = {
        "kappa": [c.kappa for c in constants],
        "plain": [c.plain for c in constants],
        "accelerated": [c.accelerated for c in constants],
        "ratio": [c.ratio for c in constants],
    }
    for i, c in enumerate(constants):
        if not c.kappa / 8.0 <= c.ratio <= 2.0 * c.kappa:
            outcome.fail("accelerated_ratio", c.ratio, i)
    if len(constants) >= 2:
        growth = (constants[-1].ratio / constants[0].ratio) / (constants[-1].kappa / constants[0].kappa)
        outcome.summary["ratio_growth_vs_kappa"] = growth
        if not 0.5 <= growth <= 2.0:
            outcome.fail("accelerated_ratio_scaling", abs(np.log(growth)))

    center = rng_stream(config.seed, 9).uniform(-1.0, 1.0, params.dim)
    problem = quadratic_problem(gamma=params.gamma, beta=params.beta, n=params.dim, center=center)
    bundle = make_noisy_gd(problem, params.sigma2, params.recursion_h, seed=config.seed)
    z0 = problem.minimizer + 0.5
    recursion = verify_stochastic_recursion(
        bundle.lyapunov("sum"), params.sigma2, z0, params.recursion_steps, params.recursion_n_mc, config.seed
    )
    outcome.tables["stochastic_recursion"] = {
        "k": [s.k for s in recursion.steps],
        "lhs_mean": [s.lhs_mean for s in recursion.steps],
        "half_width": [s.half_width for s in recursion.steps],
        "rhs": [s.rhs for s in recursion.steps],
        "slack": [s.slack for s in recursion.steps],
    }
    for s in recursion.steps:
        if not s.passed:
            outcome.fail("stochastic_recursion", -s.slack, s.k)
    return outcome


# ---------------------------------------------------------------------------
# small_gain
# ---------------------------------------------------------------------------


def run_small_gain(params: SmallGainParams, config: ExperimentConfig, jobs: int) -> ExperimentOutcome:
    """
    Strongly convex GD closed with the disturbance dynamics e' = rho e + coupling z.

    The storage |e| dissipates with a = 1 - rho and b = |coupling|. A feasible
    weight must give strictly decreasing W and convergence; the infeasible
    coupling must be reported as such.
    """
    outcome = ExperimentOutcome("small_gain")
    problem = quadratic_problem(gamma=params.gamma, beta=params.beta, n=1)
    bundle = make_gd_strongly_convex(problem)
    sys = bundle.system
    tau, L_V, L_e = bundle.constants["tau"], bundle.constants["L_V"], sys.gain(0)
    a = 1.0 - params.rho

    def feedback(coupling: float) -> DisturbanceSource:
        return DisturbanceSource(
            kind="feedback",
            dim=1,
            feedback_dynamics=lambda k, e, z: params.rho * e + coupling * z,
            e0=np.array([params.e0]),
        )

    cert = DissipationCertificate(norm_storage, a, abs(params.coupling))
    source = feedback(params.coupling)
    rng = rng_stream(config.seed, 61)
    samples = [(int(k), rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)) for k in rng.integers(0, 100, 200)]
    dissipation = check_dissipation(cert, source.feedback_dynamics, samples)
    if not dissipation.passed:
        outcome.fail("dissipation", dissipation.max_violation, dissipation.witness_k or 0)

    m = small_gain_certificate(L_V, L_e, tau, a, cert.b)
    outcome.summary["certificate"] = {"m": m, "a": a, "b": cert.b, "L_V": L_V, "L_e": L_e, "tau": tau}
    if m is None:
        outcome.fail("small_gain_feasible", 1.0)
    else:
        result = run_interconnection(
            sys, source, cert.with_weight(m), [params.z0], [params.e0], params.n_steps, bundle.lyapunov("sup"), m
        )
        outcome.tables["small_gain"] = {
            "k": list(range(params.n_steps + 1)),
            "W": result.W.tolist(),
            "joint_norm": result.joint_norm.tolist(),
        }
        for k in result.violations:
            outcome.fail("small_gain_decrease", float(result.W[k + 1] - result.W[k]), k)
        if result.joint_norm[-1] > params.target_norm:
            outcome.fail("small_gain_convergence", float(result.joint_norm[-1]) - params.target_norm, params.n_steps)
        outcome.summary["final_joint_norm"] = float(result.joint_norm[-1])
        outcome.plots["small_gain"] = PlotSpec("k", ["W", "joint_norm"], "Small-gain interconnection", log_y=True)

    infeasible = small_gain_certificate(L_V, L_e, tau, a, abs(params.infeasible_coupling))
    outcome.summary["infeasible_certificate"] = infeasible
    if infeasible is not None:
        outcome.fail("small_gain_infeasible", infeasible)

    static = DisturbanceSource(kind="static_map", dim=1, gain=params.static_gain, equilibrium=sys.equilibrium)
    trajectory = simulate(sys, [params.z0], params.n_steps, as_disturbance_fn(static))
    outcome.tables["static_map"] = {
        "k": list(range(params.n_steps + 1)),
        "distance": trajectory.metric_values.tolist(),
    }
    outcome.summary["static_map_final"] = float(trajectory.metric_values[-1])
    return outcome


EXPERIMENTS: Dict[str, Callable[[Any, ExperimentConfig, int], ExperimentOutcome]] = {
    "lyapunov_audit": run_lyapunov_audit,
    "bound_check": run_bound_check,
    "admm_tradeoff": run_admm_tradeoff,
    "stability_scaling": run_stability_scaling,
    "privacy_utility": run_privacy_utility,
    "small_gain": run_small_gain,
}


def execute(config: ExperimentConfig, jobs: int = 1) -> ExperimentOutcome:
    """Run the configured experiment without writing anything."""
    if jobs < 1:
        raise InputError(f"jobs must be positive, got {jobs}")
    params = config.typed_parameters()
    logger.info("Running %s (seed %d)", config.experiment, config.seed)
    outcome = EXPERIMENTS[config.experiment](params, config, jobs)
    logger.info("%s finished with %d violations", config.experiment, len(outcome.violations))
    return outcome


def write_outputs(config: ExperimentConfig, outcome: ExperimentOutcome, strict: bool = False) -> RunManifest:
    """
    Write tables, summary, violations and charts, then the manifest.

    Returns:
        The RunManifest also saved as manifest.json
    """
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    for name, table in sorted(outcome.tables.items()):
        written.append(emit_csv(table, root / f"{name}.csv"))
        plot = outcome.plots.get(name)
        if config.render_plots and plot is not None:
            ok_x = not plot.log_x or log_axis_ok(table[plot.x])
            ok_y = not plot.log_y or all(log_axis_ok(table[y]) for y in plot.ys)
            chart = root / f"{name}.svg"
            written.append(
                render_line_chart(table, plot.x, plot.ys, chart, plot.title, plot.log_x and ok_x, plot.log_y and ok_y)
            )
    passed = outcome.passed and not (strict and outcome.warnings)
    summary = {
        "experiment": outcome.experiment,
        "passed": passed,
        "results": outcome.summary,
        "violations": violation_summary(outcome.violations),
        "warnings": list(outcome.warnings),
    }
    written.append(write_json(summary, root / "summary.json"))
    if outcome.violations:
        written.append(write_json([v.model_dump() for v in outcome.violations], root / "violations.json"))
    manifest = build_manifest(config, written, root, len(outcome.violations), len(outcome.warnings), strict)
    write_json(manifest.model_dump(), root / "manifest.json")
    return manifest


def run_experiment(config: ExperimentConfig, jobs: int = 1, strict: bool = False) -> RunManifest:
    """Execute the experiment, write its outputs and return the manifest."""
    return write_outputs(config, execute(config, jobs), strict)
