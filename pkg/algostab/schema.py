"""
Record and Configuration Schema

Pydantic models for everything the toolkit validates or serializes: box regions,
verification reports, experiment configurations and run manifests. Numerical
objects that carry callables (systems, metrics, schedules) live in their own
modules as dataclasses.
"""

from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from algostab.errors import InputError


class Region(BaseModel):
    """
    Axis-aligned box used for the state set S and the disturbance set Omega.

    Attributes:
        lower: Componentwise lower corner
        upper: Componentwise upper corner
    """

    model_config = ConfigDict(frozen=True)

    lower: List[float] = Field(..., min_length=1, description="Lower corner")
    upper: List[float] = Field(..., min_length=1, description="Upper corner")

    @model_validator(mode="after")
    def validate_corners(self):
        """Validate that the corners have equal length and lower <= upper."""
        if len(self.lower) != len(self.upper):
            raise ValueError(f"lower has {len(self.lower)} entries but upper has {len(self.upper)}")
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo > hi:
                raise ValueError(f"lower[{i}]={lo} exceeds upper[{i}]={hi}")
        return self

    @classmethod
    def box(cls, center: Sequence[float], radius: float) -> "Region":
        """Box of half-width `radius` around `center`."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(lower=(c - radius).tolist(), upper=(c + radius).tolist())

    @classmethod
    def disturbance_set(cls, dim: int, radius: float) -> "Region":
        """Symmetric box [-radius, radius]^dim; always contains the origin."""
        return cls.box(np.zeros(dim), radius)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def as_arrays(self):
        return np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)

    @property
    def diameter(self) -> float:
        lo, hi = self.as_arrays()
        return float(np.linalg.norm(hi - lo))

    def contains(self, x, tol: float = 0.0) -> bool:
        lo, hi = self.as_arrays()
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))

    def contains_origin(self) -> bool:
        return self.contains(np.zeros(self.dim))

    def require_origin(self) -> "Region":
        """Return self, raising InputError if the box misses the origin."""
        if not self.contains_origin():
            raise InputError("disturbance region must contain the origin")
        return self

    def max_distance_from(self, point) -> float:
        """Largest Euclidean distance from `point` to any point of the box."""
        lo, hi = self.as_arrays()
        p = np.asarray(point, dtype=float)
        far = np.maximum(np.abs(lo - p), np.abs(hi - p))
        return float(np.linalg.norm(far))


class Violation(BaseModel):
    """A single failed inequality, with the index and sample that witnessed it."""

    check: str = Field(..., description="Name of the failed check")
    k: int = Field(..., description="Iteration index of the failure")
    excess: float = Field(..., description="Amount by which the inequality failed")
    witness: Optional[List[float]] = Field(None, description="Offending state, if any")

    def __str__(self) -> str:
        return f"{self.check}: k={self.k} excess={self.excess:.6g}"


class AxiomReport(BaseModel):
    """Maximum sampled violation of each pseudometric axiom."""

    identity: float = 0.0
    symmetry: float = 0.0
    triangle: float = 0.0
    norm_bound: float = 0.0
    nonnegativity: float = 0.0
    n_samples: int = 0

    def passed(self, tol: float = 1e-9) -> bool:
        return max(self.identity, self.symmetry, self.triangle, self.norm_bound, self.nonnegativity) <= tol

    def failed_axioms(self, tol: float = 1e-9) -> List[str]:
        values = {
            "identity": self.identity,
            "symmetry": self.symmetry,
            "triangle": self.triangle,
            "norm_bound": self.norm_bound,
            "nonnegativity": self.nonnegativity,
        }
        return [f"axiom_violated: {name} ({value:.3g})" for name, value in values.items() if value > tol]


class ConsistencyReport(BaseModel):
    """Sampled gaps of g_k(z, 0) = f_k(z) and f_k(x*) = x*."""

    max_disturbed_gap: float
    max_fixed_point_gap: float
    n_samples: int
    passed: bool


class SandwichReport(BaseModel):
    """Sampled check of d(xi, x*) <= V(k, xi) <= c * d(xi, x*)."""

    lower_max_violation: float
    upper_max_violation: float
    c_upper: float
    n_samples: int
    max_argmax_index: Optional[int] = None
    witness_k: Optional[int] = None
    witness_xi: Optional[List[float]] = None
    tolerance: float = 1e-9

    @property
    def max_violation(self) -> float:
        return max(self.lower_max_violation, self.upper_max_violation)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


class DecreaseReport(BaseModel):
    """Sampled check of a (possibly perturbed) Lyapunov decrease inequality."""

    max_violation: float = Field(..., description="Largest raw excess over the right-hand side")
    max_relative_violation: float = Field(..., description="Largest excess divided by 1 + V(k, xi)")
    n_samples: int
    witness_k: Optional[int] = None
    witness_xi: Optional[List[float]] = None
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return self.max_relative_violation <= self.tolerance


class StochasticDecreaseReport(BaseModel):
    """Monte Carlo check of E V(k+1, z') <= tau(k) V(k, z) + noise term at the worst sample."""

    k: int
    lhs_mean: float
    half_width: float
    rhs: float
    slack: float = Field(..., description="rhs - (lhs_mean - half_width); negative means violated")
    n_mc: int
    n_points: int = 1
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tolerance * (1.0 + abs(self.rhs))


class StochasticRecursionReport(BaseModel):
    """Per-step expected decrease checks along a noisy ensemble."""

    steps: List[StochasticDecreaseReport] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(step.passed for step in self.steps)


class DissipationReport(BaseModel):
    """Sampled check of V_D(k+1, D(e, z)) - V_D(k, e) <= -a|e| + b|z|."""

    max_violation: float
    zero_storage_violation: float
    n_samples: int
    witness_k: Optional[int] = None
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance and self.zero_storage_violation <= self.tolerance


class BoundReport(BaseModel):
    """
    A theoretical bound series paired with empirical trajectory statistics.

    Attributes:
        bound_series: Theoretical bound at each k
        empirical_series: d(z_k, x*) of one trajectory, ensemble worst case, or Monte Carlo mean
        violations: Every k where the empirical side exceeds the bound
        constants_used: Constants the bound was evaluated with
        constants_source: "analytic" or "empirical" (inflated sampled estimates)
    """

    bound_series: List[float]
    empirical_series: List[float]
    violations: List[Violation] = Field(default_factory=list)
    constants_used: Dict[str, Any] = Field(default_factory=dict)
    constants_source: Literal["analytic", "empirical"] = "analytic"

    @field_validator("bound_series")
    @classmethod
    def validate_nonnegative(cls, v: List[float]) -> List[float]:
        """Validate the bound series is nonnegative."""
        if any(value < 0 for value in v):
            raise ValueError("bound_series must be nonnegative")
        return v

    @property
    def passed(self) -> bool:
        return len(self.violations) == 0

    def to_table(self) -> Dict[str, List[float]]:
        return {
            "k": list(range(len(self.bound_series))),
            "bound": list(self.bound_series),
            "empirical": list(self.empirical_series),
        }


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


class ScheduleSpec(BaseModel):
    """Rate schedule as written in config files."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant", "example25", "custom-table", "convex_slack"]
    tau: Optional[float] = Field(None, ge=0, le=1, description="Constant rate")
    table: Optional[List[float]] = Field(None, description="Per-index rates; last value repeats")
    exponent: float = Field(0.5, gt=0, description="Exponent c of the convex slack schedule")
    c0: float = Field(1.0, gt=0)
    horizon_K: int = Field(1, ge=0)

    @model_validator(mode="after")
    def validate_kind_parameters(self):
        if self.kind == "constant" and self.tau is None:
            raise ValueError("constant schedule requires tau")
        if self.kind == "custom-table" and not self.table:
            raise ValueError("custom-table schedule requires a nonempty table")
        return self


class FeedbackSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rho: float = Field(..., ge=0, description="Self-coupling of the disturbance state")
    gain: float = Field(..., description="Coupling from the algorithm state")


class StaticMapSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gain: float


class DisturbanceSpec(BaseModel):
    """Disturbance generator as written in config files."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["zero", "constant_vector", "worst_case_sign", "uniform_ball", "gaussian", "feedback", "static_map"]
    delta: float = Field(0.0, ge=0, description="Bound on |e_k| for bounded kinds")
    sigma2: float = Field(0.0, ge=0, description="E|n|^2 for the gaussian kind")
    seed: int = Field(0, ge=0)
    vector: Optional[List[float]] = None
    feedback: Optional[FeedbackSpec] = None
    static_map: Optional[StaticMapSpec] = None

    @model_validator(mode="after")
    def validate_kind_parameters(self):
        if self.kind == "feedback" and self.feedback is None:
            raise ValueError("feedback disturbance requires a 'feedback' block")
        if self.kind == "static_map" and self.static_map is None:
            raise ValueError("static_map disturbance requires a 'static_map' block")
        if self.kind == "constant_vector" and not self.vector:
            raise ValueError("constant_vector disturbance requires 'vector'")
        return self


class FactorySpec(BaseModel):
    """Algorithm factory selection: {algo, gamma, beta, sigma2, h, n, seed}."""

    model_config = ConfigDict(extra="forbid")

    algo: Literal["gd_convex", "gd_strongly_convex", "noisy_gd", "accelerated_gd"]
    gamma: float = Field(1.0, ge=0, description="Smallest Hessian eigenvalue of the test quadratic")
    beta: float = Field(3.0, gt=0, description="Largest Hessian eigenvalue")
    sigma2: float = Field(0.0, ge=0)
    h: Optional[float] = Field(None, gt=0, description="Step size; factory default when absent")
    n: int = Field(1, ge=1, description="State dimension of the test quadratic")
    seed: int = Field(0, ge=0)
    region_radius: float = Field(1.0, gt=0, description="Half-width of the sample box around x*")

    @model_validator(mode="after")
    def validate_moduli(self):
        if self.gamma > self.beta:
            raise ValueError(f"gamma={self.gamma} exceeds beta={self.beta}")
        return self


def _default_audit_factories() -> List[FactorySpec]:
    return [
        FactorySpec(algo="gd_convex", gamma=0.1, beta=2.0, n=2),
        FactorySpec(algo="gd_strongly_convex", gamma=1.0, beta=3.0, n=2),
        FactorySpec(algo="noisy_gd", gamma=1.0, beta=3.0, sigma2=0.01, h=0.5, n=2),
        FactorySpec(algo="accelerated_gd", gamma=1.0, beta=4.0, h=1.0, n=2),
    ]


class LyapunovAuditParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    factories: List[FactorySpec] = Field(default_factory=_default_audit_factories, min_length=1)
    n_samples: int = Field(500, ge=1)
    k_max: int = Field(50, ge=0)
    n_pairs: int = Field(2000, ge=1)
    disturbance_radius: float = Field(0.1, gt=0)
    lv_slack: float = Field(1.05, ge=1)
    include_sum_form: bool = True
    stochastic_points: int = Field(5, ge=0)
    stochastic_n_mc: int = Field(10_000, ge=2)


class BoundCheckParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    factory: FactorySpec = Field(default_factory=lambda: FactorySpec(algo="gd_strongly_convex", gamma=1.0, beta=3.0))
    disturbance: DisturbanceSpec = Field(default_factory=lambda: DisturbanceSpec(kind="worst_case_sign", delta=0.1))
    schedule: Optional[ScheduleSpec] = None
    n_steps: int = Field(50, ge=1)
    z0_offset: float = Field(1.0, description="Initial distance from x* along the first axis")
    n_random: int = Field(1000, ge=0, description="Random bounded-disturbance trajectories")


class AdmmTradeoffParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_agents: int = Field(5, ge=1)
    dim: int = Field(2, ge=1)
    gamma: float = Field(1.0, gt=0, description="Per-agent strong convexity")
    beta: float = Field(10.0, gt=0, description="Per-agent smoothness")
    alpha: float = Field(1.0, gt=0, lt=2)
    epsilon_tuning: float = Field(0.0, ge=0)
    deltas: List[float] = Field(default_factory=lambda: [1e-3, 1e-2, 1e-1], min_length=1)
    iters: int = Field(200, ge=1)
    n_starts: int = Field(16, ge=1)
    start_scale: List[float] = Field(default_factory=lambda: [1.0, 10.0], min_length=2, max_length=2)
    jitter: float = Field(0.05, ge=0)
    slope_tolerance: float = Field(0.3, gt=0)

    @field_validator("deltas")
    @classmethod
    def validate_deltas(cls, v: List[float]) -> List[float]:
        if any(d < 0 for d in v):
            raise ValueError("deltas must be nonnegative")
        return v


class StabilityScalingParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ns: List[int] = Field(default_factory=lambda: [50, 100, 200, 400, 800, 1600], min_length=3)
    dim: int = Field(5, ge=1)
    lam: float = Field(0.1, gt=0, description="Ridge regularization (strong convexity)")
    iters: int = Field(200, ge=1)
    n_draws: int = Field(100, ge=1)
    slack_delta: float = Field(0.5, gt=0, le=1)
    n_probe: int = Field(64, ge=1)
    slope_tolerance: float = Field(0.15, gt=0)
    include_convex: bool = True
    convex_n: int = Field(200, ge=2)
    convex_iters: List[int] = Field(default_factory=lambda: [10, 40, 160], min_length=1)
    convex_step_scale: float = Field(1.0, gt=0)
    convex_draws: int = Field(20, ge=1)


class PrivacyUtilityParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(1.0, gt=0)
    beta: float = Field(3.0, gt=0)
    sigma2: float = Field(0.01, gt=0)
    Ns: List[int] = Field(default_factory=lambda: [250, 500, 1000, 2000], min_length=3)
    dim: int = Field(4, ge=1)
    start_offset: float = Field(0.1, ge=0)
    recursion_steps: int = Field(20, ge=1)
    recursion_n_mc: int = Field(10_000, ge=2)
    recursion_h: float = Field(0.5, gt=0)
    kappas: List[float] = Field(default_factory=lambda: [100.0, 400.0], min_length=1)
    min_r2: float = Field(0.9, ge=0, le=1)


class SmallGainParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(1.0, gt=0)
    beta: float = Field(3.0, gt=0)
    rho: float = Field(0.5, ge=0, lt=1)
    coupling: float = Field(0.01, gt=0)
    infeasible_coupling: float = Field(0.6, gt=0)
    static_gain: float = Field(0.01)
    n_steps: int = Field(100, ge=1)
    z0: float = 1.0
    e0: float = 0.0
    target_norm: float = Field(1e-8, gt=0)


PARAMETER_MODELS = {
    "lyapunov_audit": LyapunovAuditParams,
    "bound_check": BoundCheckParams,
    "admm_tradeoff": AdmmTradeoffParams,
    "stability_scaling": StabilityScalingParams,
    "privacy_utility": PrivacyUtilityParams,
    "small_gain": SmallGainParams,
}

ExperimentName = Literal[
    "lyapunov_audit", "bound_check", "admm_tradeoff", "stability_scaling", "privacy_utility", "small_gain"
]


class ExperimentConfig(BaseModel):
    """
    A single experiment run.

    Attributes:
        experiment: Which study to run
        parameters: Experiment-specific record, validated against its parameter model
        seed: Master seed; every random stream derives from it
        output_dir: Directory receiving CSV, JSON and optional SVG outputs
        n_mc: Monte Carlo ensemble size
        render_plots: Also write SVG line charts for emitted tables
    """

    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentName
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(..., ge=0, description="Master seed (runs are never unseeded)")
    output_dir: str = Field("results", min_length=1)
    n_mc: int = Field(200, ge=1)
    render_plots: bool = False

    @model_validator(mode="after")
    def validate_parameters(self):
        """Validate the parameter record against the experiment's model."""
        PARAMETER_MODELS[self.experiment].model_validate(self.parameters)
        return self

    def typed_parameters(self) -> BaseModel:
        return PARAMETER_MODELS[self.experiment].model_validate(self.parameters)


class OutputRecord(BaseModel):
    path: str
    sha256: str


class RunManifest(BaseModel):
    """Reproducibility manifest written next to every run's outputs."""

    experiment: str
    config_hash: str
    toolkit_version: str
    outputs: List[OutputRecord] = Field(default_factory=list)
    passed: bool = True
    violation_count: int = 0
    warning_count: int = 0
