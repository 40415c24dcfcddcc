from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.settings import settings


class _Block(BaseModel):
    """Config blocks reject keys the loader did not already strip."""
    model_config = ConfigDict(extra="forbid")


# =============================================================================
# CONFIGURATION BLOCKS
# =============================================================================

class ModelBlock(_Block):
    """Physics coefficients; never defaulted. beta = 0 needs linear = true."""
    alpha: float
    beta: float
    m: float
    linear: bool = False

    @field_validator("alpha")
    @classmethod
    def alpha_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("alpha must be positive (theorem hypothesis alpha > 0)")
        return value

    @field_validator("beta")
    @classmethod
    def beta_nonnegative(cls, value: float) -> float:
        if not value >= 0:
            raise ValueError("beta must be nonnegative")
        return value

    @field_validator("m")
    @classmethod
    def m_superlinear(cls, value: float) -> float:
        if not value > 1:
            raise ValueError(f"m = {value} violates the theorem hypothesis m > 1")
        return value

    @model_validator(mode="after")
    def beta_matches_linear(self) -> "ModelBlock":
        if self.linear and self.beta != 0:
            raise ValueError(f"linear = true requires beta = 0, got beta = {self.beta}")
        if not self.linear and self.beta == 0:
            raise ValueError("beta = 0 violates the theorem hypothesis beta > 0; set linear = true for the linear reference")
        return self


class GridBlock(_Block):
    """Interval (0, length) with n interior nodes"""
    length: float = Field(default=1.0, gt=0)
    n: int = Field(default=100, ge=2)


class InitialBlock(_Block):
    """Named initial-data preset; preset and amplitude are required"""
    preset: str
    amplitude: float
    mode: int = Field(default=1, ge=1)


class NoiseBlock(_Block):
    """Noise family and preset parameters"""
    kind: Literal["none", "additive", "multiplicative"] = "none"
    preset: str = "zero"
    sigma_scale: float = 0.0
    eta_scale: float = 0.0
    decay_rate: float = Field(default=1.0, ge=0)
    mode: int = Field(default=1, ge=1)
    decay_horizon: Optional[float] = Field(default=None, gt=0)
    sigma: float = 0.0
    eta_profile: str = "zero"


class LevyBlock(_Block):
    """Levy measure: a list of [mark, rate] atoms or a truncated stable density"""
    kind: Literal["none", "atoms", "truncated_stable"] = "none"
    atoms: List[Tuple[float, float]] = Field(default_factory=list)
    c: Optional[float] = None
    alpha_stab: Optional[float] = None
    r_min: Optional[float] = None
    r_max: Optional[float] = None


class SchemeBlock(_Block):
    dt: float = Field(default=settings.DEFAULT_DT, gt=0)
    jump_mode: Literal["fixed_grid", "jump_adapted"] = "jump_adapted"
    blowup_threshold: float = Field(default=settings.DEFAULT_BLOWUP_THRESHOLD, gt=0)
    max_halvings: int = Field(default=settings.DEFAULT_MAX_HALVINGS, ge=0)


class EnsembleBlock(_Block):
    paths: int = Field(default=settings.DEFAULT_PATHS, ge=1)
    master_seed: int = Field(default=settings.DEFAULT_MASTER_SEED, ge=0, lt=2 ** 64)
    horizon: float = Field(default=1.0, gt=0)
    record_stride: int = Field(default=settings.DEFAULT_RECORD_STRIDE, ge=1)
    threads: int = Field(default=1, ge=1)
    ms_threshold: float = Field(default=settings.DEFAULT_MS_THRESHOLD, gt=0)


class CriterionBlock(_Block):
    use_continuum_eigenvalue: bool = True
    K: Optional[float] = Field(default=None, gt=0)


class SweepBlock(_Block):
    """Sweep axes; the phase table is their cartesian product"""
    amplitudes: List[float] = Field(default_factory=list)
    noise_scales: List[float] = Field(default_factory=list)
    kappas: List[float] = Field(default_factory=list)
    simulate: bool = True


class VerifyBlock(_Block):
    """Sample sizes of the oracle suite"""
    paths: int = Field(default=2000, ge=2)
    martingale_streams: int = Field(default=10000, ge=2)
    scalar_paths: int = Field(default=100000, ge=2)
    taylor_samples: int = Field(default=1000, ge=1)
    horizon: float = Field(default=0.5, gt=0)


class OutputBlock(_Block):
    directory: str = "runs"
    formats: List[Literal["csv", "json", "svg", "md"]] = Field(
        default_factory=lambda: ["csv", "json", "svg", "md"]
    )


class ExperimentConfig(_Block):
    """Validated experiment configuration"""
    schema_version: int
    model: ModelBlock
    grid: GridBlock = Field(default_factory=GridBlock)
    initial: InitialBlock
    noise: NoiseBlock = Field(default_factory=NoiseBlock)
    levy: LevyBlock = Field(default_factory=LevyBlock)
    scheme: SchemeBlock = Field(default_factory=SchemeBlock)
    ensemble: EnsembleBlock = Field(default_factory=EnsembleBlock)
    criterion: CriterionBlock = Field(default_factory=CriterionBlock)
    sweep: SweepBlock = Field(default_factory=SweepBlock)
    verify: VerifyBlock = Field(default_factory=VerifyBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)


# =============================================================================
# ERROR MODELS
# =============================================================================

class SimulationError(BaseModel):
    """Structure for service errors"""
    type: Literal["validation_error", "oracle_failure", "runtime_failure", "not_evaluable"]
    message: str


# =============================================================================
# REPORT MODELS
# =============================================================================

class CriterionComponents(BaseModel):
    """Additive pieces of the criterion left-hand side"""
    gradient_term: float
    nonlinear_term: float
    noise_term: float = 0.0
    kappa_term: float = 0.0

    def total(self) -> float:
        return self.gradient_term + self.nonlinear_term + self.noise_term + self.kappa_term


class CriterionReport(BaseModel):
    """Blow-up criterion evaluated on the initial data"""
    mode: Literal["additive", "multiplicative"]
    components: CriterionComponents
    lhs: Optional[float]
    verdict: Literal["blow-up-predicted", "not-predicted", "not-evaluable"]
    hypotheses_ok: bool
    lambda_1: float
    v0: float
    epsilon: float
    delta: float
    flat_energy_limit: float = 0.0
    grad_energy: float = 0.0
    kappa: Optional[float] = None
    kappa_window_ok: Optional[bool] = None
    kappa_margin: Optional[float] = None
    K_min: Optional[float] = None
    K: Optional[float] = None
    tstar_bound: Optional[float] = None
    message: Optional[str] = None

    @property
    def predicted(self) -> bool:
        return self.verdict == "blow-up-predicted"


class BalanceReport(BaseModel):
    """Comparison of the two sides of an energy balance on an ensemble"""
    identity_name: str
    times: List[float]
    lhs_series: List[float]
    rhs_series: List[float]
    max_abs_gap: float
    tolerance: float
    passed: bool
    statistical_error: float
    discretization_error: float
    relation: Literal["equality", "inequality"] = "equality"
    excluded_after: Optional[float] = None


class MartingaleCheck(BaseModel):
    name: str
    times: List[float]
    means: List[float]
    standard_errors: List[float]
    passed: bool
    variances: Optional[List[float]] = None
    expected_variances: Optional[List[float]] = None
    variance_standard_errors: Optional[List[float]] = None


class MartingaleReport(BaseModel):
    streams: int
    checks: List[MartingaleCheck]
    passed: bool


class ScalarMomentReport(BaseModel):
    """E[U(t)^2] of the scalar linear jump SDE against U0^2 exp(2 kappa t)"""
    kappa: float
    times: List[float]
    means: List[float]
    standard_errors: List[float]
    expected: List[float]
    expected_discrete: List[float]
    passed: bool


class TaylorCheckReport(BaseModel):
    samples: int
    max_relative_residual: float
    failures: int
    passed: bool


class EnsembleSummary(BaseModel):
    """JSON summary written next to the ensemble CSV"""
    config_hash: str
    schema_version: int
    paths: int
    horizon: float
    blowup_count: int
    censored_count: int
    tau_ms: Optional[float] = None
    trigger: Optional[Literal["confidence_bound", "blowup_fraction"]] = None
    tau_samples: List[Optional[float]] = Field(default_factory=list)
    tstar_bound: Optional[float] = None
    tstar_consistent: Optional[bool] = None
    ratio_violation_time: Optional[float] = None


class VerificationSummary(BaseModel):
    config_hash: str
    schema_version: int
    balances: List[BalanceReport]
    martingales: Optional[MartingaleReport] = None
    scalar_moments: List[ScalarMomentReport] = Field(default_factory=list)
    taylor: Optional[TaylorCheckReport] = None
    passed: bool


class SweepCell(BaseModel):
    amplitude: float
    noise_scale: Optional[float] = None
    kappa: Optional[float] = None
    lhs: Optional[float] = None
    verdict: Optional[str] = None
    blowup_fraction: Optional[float] = None
    tau_ms: Optional[float] = None
    error: Optional[str] = None


class SweepTable(BaseModel):
    config_hash: str
    schema_version: int
    cells: List[SweepCell]


class ConvergenceRow(BaseModel):
    dt: float
    h: float
    paths: int
    value: float
    standard_error: float
    error: Optional[float] = None
    observed_order: Optional[float] = None
    tau_ms: Optional[float] = None


class CommandResult(BaseModel):
    """Outcome of one command: where its files went and whether its checks held"""
    command: Literal["criterion", "simulate", "ensemble", "verify", "sweep"]
    run_directory: str
    files: Dict[str, str] = Field(default_factory=dict)
    passed: bool = True
    table: List[List[str]] = Field(default_factory=list)
