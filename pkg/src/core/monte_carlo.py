"""
Monte Carlo
Ensemble orchestration over independent paths: censored estimates of
E|u(t)|^2 and companion norms, blow-up statistics, mean-square blow-up
detection, refinement studies and threshold sensitivity.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config.settings import settings
from src.core.grid_domain import Field, IntervalGrid, l2_squared
from src.core.levy_noise import LevyMeasureSpec, path_stream, sample_jumps
from src.core.spde_integrator import (
    JumpMode, ModelParams, Noise, Probe, StepScheme, TrajectoryRecord,
    base_time_grid, integrate_on_grid, simulate_path
)
from src.models.core_models import ConvergenceRow
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

_PROGRESS_BLOCK = 500


@dataclass(frozen=True)
class EnsembleConfig:
    paths: int
    master_seed: int
    scheme: StepScheme
    horizon: float
    blowup_threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD
    threads: int = 1
    keep_records: bool = False

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError(f"Ensemble needs at least one path, got {self.paths}")
        if self.threads < 1:
            raise ValueError(f"threads must be at least 1, got {self.threads}")
        if not self.horizon > 0:
            raise ValueError(f"Horizon must be positive, got {self.horizon}")

    @property
    def record_stride(self) -> int:
        return self.scheme.record_stride

    def record_times(self) -> np.ndarray:
        """Base-grid times at which every path logs its norms."""
        times, _ = base_time_grid(self.scheme.dt, self.horizon)
        count = len(times) - 1
        keep = [0] + [k for k in range(1, count + 1) if k % self.record_stride == 0 or k == count]
        return times[keep]


@dataclass
class SeriesEstimate:
    mean: np.ndarray
    se: np.ndarray


@dataclass
class EnsembleEstimate:
    """
    Censored ensemble statistics on the record times.

    A path contributes at time t only while t < tau for that path; counts
    holds the number of contributing paths per time.
    """
    times: np.ndarray
    counts: np.ndarray
    v: SeriesEstimate
    g: SeriesEstimate
    p: SeriesEstimate
    blowup_fraction: np.ndarray
    tau_samples: List[Optional[float]]
    extras: Dict[str, SeriesEstimate] = field(default_factory=dict)
    failures: Dict[int, str] = field(default_factory=dict)
    records: Optional[List[TrajectoryRecord]] = None

    @property
    def paths(self) -> int:
        return len(self.tau_samples)

    @property
    def blowup_count(self) -> int:
        return sum(tau is not None for tau in self.tau_samples)

    @property
    def censored_count(self) -> int:
        """Paths whose data stops before the horizon."""
        return int(self.paths - self.counts[-1])

    def rows(self) -> List[Tuple[float, float, float, float, float, float]]:
        return [
            (float(t), float(vm), float(vs), float(gm), float(pm), float(bf))
            for t, vm, vs, gm, pm, bf in zip(
                self.times, self.v.mean, self.v.se, self.g.mean, self.p.mean, self.blowup_fraction
            )
        ]


@dataclass(frozen=True)
class MeanSquareBlowup:
    tau_ms: float
    trigger: str


# =============================================================================
# AGGREGATION
# =============================================================================

def _censored_moments(columns: List[np.ndarray], width: int) -> Tuple[SeriesEstimate, np.ndarray]:
    """Per-time mean and standard error over the paths that reach that time."""
    means = np.full(width, np.nan)
    errors = np.full(width, np.nan)
    counts = np.zeros(width, dtype=int)
    for j in range(width):
        sample = [float(series[j]) for series in columns if j < len(series)]
        count = len(sample)
        counts[j] = count
        if count == 0:
            continue
        mean = math.fsum(sample) / count
        means[j] = mean
        if count > 1:
            variance = math.fsum((x - mean) ** 2 for x in sample) / (count - 1)
            errors[j] = math.sqrt(variance / count)
        else:
            errors[j] = 0.0
    return SeriesEstimate(means, errors), counts


def run_ensemble(
    config: EnsembleConfig,
    params: ModelParams,
    noise: Noise,
    levy: Optional[LevyMeasureSpec],
    u0: Field,
    probes: Optional[Dict[str, Probe]] = None,
) -> EnsembleEstimate:
    """
    Simulate config.paths independent paths and aggregate them in path order.

    Path i draws from the stream keyed by (master_seed, i), so the estimate is
    bitwise independent of the worker count.
    """
    record_times = config.record_times()
    width = len(record_times)
    failures: Dict[int, str] = {}

    def run_one(index: int) -> Optional[TrajectoryRecord]:
        try:
            return simulate_path(
                params, noise, levy, u0, config.scheme, config.horizon,
                config.blowup_threshold, path_stream(config.master_seed, index), probes
            )
        except Exception as exc:
            logger.error(f"Path {index} failed: {exc}", exc_info=True)
            failures[index] = str(exc)
            return None

    logger.info(f"Running ensemble of {config.paths} paths on {config.threads} thread(s)")
    records: List[Optional[TrajectoryRecord]] = []
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        for index, record in enumerate(pool.map(run_one, range(config.paths))):
            records.append(record)
            if (index + 1) % _PROGRESS_BLOCK == 0:
                logger.info(f"Completed {index + 1}/{config.paths} paths")

    def columns(name: str) -> List[np.ndarray]:
        return [record.grid_series(name) if record else np.empty(0) for record in records]

    v, counts = _censored_moments(columns("l2sq"), width)
    g, _ = _censored_moments(columns("h1sq"), width)
    p, _ = _censored_moments(columns("lmp1"), width)
    extras = {name: _censored_moments(columns(name), width)[0] for name in (probes or {})}

    tau_samples = [
        record.blowup.tau if record is not None and record.blowup.detected else None
        for record in records
    ]
    blown = np.array([tau for tau in tau_samples if tau is not None], dtype=float)
    blowup_fraction = np.array(
        [np.count_nonzero(blown <= t) / config.paths for t in record_times], dtype=float
    )
    if blown.size:
        logger.info(f"{blown.size}/{config.paths} paths blew up (first at t={blown.min():.6g})")

    return EnsembleEstimate(
        times=record_times,
        counts=counts,
        v=v,
        g=g,
        p=p,
        blowup_fraction=blowup_fraction,
        tau_samples=tau_samples,
        extras=extras,
        failures=dict(sorted(failures.items())),
        records=records if config.keep_records else None,
    )


def detect_mean_square_blowup(
    estimate: EnsembleEstimate,
    ms_threshold: float = settings.DEFAULT_MS_THRESHOLD,
    z: float = settings.CONFIDENCE_Z,
) -> Optional[MeanSquareBlowup]:
    """
    Earliest of two triggers: the lower confidence bound of v exceeding the
    threshold, or the first record time at which half of the paths have
    blown up.
    """
    candidates = []
    lower = estimate.v.mean - z * estimate.v.se
    crossing = np.flatnonzero((estimate.counts > 0) & (lower > ms_threshold))
    if crossing.size:
        candidates.append((float(estimate.times[crossing[0]]), 1, "confidence_bound"))

    majority = np.flatnonzero(estimate.blowup_fraction >= 0.5)
    if majority.size:
        candidates.append((float(estimate.times[majority[0]]), 0, "blowup_fraction"))

    if not candidates:
        return None
    tau_ms, _, trigger = min(candidates)
    return MeanSquareBlowup(tau_ms=tau_ms, trigger=trigger)


# =============================================================================
# STUDIES
# =============================================================================

@dataclass(frozen=True)
class Refinement:
    dt: float
    n: int
    paths: int


ReferenceValue = Union[float, Callable[[float, IntervalGrid], float]]


def _observed_order(previous: ConvergenceRow, current: ConvergenceRow) -> Optional[float]:
    if previous.dt != current.dt:
        base, ratio = (previous.error, current.error), previous.dt / current.dt
    elif previous.h != current.h:
        base, ratio = (previous.error, current.error), previous.h / current.h
    elif previous.paths != current.paths:
        base, ratio = (previous.standard_error, current.standard_error), current.paths / previous.paths
    else:
        return None
    if base[0] is None or base[1] is None or base[0] <= 0 or base[1] <= 0:
        return None
    return math.log(base[0] / base[1]) / math.log(ratio)


def convergence_study(
    base: EnsembleConfig,
    params: ModelParams,
    noise: Noise,
    levy: Optional[LevyMeasureSpec],
    u0_profile: Callable[[np.ndarray], np.ndarray],
    length: float,
    refinements: Sequence[Refinement],
    t_check: float,
    reference: Optional[ReferenceValue] = None,
    ms_threshold: float = settings.DEFAULT_MS_THRESHOLD,
) -> List[ConvergenceRow]:
    """
    v(t_check) for each (dt, n, paths) refinement, with errors against the
    reference and orders observed along the varied parameter.
    """
    rows: List[ConvergenceRow] = []
    for refinement in refinements:
        grid = IntervalGrid(length, refinement.n)
        config = replace(
            base,
            paths=refinement.paths,
            horizon=t_check,
            scheme=replace(base.scheme, dt=refinement.dt, record_stride=1),
        )
        estimate = run_ensemble(config, params, noise, levy, grid.sample(u0_profile))
        value = float(estimate.v.mean[-1])
        error = None
        if reference is not None:
            target = reference(refinement.dt, grid) if callable(reference) else float(reference)
            error = abs(value - target)
        detection = detect_mean_square_blowup(estimate, ms_threshold)
        row = ConvergenceRow(
            dt=refinement.dt,
            h=grid.h,
            paths=refinement.paths,
            value=value,
            standard_error=float(estimate.v.se[-1]),
            error=error,
            tau_ms=detection.tau_ms if detection else None,
        )
        if rows:
            row.observed_order = _observed_order(rows[-1], row)
        rows.append(row)
        logger.info(f"Refinement dt={row.dt:g} h={row.h:g} M={row.paths}: v={value:.6g}")
    return rows


@dataclass(frozen=True)
class ThresholdRow:
    threshold: float
    blowup_count: int
    median_tau: Optional[float]


def threshold_sweep(records: Sequence[TrajectoryRecord], thresholds: Sequence[float], run_threshold: float) -> List[ThresholdRow]:
    """
    Per-path blow-up times re-evaluated for lower thresholds on recorded paths.
    Thresholds above the run threshold cannot be evaluated and are rejected.
    """
    rows = []
    for threshold in sorted(thresholds):
        if threshold > run_threshold:
            raise ValueError(f"Threshold {threshold:g} exceeds the run threshold {run_threshold:g}")
        taus = []
        for record in records:
            l2 = np.sqrt(np.asarray(record.l2sq, dtype=float))
            hits = np.flatnonzero(~np.isfinite(l2) | (l2 >= threshold))
            if hits.size:
                taus.append(float(record.times[hits[0]]))
            elif record.blowup.detected:
                taus.append(float(record.blowup.tau))
        ordered = sorted(taus) + [math.inf] * (len(records) - len(taus))
        median = ordered[(len(ordered) - 1) // 2] if ordered else math.inf
        median = None if math.isinf(median) else float(median)
        rows.append(ThresholdRow(threshold=float(threshold), blowup_count=len(taus), median_tau=median))
    return rows


@dataclass(frozen=True)
class StrongOrderReport:
    dts: List[float]
    errors: List[float]
    rates: List[float]

    @property
    def measured_rate(self) -> float:
        return float(np.mean(self.rates)) if self.rates else float("nan")


def strong_order_study(
    params: ModelParams,
    noise: Noise,
    levy: Optional[LevyMeasureSpec],
    u0: Field,
    dt_coarse: float,
    horizon: float,
    paths: int,
    master_seed: int,
    levels: int = 3,
) -> StrongOrderReport:
    """
    RMS pathwise L2 distance between dt and dt/2 solutions driven by the same
    Brownian path and jump events, for dt = dt_coarse / 2^k.
    """
    if levels < 2:
        raise ValueError("Strong-order study needs at least two levels")
    fine_dt = dt_coarse / 2 ** levels
    fine_steps = int(round(horizon / fine_dt))
    if fine_steps % 2 ** levels or not math.isclose(fine_steps * fine_dt, horizon, rel_tol=1e-9):
        raise ValueError("Horizon must be a multiple of the coarsest step")
    dts = [dt_coarse / 2 ** k for k in range(levels + 1)]
    squared = np.zeros(levels)

    for index in range(paths):
        rng = path_stream(master_seed, index)
        jumps = sample_jumps(levy, horizon, rng) if levy is not None and noise is not None else []
        fine = rng.standard_normal(fine_steps) * math.sqrt(fine_dt)
        finals = []
        for k in range(levels + 1):
            factor = 2 ** (levels - k)
            increments = fine.reshape(-1, factor).sum(axis=1)
            scheme = StepScheme(dt=dts[k], jump_mode=JumpMode.FIXED_GRID)
            record = integrate_on_grid(params, noise, levy, u0, scheme, increments, jumps, rng)
            if record.final_state is None:
                raise ValueError(f"Path {index} blew up during the strong-order study")
            finals.append(record.final_state)
        for k in range(levels):
            squared[k] += l2_squared(finals[k] - finals[k + 1], u0.grid.h)

    errors = list(np.sqrt(squared / paths))
    rates = [math.log2(errors[k] / errors[k + 1]) for k in range(levels - 1) if errors[k + 1] > 0]
    return StrongOrderReport(dts=dts[:levels], errors=[float(e) for e in errors], rates=rates)
