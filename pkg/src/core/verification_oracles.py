"""
Verification Oracles
Independent numerical checks of the energy identities along simulated
ensembles: the L2, gradient, L^(m+1) and energy-functional balances, their
multiplicative counterparts, the Taylor remainder point, the martingale
structure of the stochastic integrals, and a fine-grid reference solver.
"""
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq, minimize_scalar

from src.config.settings import settings
from src.core.grid_domain import (
    Field, IntervalGrid, apply_laplacian, first_eigenvector, inner
)
from src.core.levy_noise import (
    LevyMeasureSpec, integral_against_levy, path_stream,
    sample_jumps, sample_marks, total_rate
)
from src.core.monte_carlo import EnsembleEstimate
from src.core.noise_models import AdditiveNoise, MultiplicativeNoise, kappa
from src.core.spde_integrator import (
    ModelParams, Noise, Probe, StepScheme, TrajectoryRecord, simulate_path
)
from src.models.core_models import (
    BalanceReport, MartingaleCheck, MartingaleReport, ScalarMomentReport, TaylorCheckReport
)
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class TaylorRemainderError(ValueError):
    """No intermediate point satisfies the Taylor remainder equation on [0, 1]."""


# =============================================================================
# TAYLOR REMAINDER
# =============================================================================

def taylor_remainder_lhs(u: np.ndarray, eta: np.ndarray, m: float, weight: float) -> float:
    """|u+eta|_{m+1}^{m+1} - |u|_{m+1}^{m+1} - (m+1)(|u|^(m-1) u, eta)."""
    p = m + 1.0
    return float(weight * np.sum(
        np.abs(u + eta) ** p - np.abs(u) ** p - p * np.abs(u) ** (m - 1.0) * u * eta
    ))


def taylor_remainder_rhs(u: np.ndarray, eta: np.ndarray, m: float, weight: float, theta: float) -> float:
    """(m(m+1)/2)(|u + theta*eta|^(m-1), eta^2)."""
    return float(0.5 * m * (m + 1.0) * weight * np.sum(np.abs(u + theta * eta) ** (m - 1.0) * eta * eta))


def taylor_remainder_theta(
    u: Union[Field, np.ndarray, float],
    eta: Union[Field, np.ndarray, float],
    m: float,
    weight: Optional[float] = None,
) -> float:
    """
    Smallest theta in [0, 1] with
        (m(m+1)/2)(|u + theta*eta|^(m-1), eta^2) = |u+eta|^{m+1} - |u|^{m+1} - (m+1)(|u|^(m-1)u, eta).

    Fields use the grid weight h; bare arrays default to weight 1.
    """
    if isinstance(u, Field):
        weight = u.grid.h if weight is None else weight
        u = u.values
    if isinstance(eta, Field):
        eta = eta.values
    weight = 1.0 if weight is None else float(weight)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if m < 1:
        raise ValueError(f"Taylor remainder needs m >= 1, got {m}")
    if m == 1 or not np.any(eta):
        return 0.0

    lhs = taylor_remainder_lhs(u, eta, m, weight)
    tolerance = settings.TAYLOR_RELATIVE_RESIDUAL * max(1.0, abs(lhs))

    def residual(theta: float) -> float:
        return taylor_remainder_rhs(u, eta, m, weight, theta) - lhs

    thetas = np.linspace(0.0, 1.0, settings.TAYLOR_SCAN_POINTS)
    shifted = np.abs(u[None, :] + thetas[:, None] * eta[None, :]) ** (m - 1.0)
    scan = 0.5 * m * (m + 1.0) * weight * (shifted @ (eta * eta)) - lhs

    if abs(scan[0]) <= tolerance:
        return 0.0
    changes = np.flatnonzero((np.sign(scan[:-1]) != np.sign(scan[1:])) | (np.abs(scan[1:]) <= tolerance))
    if changes.size:
        k = changes[0]
        if abs(scan[k + 1]) <= tolerance and np.sign(scan[k]) == np.sign(scan[k + 1]):
            theta = float(thetas[k + 1])
        else:
            theta = brentq(residual, thetas[k], thetas[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        # tangential root between scan points
        k = int(np.argmin(np.abs(scan)))
        lower, upper = thetas[max(k - 1, 0)], thetas[min(k + 1, len(thetas) - 1)]
        found = minimize_scalar(lambda t: abs(residual(t)), bounds=(lower, upper), method="bounded",
                                options={"xatol": 1e-14})
        theta = float(found.x)

    if abs(residual(theta)) > tolerance:
        raise TaylorRemainderError(
            f"No theta in [0, 1] solves the remainder equation (best residual {residual(theta):.3e}, lhs {lhs:.3e})"
        )
    return float(theta)


def taylor_check(samples: int, master_seed: int, nodes: int = 8) -> TaylorCheckReport:
    """Randomized (u, eta, m) triples with m in (1, 6]; residuals relative to max(1, |lhs|)."""
    rng = path_stream(master_seed, 0)
    worst, failures = 0.0, 0
    for _ in range(samples):
        u = rng.normal(size=nodes)
        eta = rng.normal(size=nodes)
        m = 1.0 + 5.0 * (1.0 - rng.random())
        weight = 1.0 / (nodes + 1)
        try:
            theta = taylor_remainder_theta(u, eta, m, weight)
        except TaylorRemainderError:
            failures += 1
            continue
        lhs = taylor_remainder_lhs(u, eta, m, weight)
        relative = abs(taylor_remainder_rhs(u, eta, m, weight, theta) - lhs) / max(1.0, abs(lhs))
        worst = max(worst, relative)
    passed = failures == 0 and worst <= settings.TAYLOR_RELATIVE_RESIDUAL
    return TaylorCheckReport(samples=samples, max_relative_residual=worst, failures=failures, passed=passed)


# =============================================================================
# BALANCE PROBES
# =============================================================================

def _jump_remainder(levy: LevyMeasureSpec, noise: AdditiveNoise, x: np.ndarray, m: float, h: float):
    """int [Taylor remainder of |.|^{m+1} at u in direction eta(t, z)] lambda(dz)."""
    def term(values: np.ndarray, t: float) -> float:
        return float(integral_against_levy(
            levy, lambda z: taylor_remainder_lhs(values, noise.eta(x, t, z), m, h)
        ))
    return term


def balance_probes(
    params: ModelParams,
    noise: Noise,
    levy: Optional[LevyMeasureSpec],
    grid: IntervalGrid,
) -> Dict[str, Probe]:
    """Integrand probes evaluated at record times, consumed by the balance oracles."""
    h, x, m = grid.h, grid.nodes, params.m
    alpha, beta = params.alpha, params.beta

    def drift(values):
        return alpha * apply_laplacian(values, h) + beta * np.abs(values) ** (m - 1.0) * values

    probes: Dict[str, Probe] = {
        "lap_drift": lambda values, t: inner(apply_laplacian(values, h), drift(values), h),
        "lmp1_drift": lambda values, t: (m + 1.0) * inner(np.abs(values) ** (m - 1.0) * values, drift(values), h),
        "energy_drift": lambda values, t: inner(drift(values), drift(values), h),
    }

    if isinstance(noise, AdditiveNoise):
        probes["noise_flat"] = lambda values, t: float(noise.flat_rate(grid, np.array([t]), levy)[0])
        probes["noise_grad"] = lambda values, t: float(noise.grad_rate(grid, np.array([t]), levy)[0])
        probes["lmp1_ito"] = lambda values, t: 0.5 * m * (m + 1.0) * inner(
            np.abs(values) ** (m - 1.0), noise.sigma(x, t) ** 2, h
        )
        if levy is not None:
            probes["lmp1_jump"] = _jump_remainder(levy, noise, x, m, h)
    return probes


# =============================================================================
# BALANCES
# =============================================================================

def _balance_window(ensemble: EnsembleEstimate, threshold: float, dt: float) -> int:
    """Number of leading record times before any path nears the blow-up threshold or comes within dt of its tau."""
    limit = (settings.BALANCE_WINDOW_FRACTION * threshold) ** 2
    width = len(ensemble.times)
    for record in _require_records(ensemble):
        l2 = record.grid_series("l2sq")
        beyond = np.flatnonzero(~np.isfinite(l2) | (l2 >= limit))
        reach = beyond[0] if beyond.size else len(l2)
        if record.blowup.detected:
            reach = min(reach, int(np.searchsorted(ensemble.times, record.blowup.tau - dt, side="right")))
        width = min(width, reach)
    return width


def _require_records(ensemble: EnsembleEstimate) -> List[TrajectoryRecord]:
    if not ensemble.records:
        raise ValueError("Balance oracles need an ensemble run with keep_records=True")
    return [record for record in ensemble.records if record is not None]


def _balance(
    name: str,
    ensemble: EnsembleEstimate,
    state: Callable[[TrajectoryRecord], np.ndarray],
    integrand: Callable[[TrajectoryRecord], np.ndarray],
    dt: float,
    threshold: float,
    relation: str = "equality",
) -> BalanceReport:
    """
    Per path the residual X(t) - X(0) - int_0^t integrand is a martingale; its
    ensemble mean is compared against 3 SE + C dt with C frozen in settings.
    """
    records = _require_records(ensemble)
    width = _balance_window(ensemble, threshold, dt)
    if width < 2:
        raise ValueError(f"{name}: fewer than two record times before blow-up")
    times = ensemble.times[:width]

    increments, integrals = [], []
    for record in records:
        series = state(record)[:width]
        increments.append(series - series[0])
        integrals.append(cumulative_trapezoid(integrand(record)[:width], times, initial=0.0))
    increments = np.array(increments)
    integrals = np.array(integrals)
    residuals = increments - integrals

    paths = residuals.shape[0]
    mean_residual = np.array([math.fsum(column) / paths for column in residuals.T])
    se = residuals.std(axis=0, ddof=1) / np.sqrt(paths) if paths > 1 else np.zeros(width)
    lhs = np.array([math.fsum(column) / paths for column in increments.T])
    rhs = np.array([math.fsum(column) / paths for column in integrals.T])

    scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    statistical = settings.BALANCE_SE_FACTOR * se
    discretization = settings.BALANCE_DT_CONSTANT * dt
    allowed = statistical + discretization
    if relation == "inequality":
        gaps = np.maximum(-mean_residual, 0.0)
    else:
        gaps = np.abs(mean_residual)
    passed = bool(np.all(gaps <= allowed + 1e-12 * scale))
    report = BalanceReport(
        identity_name=name,
        times=[float(t) for t in times],
        lhs_series=[float(v) for v in lhs],
        rhs_series=[float(v) for v in rhs],
        max_abs_gap=float(np.max(gaps)),
        tolerance=float(np.max(allowed)),
        passed=passed,
        statistical_error=float(np.max(statistical)),
        discretization_error=float(discretization),
        relation=relation,
        excluded_after=float(ensemble.times[width]) if width < len(ensemble.times) else None,
    )
    level = logger.info if passed else logger.warning
    level(f"{name}: max gap {report.max_abs_gap:.3e} vs tolerance {report.tolerance:.3e} -> "
          f"{'pass' if passed else 'FAIL'}")
    return report


def _series(name: str) -> Callable[[TrajectoryRecord], np.ndarray]:
    return lambda record: record.grid_series(name)


def _zeros_like_times(record: TrajectoryRecord) -> np.ndarray:
    return np.zeros(len(record.grid_series("l2sq")))


def _optional(name: str) -> Callable[[TrajectoryRecord], np.ndarray]:
    return lambda record: record.grid_series(name) if name in record.probes else _zeros_like_times(record)


def ito_balance_l2(
    ensemble: EnsembleEstimate, params: ModelParams, noise: Optional[AdditiveNoise],
    levy: Optional[LevyMeasureSpec], dt: float, threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> BalanceReport:
    """E|u(t)|^2 - E|u0|^2 = int E[-2 alpha |grad u|^2 + 2 beta |u|_{m+1}^{m+1} + noise energy]."""
    def integrand(record):
        return (-2.0 * params.alpha * record.grid_series("h1sq")
                + 2.0 * params.beta * record.grid_series("lmp1")
                + _optional("noise_flat")(record))
    return _balance("l2_balance", ensemble, _series("l2sq"), integrand, dt, threshold)


def ito_balance_grad(
    ensemble: EnsembleEstimate, params: ModelParams, noise: Optional[AdditiveNoise],
    levy: Optional[LevyMeasureSpec], dt: float, threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> BalanceReport:
    """E|grad u(t)|^2 balance with drift -2(Lap u, alpha Lap u + beta|u|^(m-1)u)."""
    def integrand(record):
        return -2.0 * record.grid_series("lap_drift") + _optional("noise_grad")(record)
    return _balance("grad_balance", ensemble, _series("h1sq"), integrand, dt, threshold)


def ito_balance_lmp1(
    ensemble: EnsembleEstimate, params: ModelParams, noise: Optional[AdditiveNoise],
    levy: Optional[LevyMeasureSpec], dt: float, threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> BalanceReport:
    """
    E|u(t)|_{m+1}^{m+1} balance: drift (m+1)(|u|^(m-1)u, .), the Ito correction
    (m(m+1)/2)(|u|^(m-1), sigma^2) and the integrated Taylor remainder of the jumps.
    """
    def integrand(record):
        return (record.grid_series("lmp1_drift")
                + _optional("lmp1_ito")(record)
                + _optional("lmp1_jump")(record))
    report = _balance("lmp1_balance", ensemble, _series("lmp1"), integrand, dt, threshold)
    for record in _require_records(ensemble):
        if "lmp1_jump" in record.probes and np.any(record.grid_series("lmp1_jump") < -1e-12):
            raise ValueError("Jump remainder term is negative; the remainder must be nonnegative")
    return report


def ito_balance_energy(
    ensemble: EnsembleEstimate, params: ModelParams, noise: Optional[AdditiveNoise],
    levy: Optional[LevyMeasureSpec], dt: float, threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> BalanceReport:
    """
    J(t) = -(alpha/2)E|grad u|^2 + beta/(m+1) E|u|_{m+1}^{m+1} against J(0) plus
    int E|alpha Lap u + beta|u|^(m-1)u|^2 - (alpha/2) gradient noise energy
    + beta/(m+1) (Ito correction + jump remainder).
    """
    a, b = params.alpha, params.beta / (params.m + 1.0)

    def state(record):
        return -0.5 * a * record.grid_series("h1sq") + b * record.grid_series("lmp1")

    def integrand(record):
        return (record.grid_series("energy_drift")
                - 0.5 * a * _optional("noise_grad")(record)
                + b * (_optional("lmp1_ito")(record) + _optional("lmp1_jump")(record)))
    return _balance("energy_balance", ensemble, state, integrand, dt, threshold)


def ito_balance_multiplicative(
    ensemble: EnsembleEstimate, params: ModelParams, noise: MultiplicativeNoise,
    levy: Optional[LevyMeasureSpec], dt: float, threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> BalanceReport:
    """v(t) = v(0) + int E[-2 alpha |grad u|^2 + 2 beta |u|_{m+1}^{m+1} + 2 kappa |u|^2]."""
    rate = 2.0 * kappa(noise, levy)

    def integrand(record):
        return (-2.0 * params.alpha * record.grid_series("h1sq")
                + 2.0 * params.beta * record.grid_series("lmp1")
                + rate * record.grid_series("l2sq"))
    return _balance("l2_balance_multiplicative", ensemble, _series("l2sq"), integrand, dt, threshold)


def ito_balance_grad_multiplicative(
    ensemble: EnsembleEstimate, params: ModelParams, noise: MultiplicativeNoise,
    levy: Optional[LevyMeasureSpec], dt: float, threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> BalanceReport:
    """E|grad u(t)|^2 = E|grad u0|^2 - 2 int E(Lap u, drift) + 2 kappa int E|grad u|^2."""
    rate = 2.0 * kappa(noise, levy)

    def integrand(record):
        return -2.0 * record.grid_series("lap_drift") + rate * record.grid_series("h1sq")
    return _balance("grad_balance_multiplicative", ensemble, _series("h1sq"), integrand, dt, threshold)


def ito_inequality_multiplicative_lmp1(
    ensemble: EnsembleEstimate, params: ModelParams, noise: MultiplicativeNoise,
    levy: Optional[LevyMeasureSpec], dt: float, threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> BalanceReport:
    """E|u(t)|^{m+1} - E|u0|^{m+1} >= int [(m+1)E(|u|^(m-1)u, drift) + (m(m+1)/2) sigma^2 E|u|^{m+1}]."""
    m = params.m
    correction = 0.5 * m * (m + 1.0) * noise.sigma_const ** 2

    def integrand(record):
        return record.grid_series("lmp1_drift") + correction * record.grid_series("lmp1")
    return _balance("lmp1_inequality_multiplicative", ensemble, _series("lmp1"), integrand, dt, threshold,
                    relation="inequality")


# =============================================================================
# SCALAR SECOND MOMENT
# =============================================================================

def scalar_second_moment(
    sigma: float,
    eta_profile: Callable[[float], float],
    levy: Optional[LevyMeasureSpec],
    u0: float,
    check_times: Sequence[float],
    paths: int,
    dt: float,
    master_seed: int,
) -> ScalarMomentReport:
    """
    Euler paths of dU = sigma U dW + int eta(z) U(t-) pi~(dt, dz). The discrete
    second moment is U0^2 (1 + 2 kappa dt)^n exactly, the continuous one U0^2 e^{2 kappa t}.
    """
    noise = MultiplicativeNoise.for_measure(sigma, eta_profile, levy)
    kappa_value = kappa(noise, levy)
    mean_eta = noise.eta_mean(levy)
    rate = total_rate(levy) if levy is not None else 0.0
    steps_at = [int(round(t / dt)) for t in check_times]
    total_steps = max(steps_at)
    rng = path_stream(master_seed, 0)

    state = np.full(paths, float(u0))
    snapshots: Dict[int, np.ndarray] = {}
    for n in range(1, total_steps + 1):
        factor = 1.0 + sigma * np.sqrt(dt) * rng.standard_normal(paths) - dt * mean_eta
        if rate > 0:
            counts = rng.poisson(rate * dt, size=paths)
            jumps = int(counts.sum())
            if jumps:
                marks = sample_marks(levy, jumps, rng)
                owners = np.repeat(np.arange(paths), counts)
                factor += np.bincount(owners, weights=[eta_profile(z) for z in marks], minlength=paths)
        state = state * factor
        if n in steps_at:
            snapshots[n] = state * state

    means, errors, expected, discrete = [], [], [], []
    passed = True
    for t, n in zip(check_times, steps_at):
        squares = snapshots[n]
        mean = math.fsum(squares) / paths
        se = float(np.std(squares, ddof=1) / np.sqrt(paths))
        exact = u0 ** 2 * math.exp(2.0 * kappa_value * t)
        exact_discrete = u0 ** 2 * (1.0 + 2.0 * kappa_value * dt) ** n
        means.append(mean)
        errors.append(se)
        expected.append(exact)
        discrete.append(exact_discrete)
        bias = abs(exact - exact_discrete)
        passed = passed and abs(mean - exact) <= settings.BALANCE_SE_FACTOR * se + bias
    return ScalarMomentReport(
        kappa=kappa_value,
        times=[float(t) for t in check_times],
        means=means,
        standard_errors=errors,
        expected=expected,
        expected_discrete=discrete,
        passed=passed,
    )


# =============================================================================
# MARTINGALE CHECKS
# =============================================================================

def _mean_check(
    name: str,
    times: np.ndarray,
    samples: np.ndarray,
    expected_variance: Optional[np.ndarray] = None,
) -> MartingaleCheck:
    """Sample means within 4 SE of 0; optionally sample variances within 4 SE of the expected ones."""
    count = samples.shape[0]
    factor = settings.MARTINGALE_SE_FACTOR
    means = np.array([math.fsum(column) / count for column in samples.T])
    se = samples.std(axis=0, ddof=1) / np.sqrt(count)
    passed = bool(np.all(np.abs(means) <= factor * se + 1e-12))

    variances = variance_se = None
    if expected_variance is not None:
        centred = samples - means
        variances = np.mean(centred ** 2, axis=0) * count / (count - 1)
        fourth = np.mean(centred ** 4, axis=0)
        variance_se = np.sqrt(np.maximum(fourth - variances ** 2, 0.0) / count)
        passed = passed and bool(np.all(np.abs(variances - expected_variance) <= factor * variance_se + 1e-12))
    return MartingaleCheck(
        name=name,
        times=[float(t) for t in times],
        means=[float(v) for v in means],
        standard_errors=[float(v) for v in se],
        passed=passed,
        variances=None if variances is None else [float(v) for v in variances],
        expected_variances=None if expected_variance is None else [float(v) for v in expected_variance],
        variance_standard_errors=None if variance_se is None else [float(v) for v in variance_se],
    )


def martingale_checks(
    levy: Optional[LevyMeasureSpec],
    noise: Optional[AdditiveNoise],
    grid: IntervalGrid,
    horizon: float,
    streams: int,
    master_seed: int,
    dt: float = settings.DEFAULT_DT,
    checkpoints: int = 5,
) -> MartingaleReport:
    """
    With the state frozen at the first eigenvector u = sin(pi x/L):
      * int (sigma, u) dW has mean 0 and variance int (sigma, u)^2 ds (isometry);
      * sum over jumps of (eta, u) minus its compensator has mean 0;
      * N(t) - t lambda(Z) has mean 0 and variance t lambda(Z).
    """
    steps = int(round(horizon / dt))
    grid_times = dt * np.arange(steps + 1)
    picks = np.unique(np.linspace(0, steps, checkpoints + 1).round().astype(int)[1:])
    check_times = grid_times[picks]
    frozen = first_eigenvector(grid).values
    x, h = grid.nodes, grid.h

    if noise is not None:
        loads = np.array([inner(noise.sigma(x, t), frozen, h) for t in grid_times[:-1]])
        jump_density = np.array([
            inner(noise.compensator(frozen, x, t, levy), frozen, h) for t in grid_times
        ]) if levy is not None else np.zeros(steps + 1)
    else:
        loads = np.zeros(steps)
        jump_density = np.zeros(steps + 1)
    isometry = np.concatenate(([0.0], np.cumsum(loads ** 2 * dt)))[picks]
    compensator = cumulative_trapezoid(jump_density, grid_times, initial=0.0)[picks]
    rate = total_rate(levy) if levy is not None else 0.0

    brownian = np.zeros((streams, len(picks)))
    jump_integral = np.zeros((streams, len(picks)))
    counts = np.zeros((streams, len(picks)))
    for index in range(streams):
        rng = path_stream(master_seed, index)
        events = sample_jumps(levy, horizon, rng) if levy is not None else []
        increments = rng.standard_normal(steps) * np.sqrt(dt)
        running = np.concatenate(([0.0], np.cumsum(loads * increments)))
        brownian[index] = running[picks]
        event_times = np.array([event.time for event in events])
        counts[index] = np.searchsorted(event_times, check_times, side="right") - rate * check_times
        if noise is not None and events:
            contributions = np.array([
                inner(noise.eta(x, event.time, event.mark), frozen, h) for event in events
            ])
            cumulative = np.concatenate(([0.0], np.cumsum(contributions)))
            jump_integral[index] = cumulative[np.searchsorted(event_times, check_times, side="right")]
        jump_integral[index] -= compensator

    checks = [
        _mean_check("brownian_integral", check_times, brownian, expected_variance=isometry),
        _mean_check("compensated_jump_integral", check_times, jump_integral),
        _mean_check("compensated_count", check_times, counts, expected_variance=rate * check_times),
    ]
    for check in checks:
        logger.info(f"Martingale check {check.name}: {'pass' if check.passed else 'FAIL'}")
    return MartingaleReport(streams=streams, checks=checks, passed=all(c.passed for c in checks))


# =============================================================================
# REFERENCE SOLVER
# =============================================================================

def reference_resolution(grid: IntervalGrid, dt: float) -> Tuple[IntervalGrid, float]:
    """(h/4, dt/16) refinement used as ground truth for coarse runs."""
    return grid.refine(4), dt / 16.0


def reference_solve(
    params: ModelParams,
    u0: Union[Field, Callable[[np.ndarray], np.ndarray]],
    grid_fine: IntervalGrid,
    dt_fine: float,
    horizon: float,
    blowup_threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> TrajectoryRecord:
    """Zero-noise deterministic run of the same scheme on a fine resolution."""
    initial = u0 if isinstance(u0, Field) else grid_fine.sample(u0)
    if initial.grid != grid_fine:
        raise ValueError("Reference initial data must live on the fine grid")
    scheme = StepScheme(dt=dt_fine)
    return simulate_path(
        params, None, None, initial, scheme, horizon, blowup_threshold, path_stream(0, 0)
    )
