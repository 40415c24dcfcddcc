"""
Energy Functionals
Concavity-method quantities: the blow-up criteria evaluated on initial data,
the (epsilon, delta) constants, the minimal K and the blow-up time bound, and
the I(t) diagnostics computed along an ensemble estimate of v(t) = E|u(t)|^2.
"""
from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.config.settings import settings
from src.core.grid_domain import Field, IntervalGrid, first_eigenvalue, h1_squared, l2_squared, lp_power
from src.core.levy_noise import LevyMeasureSpec
from src.core.noise_models import (
    AdditiveNoise, MultiplicativeNoise, NoiseEnergyNotEvaluable,
    check_kappa_window, kappa, noise_energy_report
)
from src.core.spde_integrator import ModelParams
from src.models.core_models import CriterionComponents, CriterionReport
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

_IDENTITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ConcavityParams:
    epsilon: float
    delta: float
    gap: float
    K: Optional[float] = None

    def with_K(self, K: float) -> "ConcavityParams":
        if not K > 0:
            raise ValueError(f"K must be positive, got {K}")
        return replace(self, K=float(K))


def concavity_gap(m: float) -> float:
    """2(m+1) - 4(1+eps)(1+delta) for the standard choice of eps and delta."""
    epsilon = (m - 1.0) / 4.0
    delta = (m - 1.0) / (2.0 * (m + 3.0))
    return 2.0 * (m + 1.0) - 4.0 * (1.0 + epsilon) * (1.0 + delta)


def concavity_constants(m: float) -> ConcavityParams:
    """eps = (m-1)/4, delta = (m-1)/(2(m+3)); the resulting gap is (m-1)/2."""
    if not np.isfinite(m) or m < 1:
        raise ValueError(f"Concavity constants need m >= 1, got {m}")
    epsilon = (m - 1.0) / 4.0
    delta = (m - 1.0) / (2.0 * (m + 3.0))
    gap = concavity_gap(m)
    if abs(gap - (m - 1.0) / 2.0) > _IDENTITY_TOLERANCE * max(1.0, m):
        raise ArithmeticError(f"Concavity gap {gap!r} differs from (m-1)/2 at m={m}")
    return ConcavityParams(epsilon=epsilon, delta=delta, gap=gap)


def minimal_K(
    mode: Literal["additive", "multiplicative"],
    v0: float,
    denominator: float,
    m: float,
    flat_energy_limit: float = 0.0,
) -> float:
    """
    Smallest K making the constant terms of the concavity estimate nonnegative.

    additive:       (1+1/eps)(1+delta)(v0 + S_inf)^2 / (2(m+1) (J0 - alpha/2 * G))
    multiplicative: (1+1/eps)(1+delta) v0^2 / (2(m+1) J~0)
    """
    if not denominator > 0:
        raise ValueError(f"K is undefined when the criterion value is not positive ({denominator})")
    constants = concavity_constants(m)
    if constants.epsilon == 0:
        raise ValueError("K is undefined for m = 1")
    numerator_base = v0 + flat_energy_limit if mode == "additive" else v0
    factor = (1.0 + 1.0 / constants.epsilon) * (1.0 + constants.delta)
    return factor * numerator_base ** 2 / (2.0 * (m + 1.0) * denominator)


def tstar_bound(K: float, v0: float, delta: float) -> float:
    """T* <= K / (delta * v0); infinite when v0 or delta vanishes."""
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    if v0 <= 0 or delta <= 0:
        return float("inf")
    return K / (delta * v0)


# =============================================================================
# CRITERIA
# =============================================================================

def _initial_terms(u0: Field, params: ModelParams):
    h = u0.grid.h
    gradient_term = -0.5 * params.alpha * h1_squared(u0.values, h)
    nonlinear_term = params.beta / (params.m + 1.0) * lp_power(u0.values, params.m + 1.0, h)
    return gradient_term, nonlinear_term, l2_squared(u0.values, h)


def _bound_fields(lhs, v0, m, delta, K_override, flat_energy_limit, mode):
    if lhs is None or not lhs > 0 or m <= 1:
        return None, K_override, (tstar_bound(K_override, v0, delta) if K_override else None)
    K_min = minimal_K(mode, v0, lhs, m, flat_energy_limit)
    K = K_override if K_override is not None else K_min
    return K_min, K, tstar_bound(K, v0, delta)


def criterion_additive(
    u0: Field,
    params: ModelParams,
    noise: Optional[AdditiveNoise],
    grid: IntervalGrid,
    levy: Optional[LevyMeasureSpec],
    K: Optional[float] = None,
    use_continuum_eigenvalue: bool = True,
) -> CriterionReport:
    """
    lhs = -(alpha/2)|grad u0|^2 + beta/(m+1)|u0|_{m+1}^{m+1} - (alpha/2) G,
    with G the time-integrated gradient energy of the noise.
    """
    constants = concavity_constants(params.m)
    gradient_term, nonlinear_term, v0 = _initial_terms(u0, params)
    common = dict(
        mode="additive",
        hypotheses_ok=params.theorem_hypotheses_hold(),
        lambda_1=first_eigenvalue(grid, continuum=use_continuum_eigenvalue),
        v0=v0,
        epsilon=constants.epsilon,
        delta=constants.delta,
    )

    grad_energy, flat_limit = 0.0, 0.0
    if noise is not None:
        try:
            energies = noise_energy_report(noise, grid, levy)
        except NoiseEnergyNotEvaluable as exc:
            logger.warning(f"Additive criterion not evaluable: {exc}")
            return CriterionReport(
                components=CriterionComponents(gradient_term=gradient_term, nonlinear_term=nonlinear_term),
                lhs=None,
                verdict="not-evaluable",
                message=str(exc),
                **common,
            )
        grad_energy, flat_limit = energies.grad_energy, energies.flat_energy_limit

    components = CriterionComponents(
        gradient_term=gradient_term,
        nonlinear_term=nonlinear_term,
        noise_term=-0.5 * params.alpha * grad_energy,
    )
    lhs = components.total()
    K_min, K_used, bound = _bound_fields(lhs, v0, params.m, constants.delta, K, flat_limit, "additive")
    return CriterionReport(
        components=components,
        lhs=lhs,
        verdict="blow-up-predicted" if lhs > 0 else "not-predicted",
        flat_energy_limit=flat_limit,
        grad_energy=grad_energy,
        K_min=K_min,
        K=K_used,
        tstar_bound=bound,
        **common,
    )


def criterion_multiplicative(
    u0: Field,
    params: ModelParams,
    noise: MultiplicativeNoise,
    grid: IntervalGrid,
    levy: Optional[LevyMeasureSpec],
    K: Optional[float] = None,
    use_continuum_eigenvalue: bool = True,
) -> CriterionReport:
    """lhs = J(0) + kappa/(m+1)|u0|^2; predicted only inside the kappa window."""
    constants = concavity_constants(params.m)
    gradient_term, nonlinear_term, v0 = _initial_terms(u0, params)
    lambda_1 = first_eigenvalue(grid, continuum=use_continuum_eigenvalue)
    kappa_value = kappa(noise, levy)
    window = check_kappa_window(kappa_value, params.alpha, lambda_1)

    components = CriterionComponents(
        gradient_term=gradient_term,
        nonlinear_term=nonlinear_term,
        kappa_term=kappa_value / (params.m + 1.0) * v0,
    )
    lhs = components.total()
    K_min, K_used, bound = _bound_fields(lhs, v0, params.m, constants.delta, K, 0.0, "multiplicative")
    return CriterionReport(
        mode="multiplicative",
        components=components,
        lhs=lhs,
        verdict="blow-up-predicted" if lhs > 0 and window else "not-predicted",
        hypotheses_ok=params.theorem_hypotheses_hold(),
        lambda_1=lambda_1,
        v0=v0,
        epsilon=constants.epsilon,
        delta=constants.delta,
        kappa=kappa_value,
        kappa_window_ok=window.ok,
        kappa_margin=window.margin,
        K_min=K_min,
        K=K_used,
        tstar_bound=bound,
    )


# =============================================================================
# DIAGNOSTICS ALONG AN ENSEMBLE
# =============================================================================

@dataclass
class DiagnosticsSeries:
    times: np.ndarray
    v: np.ndarray
    I: np.ndarray
    Iprime: np.ndarray
    Isecond: np.ndarray
    ratio: np.ndarray
    concavity_gap: np.ndarray
    delta: float
    K: float
    h_formula: Optional[np.ndarray] = None
    J: Optional[np.ndarray] = None
    lower_bound: Optional[np.ndarray] = None
    ratio_violation_time: Optional[float] = None
    bound_violation_time: Optional[float] = None

    @property
    def ratio_monotone(self) -> bool:
        return self.ratio_violation_time is None


def _first_violation(times, excess) -> Optional[float]:
    hits = np.flatnonzero(excess)
    return float(times[hits[0]]) if hits.size else None


def diagnostics_from_ensemble(
    times: np.ndarray,
    v: np.ndarray,
    params: ModelParams,
    K: float,
    v_se: Optional[np.ndarray] = None,
    J: Optional[np.ndarray] = None,
    h_formula: Optional[np.ndarray] = None,
    relative_tolerance: float = 1e-6,
) -> DiagnosticsSeries:
    """
    I = int v + K, I' = v, I'' by central differences of v, and the ratio
    I'/I^(1+delta), whose monotonicity is the blow-up signature.

    J (the ensemble estimate of J(t), or J~(t) in the multiplicative case)
    adds the lower bound 2(m+1)J on I''.
    """
    times = np.asarray(times, dtype=float)
    v = np.asarray(v, dtype=float)
    if times.size < 3 or v.shape != times.shape:
        raise ValueError("Diagnostics need at least three aligned time points")
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise ValueError("Diagnostic times must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValueError("Diagnostics need a uniform time grid")
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")

    delta = concavity_constants(params.m).delta
    I = K + cumulative_trapezoid(v, times, initial=0.0)
    Isecond = np.gradient(v, times, edge_order=2)
    ratio = v / I ** (1.0 + delta)
    gap_series = Isecond * I - (1.0 + delta) * v ** 2

    z = settings.CONFIDENCE_Z
    slack = relative_tolerance * np.abs(ratio[:-1])
    if v_se is not None:
        slack = slack + z * np.asarray(v_se, dtype=float)[1:] / I[1:] ** (1.0 + delta)
    ratio_violation = _first_violation(times[1:], ratio[1:] < ratio[:-1] - slack)

    lower_bound = None
    bound_violation = None
    if J is not None:
        lower_bound = 2.0 * (params.m + 1.0) * np.asarray(J, dtype=float)
        bound_slack = relative_tolerance * np.abs(lower_bound)
        if v_se is not None:
            bound_slack = bound_slack + z * np.sqrt(2.0) * np.asarray(v_se, dtype=float) / steps[0]
        bound_violation = _first_violation(times, Isecond < lower_bound - bound_slack)

    if ratio_violation is not None:
        logger.info(f"Ratio I'/I^(1+delta) first decreases at t={ratio_violation:.6g}")
    return DiagnosticsSeries(
        times=times,
        v=v,
        I=I,
        Iprime=v.copy(),
        Isecond=Isecond,
        ratio=ratio,
        concavity_gap=gap_series,
        delta=delta,
        K=float(K),
        h_formula=None if h_formula is None else np.asarray(h_formula, dtype=float),
        J=None if J is None else np.asarray(J, dtype=float),
        lower_bound=lower_bound,
        ratio_violation_time=ratio_violation,
        bound_violation_time=bound_violation,
    )
