"""
Noise Models
The additive family sigma(x,t), eta(x,t,z) and the linear multiplicative
family sigma*u, eta(z)*u, together with the noise-energy quantities that
enter the blow-up criteria.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid

from src.config.settings import settings
from src.core.grid_domain import IntervalGrid
from src.core.levy_noise import (
    LevyMeasureSpec, integral_against_levy, support_points
)

SpaceTimeFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
MarkFn = Callable[[float], float]

_TIME_BATCH = 2048


class NoiseEnergyNotEvaluable(ValueError):
    """Raised when a noise-energy time quadrature does not converge."""


@lru_cache(maxsize=128)
def profile_moment(profile: MarkFn, levy: LevyMeasureSpec, power: int) -> float:
    """int profile(z)^power lambda(dz), cached per (profile, measure)."""
    return float(integral_against_levy(levy, lambda z: profile(z) ** power))


def _squared_gradients(values: np.ndarray, h: float) -> np.ndarray:
    """Row-wise discrete |grad f|^2 for a (k, n) block of fields."""
    padded = np.pad(values, ((0, 0), (1, 1)))
    gaps = np.diff(padded, axis=1) / h
    return h * np.sum(gaps * gaps, axis=1)


def _squared_l2(values: np.ndarray, h: float) -> np.ndarray:
    return h * np.sum(values * values, axis=1)


@dataclass
class AdditiveNoise:
    """
    State-independent forcing sigma(x, t) dW + eta(x, t, z) pi~(dt, dz).

    Both coefficients vanish for t > decay_horizon. When eta factors as
    mark_fn(z) * eta_space(x, t) the compensator and the Levy integrals are
    computed once per measure instead of per time.
    """
    sigma_fn: SpaceTimeFn
    eta_fn: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    decay_horizon: float
    mark_fn: Optional[MarkFn] = None
    eta_space: Optional[SpaceTimeFn] = None

    def __post_init__(self):
        if not np.isfinite(self.decay_horizon) or self.decay_horizon <= 0:
            raise ValueError(f"decay_horizon must be positive and finite, got {self.decay_horizon}")

    @classmethod
    def separable(
        cls,
        sigma_fn: SpaceTimeFn,
        mark_fn: MarkFn,
        eta_space: SpaceTimeFn,
        decay_horizon: float
    ) -> "AdditiveNoise":
        def eta_fn(x, t, z):
            return mark_fn(z) * eta_space(x, t)
        return cls(sigma_fn, eta_fn, decay_horizon, mark_fn=mark_fn, eta_space=eta_space)

    # -- coefficient evaluation -------------------------------------------------

    def _active(self, t) -> np.ndarray:
        return np.asarray(t) <= self.decay_horizon

    def sigma(self, x: np.ndarray, t: float) -> np.ndarray:
        if not self._active(t):
            return np.zeros_like(x)
        return np.broadcast_to(self.sigma_fn(x, t), x.shape).astype(float)

    def eta(self, x: np.ndarray, t: float, z: float) -> np.ndarray:
        if not self._active(t):
            return np.zeros_like(x)
        return np.broadcast_to(self.eta_fn(x, t, z), x.shape).astype(float)

    def _mark_moment(self, levy: LevyMeasureSpec, power: int) -> float:
        return profile_moment(self.mark_fn, levy, power)

    # -- integrator protocol ------------------------------------------------------

    def diffusion(self, u: np.ndarray, x: np.ndarray, t: float) -> np.ndarray:
        return self.sigma(x, t)

    def jump_amplitude(self, u_pre: np.ndarray, x: np.ndarray, t: float, z: float) -> np.ndarray:
        return self.eta(x, t, z)

    def compensator(self, u: np.ndarray, x: np.ndarray, t: float, levy: Optional[LevyMeasureSpec]) -> np.ndarray:
        if levy is None or not self._active(t):
            return np.zeros_like(x)
        if self.mark_fn is not None:
            return self._mark_moment(levy, 1) * np.broadcast_to(self.eta_space(x, t), x.shape)
        return np.asarray(integral_against_levy(levy, lambda z: self.eta(x, t, z)))

    # -- energy rates, vectorized over a batch of times ---------------------------

    def _rates(self, grid: IntervalGrid, ts: np.ndarray, levy: Optional[LevyMeasureSpec], norm) -> np.ndarray:
        x = grid.nodes[None, :]
        col = ts[:, None]
        active = self._active(ts)
        sigma_block = np.broadcast_to(self.sigma_fn(x, col), (len(ts), grid.n))
        rates = norm(sigma_block, grid.h)
        if levy is not None:
            if self.mark_fn is not None:
                eta_block = np.broadcast_to(self.eta_space(x, col), (len(ts), grid.n))
                rates = rates + self._mark_moment(levy, 2) * norm(eta_block, grid.h)
            else:
                jump_part = integral_against_levy(
                    levy,
                    lambda z: norm(np.broadcast_to(self.eta_fn(x, col, z), (len(ts), grid.n)), grid.h)
                )
                rates = rates + np.asarray(jump_part)
        return np.where(active, rates, 0.0)

    def flat_rate(self, grid: IntervalGrid, ts: np.ndarray, levy: Optional[LevyMeasureSpec]) -> np.ndarray:
        """|sigma(t)|^2 + int |eta(t,z)|^2 lambda(dz)."""
        return self._batched(grid, ts, levy, _squared_l2)

    def grad_rate(self, grid: IntervalGrid, ts: np.ndarray, levy: Optional[LevyMeasureSpec]) -> np.ndarray:
        """|grad sigma(t)|^2 + int |grad eta(t,z)|^2 lambda(dz)."""
        return self._batched(grid, ts, levy, _squared_gradients)

    def _batched(self, grid, ts, levy, norm) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        chunks = [
            self._rates(grid, ts[start:start + _TIME_BATCH], levy, norm)
            for start in range(0, len(ts), _TIME_BATCH)
        ]
        return np.concatenate(chunks) if chunks else np.empty(0)


@dataclass(frozen=True)
class MultiplicativeNoise:
    """Linear multiplicative coefficients sigma*u and eta(z)*u with eta >= 0."""
    sigma_const: float
    eta_profile: MarkFn

    def ensure_nonnegative(self, levy: Optional[LevyMeasureSpec]) -> None:
        if levy is None:
            return
        for z in support_points(levy):
            value = self.eta_profile(float(z))
            if not np.isfinite(value) or value < 0:
                raise ValueError(
                    f"Multiplicative jump profile must satisfy eta(z) >= 0 on the support; "
                    f"eta({z:g}) = {value:g}"
                )

    @classmethod
    def for_measure(cls, sigma_const: float, eta_profile: MarkFn, levy: Optional[LevyMeasureSpec]) -> "MultiplicativeNoise":
        noise = cls(float(sigma_const), eta_profile)
        noise.ensure_nonnegative(levy)
        return noise

    def eta_mean(self, levy: Optional[LevyMeasureSpec]) -> float:
        if levy is None:
            return 0.0
        return profile_moment(self.eta_profile, levy, 1)

    def diffusion(self, u: np.ndarray, x: np.ndarray, t: float) -> np.ndarray:
        return self.sigma_const * u

    def jump_amplitude(self, u_pre: np.ndarray, x: np.ndarray, t: float, z: float) -> np.ndarray:
        return self.eta_profile(z) * u_pre

    def compensator(self, u: np.ndarray, x: np.ndarray, t: float, levy: Optional[LevyMeasureSpec]) -> np.ndarray:
        return self.eta_mean(levy) * u


@dataclass(frozen=True)
class KappaWindow:
    ok: bool
    margin: float

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class NoiseEnergyReport:
    grad_energy: float
    flat_energy_limit: float
    flat_energy_fn: Callable[[float], float]
    kappa: Optional[float] = None


# =============================================================================
# NOISE ENERGIES
# =============================================================================

def _nested_trapezoid(rate_fn: Callable[[np.ndarray], np.ndarray], upper: float) -> float:
    """Trapezoid rule on [0, upper], halving the step until the change is below tolerance."""
    if upper <= 0:
        return 0.0
    intervals = 16
    ts = np.linspace(0.0, upper, intervals + 1)
    estimate = float(trapezoid(rate_fn(ts), ts))
    for _ in range(settings.TIME_QUAD_MAX_LEVEL):
        step = upper / intervals
        midpoints = np.linspace(step / 2.0, upper - step / 2.0, intervals)
        refined = 0.5 * estimate + 0.5 * step * float(np.sum(rate_fn(midpoints)))
        intervals *= 2
        if not np.isfinite(refined):
            break
        if abs(refined - estimate) <= settings.TIME_QUAD_RELTOL * abs(refined):
            return refined
        estimate = refined
    raise NoiseEnergyNotEvaluable(
        f"Noise energy quadrature on [0, {upper:g}] did not converge"
    )


def noise_grad_energy(noise: AdditiveNoise, grid: IntervalGrid, levy: Optional[LevyMeasureSpec]) -> float:
    """
    int_0^T_inf ( |grad sigma|^2 + int |grad eta|^2 dlambda ) dt, without the alpha/2 factor.
    """
    return _nested_trapezoid(lambda ts: noise.grad_rate(grid, ts, levy), noise.decay_horizon)


def noise_flat_energy(noise: AdditiveNoise, grid: IntervalGrid, levy: Optional[LevyMeasureSpec], t: float) -> float:
    """int_0^t ( |sigma|^2 + int |eta|^2 dlambda ) ds."""
    upper = min(float(t), noise.decay_horizon)
    return _nested_trapezoid(lambda ts: noise.flat_rate(grid, ts, levy), upper)


def noise_energy_report(noise, grid: IntervalGrid, levy: Optional[LevyMeasureSpec]) -> NoiseEnergyReport:
    if isinstance(noise, MultiplicativeNoise):
        return NoiseEnergyReport(0.0, 0.0, lambda t: 0.0, kappa=kappa(noise, levy))
    return NoiseEnergyReport(
        grad_energy=noise_grad_energy(noise, grid, levy),
        flat_energy_limit=noise_flat_energy(noise, grid, levy, noise.decay_horizon),
        flat_energy_fn=lambda t: noise_flat_energy(noise, grid, levy, t),
    )


def kappa(noise: MultiplicativeNoise, levy: Optional[LevyMeasureSpec]) -> float:
    """kappa = (sigma^2 + int eta^2 dlambda) / 2."""
    noise.ensure_nonnegative(levy)
    jump_part = 0.0
    if levy is not None:
        jump_part = profile_moment(noise.eta_profile, levy, 2)
    return 0.5 * (noise.sigma_const ** 2 + jump_part)


def check_kappa_window(kappa_value: float, alpha: float, lambda_1: float) -> KappaWindow:
    """0 <= kappa <= alpha * lambda_1, with margin alpha*lambda_1 - kappa."""
    margin = alpha * lambda_1 - kappa_value
    return KappaWindow(ok=bool(kappa_value >= 0 and margin >= 0), margin=float(margin))

