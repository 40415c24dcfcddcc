"""
Preset Registry
Named initial-data profiles and noise families that experiment configs refer
to, so configs carry parameters instead of code.
"""
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from src.core.levy_noise import LevyMeasureSpec
from src.core.noise_models import AdditiveNoise, MultiplicativeNoise


# =============================================================================
# INITIAL DATA
# =============================================================================

def sine_profile(amplitude: float, mode: int, length: float) -> Callable[[np.ndarray], np.ndarray]:
    """u0(x) = c * sin(k*pi*x/L); sign-changing for k >= 2."""
    wavenumber = mode * np.pi / length

    def profile(x):
        return amplitude * np.sin(wavenumber * x)
    return profile


def parabola_profile(amplitude: float, mode: int, length: float) -> Callable[[np.ndarray], np.ndarray]:
    """u0(x) = 4c x (L - x) / L^2, peak value c at the midpoint."""
    def profile(x):
        return 4.0 * amplitude * x * (length - x) / length ** 2
    return profile


def zero_profile(amplitude: float, mode: int, length: float) -> Callable[[np.ndarray], np.ndarray]:
    def profile(x):
        return np.zeros_like(x)
    return profile


# =============================================================================
# ADDITIVE FAMILIES
# =============================================================================

def _spatial_mode(mode: int, length: float) -> Callable[[np.ndarray], np.ndarray]:
    wavenumber = mode * np.pi / length
    return lambda x: np.sin(wavenumber * x)


def decaying_sine_noise(
    sigma_scale: float = 0.0,
    eta_scale: float = 0.0,
    decay_rate: float = 1.0,
    mode: int = 1,
    length: float = 1.0,
    decay_horizon: float = 40.0,
) -> AdditiveNoise:
    """sigma = s_sigma e^{-gt} sin(k pi x/L), eta = s_eta z e^{-gt} sin(k pi x/L)."""
    shape = _spatial_mode(mode, length)

    def sigma_fn(x, t):
        return sigma_scale * np.exp(-decay_rate * t) * shape(x)

    def eta_space(x, t):
        return eta_scale * np.exp(-decay_rate * t) * shape(x)

    return AdditiveNoise.separable(sigma_fn, _identity_mark, eta_space, decay_horizon)


def steady_sine_noise(
    sigma_scale: float = 0.0,
    eta_scale: float = 0.0,
    mode: int = 1,
    length: float = 1.0,
    decay_horizon: float = 10.0,
) -> AdditiveNoise:
    """Time-constant sigma = s_sigma sin(k pi x/L), eta = s_eta z sin(k pi x/L) up to the horizon."""
    shape = _spatial_mode(mode, length)

    def sigma_fn(x, t):
        return sigma_scale * shape(x) + 0.0 * t

    def eta_space(x, t):
        return eta_scale * shape(x) + 0.0 * t

    return AdditiveNoise.separable(sigma_fn, _identity_mark, eta_space, decay_horizon)


def zero_additive_noise(decay_horizon: float = 1.0, **_: Any) -> AdditiveNoise:
    return decaying_sine_noise(0.0, 0.0, decay_horizon=decay_horizon)


def _identity_mark(z: float) -> float:
    return z


# =============================================================================
# MULTIPLICATIVE JUMP PROFILES
# =============================================================================

@dataclass(frozen=True)
class LinearProfile:
    scale: float

    def __call__(self, z: float) -> float:
        return self.scale * z


@dataclass(frozen=True)
class AbsProfile:
    scale: float

    def __call__(self, z: float) -> float:
        return self.scale * abs(z)


@dataclass(frozen=True)
class ConstantProfile:
    scale: float

    def __call__(self, z: float) -> float:
        return self.scale


class PresetRegistry:
    """Registry of named presets, looked up by the config loader."""

    _initial: Dict[str, Callable[..., Callable[[np.ndarray], np.ndarray]]] = {
        "sine": sine_profile,
        "parabola": parabola_profile,
        "zero": zero_profile,
    }

    _additive: Dict[str, Callable[..., AdditiveNoise]] = {
        "zero": zero_additive_noise,
        "decaying_sine": decaying_sine_noise,
        "steady_sine": steady_sine_noise,
    }

    _eta_profiles: Dict[str, Callable[[float], Callable[[float], float]]] = {
        "zero": lambda scale: ConstantProfile(0.0),
        "constant": ConstantProfile,
        "linear": LinearProfile,
        "abs": AbsProfile,
    }

    @classmethod
    def initial_profile(cls, name: str, amplitude: float, mode: int, length: float):
        if name not in cls._initial:
            raise ValueError(f"Unknown initial-data preset: {name}")
        return cls._initial[name](amplitude, mode, length)

    @classmethod
    def additive_factory(cls, name: str) -> Callable[..., AdditiveNoise]:
        if name not in cls._additive:
            raise ValueError(f"Unknown additive noise preset: {name}")
        return cls._additive[name]

    @classmethod
    def additive_noise(cls, name: str, **params: Any) -> AdditiveNoise:
        return cls.additive_factory(name)(**params)

    @classmethod
    def multiplicative_noise(
        cls,
        sigma: float,
        eta_profile: str,
        eta_scale: float,
        levy: Optional[LevyMeasureSpec]
    ) -> MultiplicativeNoise:
        if eta_profile not in cls._eta_profiles:
            raise ValueError(f"Unknown multiplicative jump profile: {eta_profile}")
        profile = cls._eta_profiles[eta_profile](eta_scale)
        return MultiplicativeNoise.for_measure(sigma, profile, levy)

    @classmethod
    def names(cls, kind: str) -> list[str]:
        table = {"initial": cls._initial, "additive": cls._additive, "eta_profile": cls._eta_profiles}
        return list(table[kind].keys())
