"""
Experiment Builder
Turns a validated ExperimentConfig into the numerical objects the services run.
"""
import inspect
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from src.core.grid_domain import Field, IntervalGrid
from src.core.levy_noise import FiniteAtoms, LevyMeasureSpec, TruncatedStable, integral_against_levy
from src.core.monte_carlo import EnsembleConfig
from src.core.noise_models import AdditiveNoise, MultiplicativeNoise
from src.core.presets import PresetRegistry
from src.core.spde_integrator import ModelParams, StepScheme
from src.models.core_models import ExperimentConfig, LevyBlock, NoiseBlock
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

Noise = Optional[Union[AdditiveNoise, MultiplicativeNoise]]


def build_levy(block: LevyBlock) -> Optional[LevyMeasureSpec]:
    """None for kind = "none"; raises ValueError on missing or invalid parameters."""
    if block.kind == "none":
        return None
    if block.kind == "atoms":
        return FiniteAtoms(tuple(block.atoms))
    missing = [name for name in ("c", "alpha_stab", "r_min", "r_max") if getattr(block, name) is None]
    if missing:
        raise ValueError(f"truncated_stable measure needs {', '.join(missing)}")
    return TruncatedStable(c=block.c, alpha_stab=block.alpha_stab, r_min=block.r_min, r_max=block.r_max)


def _additive_params(block: NoiseBlock, length: float, factory: Callable) -> dict:
    available = dict(
        sigma_scale=block.sigma_scale,
        eta_scale=block.eta_scale,
        decay_rate=block.decay_rate,
        mode=block.mode,
        length=length,
        decay_horizon=block.decay_horizon,
    )
    accepted = inspect.signature(factory).parameters
    if any(p.kind == inspect.Parameter.VAR_KEYWORD for p in accepted.values()):
        return available
    return {key: value for key, value in available.items() if key in accepted}


def build_noise(block: NoiseBlock, levy: Optional[LevyMeasureSpec], length: float) -> Noise:
    """Noise family from its preset; multiplicative profiles must be nonnegative on the support."""
    if block.kind == "none":
        return None
    if block.kind == "additive":
        if block.decay_horizon is None:
            raise ValueError("additive noise needs a decay_horizon")
        factory = PresetRegistry.additive_factory(block.preset)
        return factory(**_additive_params(block, length, factory))
    return PresetRegistry.multiplicative_noise(block.sigma, block.eta_profile, block.eta_scale, levy)


@dataclass(frozen=True)
class Experiment:
    """Numerical objects of one config, plus the config they came from."""
    config: ExperimentConfig
    params: ModelParams
    grid: IntervalGrid
    u0_profile: Callable[[np.ndarray], np.ndarray]
    u0: Field
    levy: Optional[LevyMeasureSpec]
    noise: Noise
    scheme: StepScheme

    @property
    def mode(self) -> str:
        return "multiplicative" if isinstance(self.noise, MultiplicativeNoise) else "additive"

    @property
    def blowup_threshold(self) -> float:
        return self.config.scheme.blowup_threshold

    def ensemble_config(
        self,
        paths: Optional[int] = None,
        horizon: Optional[float] = None,
        keep_records: bool = False,
    ) -> EnsembleConfig:
        block = self.config.ensemble
        return EnsembleConfig(
            paths=paths if paths is not None else block.paths,
            master_seed=block.master_seed,
            scheme=self.scheme,
            horizon=horizon if horizon is not None else block.horizon,
            blowup_threshold=self.blowup_threshold,
            threads=block.threads,
            keep_records=keep_records,
        )

    def _rebuilt(self, block_name: str, **updates) -> "Experiment":
        block = getattr(self.config, block_name).model_copy(update=updates)
        return build_experiment(self.config.model_copy(update={block_name: block}))

    def with_amplitude(self, amplitude: float) -> "Experiment":
        return self._rebuilt("initial", amplitude=float(amplitude))

    def with_noise_scale(self, scale: float) -> "Experiment":
        """Sets both the Brownian and the jump scale of the noise preset to `scale`."""
        if self.config.noise.kind == "none":
            raise ValueError("noise scale sweep needs an additive or multiplicative noise block")
        if self.config.noise.kind == "additive":
            return self._rebuilt("noise", sigma_scale=float(scale), eta_scale=float(scale))
        return self._rebuilt("noise", sigma=float(scale), eta_scale=float(scale))

    def with_kappa(self, kappa_value: float) -> "Experiment":
        """Chooses sigma so that 1/2 (sigma^2 + int eta^2) equals kappa_value, keeping the jump part."""
        if not isinstance(self.noise, MultiplicativeNoise):
            raise ValueError("kappa sweep needs multiplicative noise")
        jump_part = 0.0
        if self.levy is not None:
            profile = self.noise.eta_profile
            jump_part = integral_against_levy(self.levy, lambda z: profile(z) ** 2)
        sigma_sq = 2.0 * kappa_value - jump_part
        if sigma_sq < 0:
            raise ValueError(
                f"kappa = {kappa_value:g} is below the jump contribution {0.5 * jump_part:g}"
            )
        return self._rebuilt("noise", sigma=math.sqrt(sigma_sq))


def build_experiment(config: ExperimentConfig) -> Experiment:
    levy = build_levy(config.levy)
    noise = build_noise(config.noise, levy, config.grid.length)
    grid = IntervalGrid(config.grid.length, config.grid.n)
    profile = PresetRegistry.initial_profile(
        config.initial.preset, config.initial.amplitude, config.initial.mode, config.grid.length
    )
    scheme = StepScheme(
        dt=config.scheme.dt,
        jump_mode=config.scheme.jump_mode,
        max_halvings=config.scheme.max_halvings,
        record_stride=config.ensemble.record_stride,
    )
    params = ModelParams(alpha=config.model.alpha, beta=config.model.beta, m=config.model.m)
    logger.debug(f"Built experiment: {config.noise.kind} noise, levy={config.levy.kind}, n={grid.n}")
    return Experiment(
        config=config,
        params=params,
        grid=grid,
        u0_profile=profile,
        u0=grid.sample(profile),
        levy=levy,
        noise=noise,
        scheme=scheme,
    )
