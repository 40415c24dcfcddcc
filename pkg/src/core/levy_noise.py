"""
Levy Noise
Finite-activity Levy measures on the real mark space, Poisson jump sampling,
integrals against the measure and the per-path random streams.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Tuple, Union

import numpy as np
from scipy.integrate import quad, quad_vec

from src.config.settings import settings


@dataclass(frozen=True)
class FiniteAtoms:
    """lambda = sum_k r_k * delta_{z_k}."""
    atoms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(z), float(r)) for z, r in self.atoms))
        for mark, rate in self.atoms:
            if mark == 0.0:
                raise ValueError("Levy measure cannot charge the origin (atom at z = 0)")
            if not np.isfinite(mark) or not np.isfinite(rate) or rate <= 0:
                raise ValueError(f"Atom ({mark}, {rate}) needs a finite mark and a positive rate")

    @property
    def marks(self) -> np.ndarray:
        return np.array([z for z, _ in self.atoms], dtype=float)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for _, r in self.atoms], dtype=float)


@dataclass(frozen=True)
class TruncatedStable:
    """Symmetric density c/|z|^(1+alpha_stab) on r_min <= |z| <= r_max."""
    c: float
    alpha_stab: float
    r_min: float
    r_max: float

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"Stable intensity c must be positive, got {self.c}")
        if not 0.0 < self.alpha_stab < 2.0:
            raise ValueError(f"Stability index must lie in (0, 2), got {self.alpha_stab}")
        if self.r_min <= 0 or self.r_max <= self.r_min:
            raise ValueError(
                f"Truncation needs 0 < r_min < r_max, got ({self.r_min}, {self.r_max})"
            )

    def density(self, z: np.ndarray) -> np.ndarray:
        return self.c * np.abs(z) ** (-1.0 - self.alpha_stab)

    def half_line_mass(self, lower: float, upper: float) -> float:
        """Mass of [lower, upper] within one half-line of the support."""
        a = self.alpha_stab
        lower = max(lower, self.r_min)
        upper = min(upper, self.r_max)
        if upper <= lower:
            return 0.0
        return self.c * (lower ** (-a) - upper ** (-a)) / a


LevyMeasureSpec = Union[FiniteAtoms, TruncatedStable]


@dataclass(frozen=True, order=True)
class JumpEvent:
    time: float
    mark: float = field(compare=False)


# =============================================================================
# RANDOM STREAMS
# =============================================================================

def path_stream(master_seed: int, path_index: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by (master seed, path index)."""
    seed_seq = np.random.SeedSequence([int(master_seed) & (2 ** 64 - 1), int(path_index)])
    return np.random.Generator(np.random.Philox(seed_seq))


# =============================================================================
# MEASURE OPERATIONS
# =============================================================================

def total_rate(spec: LevyMeasureSpec) -> float:
    """lambda(Z); finite for both variants."""
    if isinstance(spec, FiniteAtoms):
        return float(np.sum(spec.rates)) if spec.atoms else 0.0
    return 2.0 * spec.half_line_mass(spec.r_min, spec.r_max)


def support_points(spec: LevyMeasureSpec, resolution: int = 257) -> np.ndarray:
    """Atoms, or a symmetric sampling of the truncated support."""
    if isinstance(spec, FiniteAtoms):
        return spec.marks
    positive = np.geomspace(spec.r_min, spec.r_max, resolution)
    return np.concatenate((-positive[::-1], positive))


def sample_marks(spec: LevyMeasureSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. marks from lambda / lambda(Z)."""
    if count == 0:
        return np.empty(0)
    if isinstance(spec, FiniteAtoms):
        probabilities = spec.rates / spec.rates.sum()
        return spec.marks[rng.choice(len(spec.atoms), size=count, p=probabilities)]
    a = spec.alpha_stab
    upper_tail = spec.r_min ** (-a)
    span = upper_tail - spec.r_max ** (-a)
    uniforms = rng.random(count)
    radii = (upper_tail - uniforms * span) ** (-1.0 / a)
    signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    return signs * radii


def sample_jumps(
    spec: LevyMeasureSpec,
    horizon: float,
    rng: np.random.Generator
) -> List[JumpEvent]:
    """Jump events of the Poisson random measure on [0, horizon], sorted by time."""
    if horizon <= 0:
        raise ValueError(f"Jump horizon must be positive, got {horizon}")
    rate = total_rate(spec)
    if rate == 0.0:
        return []
    count = int(rng.poisson(rate * horizon))
    times = np.sort(rng.uniform(0.0, horizon, size=count))
    marks = sample_marks(spec, count, rng)
    return [JumpEvent(float(t), float(z)) for t, z in zip(times, marks)]


def integral_against_levy(
    spec: LevyMeasureSpec,
    g: Callable[[float], Union[float, np.ndarray]]
) -> Union[float, np.ndarray]:
    """
    Integral of g(z) lambda(dz).

    g may be scalar- or array-valued (for example a nodal field per mark);
    array-valued integrands over a density use vector quadrature.
    """
    if isinstance(spec, FiniteAtoms):
        if not spec.atoms:
            return 0.0
        values = [np.asarray(g(z), dtype=float) for z in spec.marks]
        for value in values:
            if not np.all(np.isfinite(value)):
                raise ValueError("Levy integrand is not finite on the support")
        total = sum(r * v for r, v in zip(spec.rates, values))
        return float(total) if np.ndim(total) == 0 else total

    probe = np.asarray(g(spec.r_min), dtype=float)
    for z in support_points(spec, resolution=33):
        if not np.all(np.isfinite(np.asarray(g(z), dtype=float))):
            raise ValueError("Levy integrand is not finite on the support")
    reltol = settings.LEVY_QUAD_RELTOL

    if probe.ndim == 0:
        def weighted(z):
            return float(g(z)) * float(spec.density(z))
        right, _ = quad(weighted, spec.r_min, spec.r_max, epsrel=reltol, epsabs=0.0, limit=200)
        left, _ = quad(weighted, -spec.r_max, -spec.r_min, epsrel=reltol, epsabs=0.0, limit=200)
        result = right + left
        if not np.isfinite(result):
            raise ValueError("Levy integral did not produce a finite value")
        return float(result)

    def weighted_vec(z):
        return np.asarray(g(z), dtype=float) * spec.density(z)
    right, _ = quad_vec(weighted_vec, spec.r_min, spec.r_max, epsrel=reltol, epsabs=0.0)
    left, _ = quad_vec(weighted_vec, -spec.r_max, -spec.r_min, epsrel=reltol, epsabs=0.0)
    result = right + left
    if not np.all(np.isfinite(result)):
        raise ValueError("Levy integral did not produce a finite value")
    return result


def levy_condition(spec: LevyMeasureSpec) -> float:
    """The integral of min(|z|^2, 1) against lambda; finite for every valid spec."""
    return float(integral_against_levy(spec, lambda z: min(z * z, 1.0)))
