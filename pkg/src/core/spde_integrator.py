"""
SPDE Integrator
Semi-implicit Euler-Maruyama time stepping of
    du = [alpha*Lap u + beta*|u|^(m-1) u] dt + G dW + int H pi~(dt, dz)
on the interval grid, with cadlag bookkeeping at jump times and per-path
blow-up detection.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from src.config.settings import settings
from src.core.grid_domain import Field, IntervalGrid, h1_squared, inner, l2_squared, lp_power
from src.core.levy_noise import JumpEvent, LevyMeasureSpec, sample_jumps
from src.core.noise_models import AdditiveNoise, MultiplicativeNoise
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

Noise = Optional[Union[AdditiveNoise, MultiplicativeNoise]]
Probe = Callable[[np.ndarray, float], float]

ENTRY_FLAGS = {"grid": 0, "pre_jump": 1, "post_jump": 2, "blowup": 3}


class JumpMode(str, Enum):
    FIXED_GRID = "fixed_grid"
    JUMP_ADAPTED = "jump_adapted"


@dataclass(frozen=True)
class ModelParams:
    """
    Coefficients of the drift alpha*Lap u + beta*|u|^(m-1) u.

    alpha = 0, beta = 0 and m = 1 are accepted so that linear and pure-jump
    reductions can be simulated; see theorem_hypotheses_hold().
    """
    alpha: float
    beta: float
    m: float

    def __post_init__(self):
        for name in ("alpha", "beta", "m"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"alpha and beta must be nonnegative, got ({self.alpha}, {self.beta})")
        if self.m < 1:
            raise ValueError(f"Nonlinearity exponent must satisfy m >= 1, got {self.m}")

    def theorem_hypotheses_hold(self) -> bool:
        """m > 1 and alpha, beta > 0."""
        return self.m > 1 and self.alpha > 0 and self.beta > 0


@dataclass(frozen=True)
class StepScheme:
    dt: float
    jump_mode: JumpMode = JumpMode.JUMP_ADAPTED
    max_halvings: int = settings.DEFAULT_MAX_HALVINGS
    stability_factor: float = settings.STABILITY_FACTOR
    record_stride: int = settings.DEFAULT_RECORD_STRIDE

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValueError(f"Time step must be positive, got {self.dt}")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be nonnegative")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")
        object.__setattr__(self, "jump_mode", JumpMode(self.jump_mode))


@dataclass(frozen=True)
class JumpRecord:
    """Norm bookkeeping at one jump: l2_post - l2_pre = cross + jump_sq."""
    event: JumpEvent
    l2_pre: float
    l2_post: float
    cross: float
    jump_sq: float


@dataclass
class BlowupStatus:
    detected: bool = False
    tau: Optional[float] = None
    cause: Optional[str] = None


@dataclass
class TrajectoryRecord:
    """
    Cadlag record of one path.

    Entries are logged at base grid times (every record_stride steps), and in
    jump-adapted mode twice at each jump time (pre- and post-jump). A path that
    blows up ends with a single "blowup" entry at tau.
    """
    grid: IntervalGrid
    m: float
    times: List[float] = field(default_factory=list)
    kinds: List[str] = field(default_factory=list)
    l2sq: List[float] = field(default_factory=list)
    h1sq: List[float] = field(default_factory=list)
    lmp1: List[float] = field(default_factory=list)
    snapshots: Optional[List[np.ndarray]] = None
    jump_log: List[JumpEvent] = field(default_factory=list)
    jump_details: List[JumpRecord] = field(default_factory=list)
    probes: Dict[str, List[float]] = field(default_factory=dict)
    blowup: BlowupStatus = field(default_factory=BlowupStatus)
    final_state: Optional[np.ndarray] = None

    def grid_mask(self) -> np.ndarray:
        return np.array([kind == "grid" for kind in self.kinds], dtype=bool)

    def grid_times(self) -> np.ndarray:
        return np.asarray(self.times)[self.grid_mask()]

    def grid_series(self, name: str) -> np.ndarray:
        """One of l2sq, h1sq, lmp1 or a probe name, restricted to grid entries."""
        if name in self.probes:
            return np.asarray(self.probes[name], dtype=float)
        return np.asarray(getattr(self, name), dtype=float)[self.grid_mask()]

    def rows(self) -> List[Tuple[float, float, float, float, int]]:
        return [
            (t, a, b, c, ENTRY_FLAGS[kind])
            for t, a, b, c, kind in zip(self.times, self.l2sq, self.h1sq, self.lmp1, self.kinds)
        ]


# =============================================================================
# IMPLICIT SOLVE AND SINGLE STEP
# =============================================================================

@lru_cache(maxsize=256)
def _implicit_bands(n: int, h: float, alpha: float, dt: float) -> np.ndarray:
    """Upper banded storage of Id - dt*alpha*Lap for solveh_banded."""
    coupling = dt * alpha / h ** 2
    bands = np.empty((2, n))
    bands[0, 0] = 0.0
    bands[0, 1:] = -coupling
    bands[1, :] = 1.0 + 2.0 * coupling
    return bands


def solve_implicit(rhs: np.ndarray, grid: IntervalGrid, alpha: float, dt: float) -> np.ndarray:
    if not np.all(np.isfinite(rhs)):
        return np.full_like(rhs, np.nan)
    try:
        return solveh_banded(_implicit_bands(grid.n, grid.h, alpha, dt), rhs, check_finite=False)
    except LinAlgError as exc:
        raise RuntimeError(f"Implicit Laplacian solve failed at dt={dt:g}") from exc


def _step_values(
    u: np.ndarray,
    x: np.ndarray,
    grid: IntervalGrid,
    t: float,
    dt: float,
    params: ModelParams,
    noise: Noise,
    levy: Optional[LevyMeasureSpec],
    brownian_increment: float,
    jumps: Sequence[JumpEvent],
) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = u.copy()
        if params.beta:
            rhs += dt * params.beta * np.abs(u) ** (params.m - 1.0) * u
        if noise is not None:
            rhs += noise.diffusion(u, x, t) * brownian_increment
            for event in jumps:
                rhs += noise.jump_amplitude(u, x, t, event.mark)
            if levy is not None:
                rhs -= dt * noise.compensator(u, x, t, levy)
    return solve_implicit(rhs, grid, params.alpha, dt)


def step(
    u: Field,
    t: float,
    scheme: StepScheme,
    params: ModelParams,
    noise: Noise,
    levy: Optional[LevyMeasureSpec],
    brownian_increment: float,
    jumps: Sequence[JumpEvent] = (),
    dt: Optional[float] = None,
) -> Field:
    """
    One semi-implicit step from t to t + dt:
    (Id - dt*alpha*Lap) u' = u + dt*beta*|u|^(m-1) u + G dW + sum H(z_j) - dt*Comp.
    Jumps are binned into the step and all act on the pre-step state.
    """
    dt = scheme.dt if dt is None else dt
    grid = u.grid
    values = _step_values(
        u.values, grid.nodes, grid, t, dt, params, noise, levy, brownian_increment, jumps
    )
    return u.with_values(values)


def base_time_grid(dt: float, horizon: float) -> Tuple[np.ndarray, np.ndarray]:
    """Base times k*dt up to the horizon and the step lengths between them."""
    if horizon <= 0:
        raise ValueError(f"Horizon must be positive, got {horizon}")
    count = max(1, int(np.ceil(horizon / dt - 1e-9)))
    times = np.minimum(dt * np.arange(count + 1), horizon)
    times[-1] = horizon
    return times, np.diff(times)


# =============================================================================
# PATH INTEGRATION
# =============================================================================

class PathIntegrator:
    """Advances one path; owns its rng and workspaces."""

    def __init__(
        self,
        params: ModelParams,
        noise: Noise,
        levy: Optional[LevyMeasureSpec],
        grid: IntervalGrid,
        scheme: StepScheme,
        blowup_threshold: float,
        rng: np.random.Generator,
        probes: Optional[Dict[str, Probe]] = None,
        keep_snapshots: bool = False,
    ):
        if not blowup_threshold > 0:
            raise ValueError(f"Blow-up threshold must be positive, got {blowup_threshold}")
        self.params = params
        self.noise = noise
        self.levy = levy
        self.grid = grid
        self.scheme = scheme
        self.threshold_sq = float(blowup_threshold) ** 2
        self.rng = rng
        self.probes = probes or {}
        self.x = grid.nodes
        self.record = TrajectoryRecord(
            grid=grid,
            m=params.m,
            snapshots=[] if keep_snapshots else None,
            probes={name: [] for name in self.probes},
        )

    # -- bookkeeping --------------------------------------------------------------

    def _log(self, t: float, values: np.ndarray, kind: str) -> None:
        h = self.grid.h
        record = self.record
        with np.errstate(over="ignore", invalid="ignore"):
            record.times.append(float(t))
            record.kinds.append(kind)
            record.l2sq.append(l2_squared(values, h))
            record.h1sq.append(h1_squared(values, h))
            record.lmp1.append(lp_power(values, self.params.m + 1.0, h))
        if kind == "grid":
            for name, probe in self.probes.items():
                record.probes[name].append(float(probe(values, t)))
            if record.snapshots is not None:
                record.snapshots.append(values.copy())

    def _exceeds(self, values: np.ndarray) -> Optional[str]:
        if not np.all(np.isfinite(values)):
            return "non_finite"
        with np.errstate(over="ignore"):
            if l2_squared(values, self.grid.h) >= self.threshold_sq:
                return "threshold"
        return None

    def _mark_blowup(self, t: float, values: np.ndarray, cause: str) -> None:
        self._log(t, values, "blowup")
        self.record.blowup = BlowupStatus(detected=True, tau=float(t), cause=cause)
        logger.debug(f"Path blow-up at t={t:.6g} ({cause})")

    # -- stepping -------------------------------------------------------------------

    def _stable(self, values: np.ndarray, dt: float) -> bool:
        if not self.params.beta:
            return True
        sup = float(np.max(np.abs(values)))
        return dt * self.params.beta * sup ** (self.params.m - 1.0) <= self.scheme.stability_factor

    def _bridge(self, span: float, remaining: float, increment: float) -> float:
        """Brownian increment over the first `span` of `remaining`, given the total."""
        if span >= remaining:
            return increment
        mean = span / remaining * increment
        std = np.sqrt(span * (remaining - span) / remaining)
        return float(mean + std * self.rng.standard_normal())

    def _diffuse(
        self,
        u: np.ndarray,
        t: float,
        span: float,
        increment: float,
        jumps: List[JumpEvent],
        depth: int = 0,
    ) -> Optional[np.ndarray]:
        if not self._stable(u, span):
            if depth >= self.scheme.max_halvings:
                self._mark_blowup(t, u, "step_collapse")
                return None
            half = 0.5 * span
            first = self._bridge(half, span, increment)
            early = [event for event in jumps if event.time <= t + half]
            late = [event for event in jumps if event.time > t + half]
            middle = self._diffuse(u, t, half, first, early, depth + 1)
            if middle is None:
                return None
            return self._diffuse(middle, t + half, half, increment - first, late, depth + 1)

        new = _step_values(
            u, self.x, self.grid, t, span, self.params, self.noise, self.levy, increment, jumps
        )
        cause = self._exceeds(new)
        if cause:
            self._mark_blowup(t + span, new, cause)
            return None
        return new

    def _jump(self, u: np.ndarray, event: JumpEvent) -> Optional[np.ndarray]:
        h = self.grid.h
        amplitude = self.noise.jump_amplitude(u, self.x, event.time, event.mark)
        with np.errstate(over="ignore", invalid="ignore"):
            post = u + amplitude
        self.record.jump_log.append(event)
        self._log(event.time, u, "pre_jump")
        self._log(event.time, post, "post_jump")
        self.record.jump_details.append(JumpRecord(
            event=event,
            l2_pre=self.record.l2sq[-2],
            l2_post=self.record.l2sq[-1],
            cross=2.0 * inner(u, amplitude, h),
            jump_sq=l2_squared(amplitude, h),
        ))
        cause = self._exceeds(post)
        if cause:
            self._mark_blowup(event.time, post, cause)
            return None
        return post

    def _adapted_step(
        self,
        u: np.ndarray,
        t: float,
        span: float,
        increment: float,
        jumps: List[JumpEvent],
    ) -> Optional[np.ndarray]:
        cursor, remaining, pending = t, span, increment
        for event in jumps:
            gap = event.time - cursor
            if gap > 0:
                piece = self._bridge(gap, remaining, pending)
                u = self._diffuse(u, cursor, gap, piece, [])
                if u is None:
                    return None
                pending -= piece
                remaining -= gap
                cursor = event.time
            u = self._jump(u, event)
            if u is None:
                return None
        if remaining > 0:
            u = self._diffuse(u, cursor, remaining, pending, [])
        return u

    def run(
        self,
        u0: Field,
        times: np.ndarray,
        increments: np.ndarray,
        jumps: Sequence[JumpEvent],
    ) -> TrajectoryRecord:
        u = np.array(u0.values, dtype=float)
        self._log(float(times[0]), u, "grid")
        cause = self._exceeds(u)
        if cause:
            self._mark_blowup(float(times[0]), u, cause)
            return self.record

        adapted = self.scheme.jump_mode is JumpMode.JUMP_ADAPTED and self.noise is not None
        stride = self.scheme.record_stride
        pending = sorted(jumps) if self.noise is not None else []
        cursor = 0
        count = len(increments)
        for k in range(count):
            t, t_next = float(times[k]), float(times[k + 1])
            batch = []
            while cursor < len(pending) and pending[cursor].time <= t_next:
                batch.append(pending[cursor])
                cursor += 1
            if adapted:
                u = self._adapted_step(u, t, t_next - t, float(increments[k]), batch)
            else:
                self.record.jump_log.extend(batch)
                u = self._diffuse(u, t, t_next - t, float(increments[k]), batch)
            if u is None:
                return self.record
            if (k + 1) % stride == 0 or k + 1 == count:
                self._log(t_next, u, "grid")

        self.record.final_state = u
        return self.record


def simulate_path(
    params: ModelParams,
    noise: Noise,
    levy: Optional[LevyMeasureSpec],
    u0: Field,
    scheme: StepScheme,
    horizon: float,
    blowup_threshold: float,
    rng: np.random.Generator,
    probes: Optional[Dict[str, Probe]] = None,
    keep_snapshots: bool = False,
) -> TrajectoryRecord:
    """
    Integrate one path over [0, horizon] or until blow-up.

    The stream is consumed in a fixed order (jump events, base Brownian
    increments, then bridge refinements) so a path is determined by its stream.
    """
    if not u0.is_finite:
        raise ValueError("Initial data must be finite")
    times, lengths = base_time_grid(scheme.dt, horizon)
    jumps: List[JumpEvent] = []
    if levy is not None and noise is not None:
        jumps = sample_jumps(levy, horizon, rng)
    increments = rng.standard_normal(len(lengths)) * np.sqrt(lengths)
    integrator = PathIntegrator(
        params, noise, levy, u0.grid, scheme, blowup_threshold, rng, probes, keep_snapshots
    )
    return integrator.run(u0, times, increments, jumps)


def integrate_on_grid(
    params: ModelParams,
    noise: Noise,
    levy: Optional[LevyMeasureSpec],
    u0: Field,
    scheme: StepScheme,
    increments: np.ndarray,
    jumps: Sequence[JumpEvent],
    rng: np.random.Generator,
    blowup_threshold: float = settings.DEFAULT_BLOWUP_THRESHOLD,
) -> TrajectoryRecord:
    """Integrate with caller-supplied base increments of length scheme.dt (shared-noise studies)."""
    times = scheme.dt * np.arange(len(increments) + 1)
    integrator = PathIntegrator(params, noise, levy, u0.grid, scheme, blowup_threshold, rng)
    return integrator.run(u0, times, np.asarray(increments, dtype=float), jumps)
