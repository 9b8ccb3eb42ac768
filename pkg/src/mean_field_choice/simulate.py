"""Exact stochastic simulation of the decision chain (direct-method SSA)."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import ModelParams, RateFamily, RateTable, build_rate_table, order_parameter_grid
from .spectral import DistributionVector, ZeitgeistSchedule

logger = logging.getLogger(__name__)

SeedLike = int | np.random.SeedSequence | None


@dataclass(frozen=True)
class BinomialStart:
    """Every agent starts right-deciding independently with probability p0."""

    p0: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p0 <= 1.0:
            raise ParameterError(f"p0 must lie in [0, 1], got {self.p0}")


InitialState = int | BinomialStart


@dataclass(frozen=True)
class JumpPath:
    """Event-level record: ``states[k]`` holds on [times[k], times[k+1])."""

    times: np.ndarray
    states: np.ndarray
    t_max: float

    def holding_times(self) -> np.ndarray:
        return np.diff(self.times)


@dataclass(frozen=True)
class Trajectory:
    """States sampled on the uniform grid 0, dt, ..., M dt.

    ``seed`` is the integer seed of a single run, or the spawn index of an
    ensemble member under the master seed.
    """

    grid: np.ndarray
    states: np.ndarray
    N: int
    seed: int | None = None

    @property
    def m(self) -> np.ndarray:
        return order_parameter_grid(self.N)[self.states]


@dataclass(frozen=True)
class EnsembleStats:
    """Per-time ensemble moments and empirical distributions."""

    grid: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    histograms: np.ndarray
    size: int

    @property
    def N(self) -> int:
        return self.histograms.shape[1] - 1

    def distribution(self, index: int) -> DistributionVector:
        return DistributionVector(
            probs=self.histograms[index], timestamp=float(self.grid[index]), method="ensemble"
        )

    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.variance / self.size)


@dataclass(frozen=True)
class _Segment:
    start: float
    stop: float
    birth: np.ndarray
    death: np.ndarray


def _make_grid(t_max: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    if t_max < 0:
        raise ParameterError(f"t_max must be >= 0, got {t_max}")
    steps = int(round(t_max / dt))
    if abs(steps * dt - t_max) > 1e-9 * max(t_max, 1.0):
        raise ParameterError(f"t_max={t_max} is not a whole number of steps dt={dt}")
    return np.arange(steps + 1) * dt


def _initial_state(init: InitialState, N: int, rng: np.random.Generator) -> int:
    if isinstance(init, BinomialStart):
        return int(rng.binomial(N, init.p0))
    n0 = int(init)
    if not 0 <= n0 <= N:
        raise ParameterError(f"initial state {n0} outside [0, {N}]")
    return n0


def _rng(seed: SeedLike) -> tuple[np.random.Generator, int | None]:
    if isinstance(seed, np.random.SeedSequence):
        # Ensemble children are identified by their spawn index.
        index = int(seed.spawn_key[-1]) if seed.spawn_key else None
        return np.random.default_rng(seed), index
    return np.random.default_rng(seed), seed


def _run_segments(
    rng: np.random.Generator, segments: list[_Segment], n0: int
) -> tuple[list[float], list[int]]:
    """Direct method across consecutive constant-rate segments.

    A waiting time that crosses a segment end is discarded and redrawn from
    the breakpoint with the next segment's rates.
    """
    times = [0.0]
    states = [n0]
    n = n0
    for segment in segments:
        t = segment.start
        birth, death = segment.birth, segment.death
        while True:
            up = birth[n]
            total = up + death[n]
            if total <= 0:
                break
            wait = np.log(1.0 / (1.0 - rng.random())) / total
            choice = rng.random()
            if t + wait >= segment.stop:
                break
            t += wait
            n = n + 1 if choice * total < up else n - 1
            times.append(t)
            states.append(n)
    return times, states


def _sample_grid(path: JumpPath, grid: np.ndarray) -> np.ndarray:
    index = np.searchsorted(path.times, grid, side="right") - 1
    return path.states[index]


def simulate_jumps(
    rates: RateTable, init: InitialState, t_max: float, seed: SeedLike = None
) -> JumpPath:
    """Every event of one trajectory up to t_max."""
    rng, _ = _rng(seed)
    n0 = _initial_state(init, rates.N, rng)
    times, states = _run_segments(rng, [_Segment(0.0, t_max, rates.birth, rates.death)], n0)
    return JumpPath(times=np.array(times), states=np.array(states, dtype=int), t_max=t_max)


def simulate(
    rates: RateTable, init: InitialState, t_max: float, dt: float, seed: SeedLike = None
) -> Trajectory:
    """One SSA trajectory recorded on the grid 0, dt, ..., t_max.

    The state at a grid time is the state holding at that instant. A state
    with zero exit rate freezes the trajectory.
    """
    grid = _make_grid(t_max, dt)
    rng, master = _rng(seed)
    n0 = _initial_state(init, rates.N, rng)
    times, states = _run_segments(rng, [_Segment(0.0, t_max, rates.birth, rates.death)], n0)
    path = JumpPath(times=np.array(times), states=np.array(states, dtype=int), t_max=t_max)
    return Trajectory(grid=grid, states=_sample_grid(path, grid), N=rates.N, seed=master)


def simulate_piecewise(
    schedule: ZeitgeistSchedule,
    params: ModelParams,
    family: RateFamily,
    init: InitialState,
    t_max: float,
    dt: float,
    seed: SeedLike = None,
) -> Trajectory:
    """SSA under a piecewise-constant zeitgeist; the state carries over at breakpoints."""
    if t_max > schedule.end:
        raise ParameterError(f"t_max={t_max} runs past the schedule end {schedule.end}")
    grid = _make_grid(t_max, dt)
    segments = []
    for start, stop, F in schedule.intervals():
        if start >= t_max:
            break
        rates = build_rate_table(params.with_field(F=F), family)
        segments.append(_Segment(start, min(stop, t_max), rates.birth, rates.death))
    rng, master = _rng(seed)
    n0 = _initial_state(init, params.N, rng)
    times, states = _run_segments(rng, segments, n0)
    path = JumpPath(times=np.array(times), states=np.array(states, dtype=int), t_max=t_max)
    return Trajectory(grid=grid, states=_sample_grid(path, grid), N=params.N, seed=master)


def ensemble_stats(trajectories: list[Trajectory]) -> EnsembleStats:
    """Per-time mean, population variance and histogram over trajectories on one grid."""
    if not trajectories:
        raise ParameterError("need at least one trajectory")
    grid = trajectories[0].grid
    N = trajectories[0].N
    runs = np.stack([trajectory.states for trajectory in trajectories])
    size = runs.shape[0]
    histograms = np.zeros((len(grid), N + 1))
    for k in range(len(grid)):
        histograms[k] = np.bincount(runs[:, k], minlength=N + 1) / size
    mean = runs.mean(axis=0)
    variance = np.maximum((runs.astype(float) ** 2).mean(axis=0) - mean**2, 0.0)
    return EnsembleStats(grid=grid, mean=mean, variance=variance, histograms=histograms, size=size)


def _children(size: int, seed: int | None) -> list[np.random.SeedSequence]:
    if size < 1:
        raise ParameterError(f"ensemble size must be >= 1, got {size}")
    return np.random.SeedSequence(seed).spawn(size)


def sample_ensemble(
    rates: RateTable,
    init: InitialState,
    t_max: float,
    dt: float,
    size: int,
    seed: int | None = None,
) -> list[Trajectory]:
    """``size`` independent trajectories.

    Each trajectory draws from its own child of ``SeedSequence(seed)``, so
    results depend only on the master seed and the trajectory index.
    """
    children = _children(size, seed)
    logger.info(f"Simulating {size} trajectories of N={rates.N} up to t={t_max}")
    return [simulate(rates, init, t_max, dt, seed=child) for child in children]


def simulate_ensemble(
    rates: RateTable,
    init: InitialState,
    t_max: float,
    dt: float,
    size: int,
    seed: int | None = None,
) -> EnsembleStats:
    """Moments and histograms of ``size`` independent trajectories."""
    return ensemble_stats(sample_ensemble(rates, init, t_max, dt, size, seed))


def sample_piecewise_ensemble(
    schedule: ZeitgeistSchedule,
    params: ModelParams,
    family: RateFamily,
    init: InitialState,
    t_max: float,
    dt: float,
    size: int,
    seed: int | None = None,
) -> list[Trajectory]:
    children = _children(size, seed)
    logger.info(f"Simulating {size} trajectories under a {len(schedule.values)}-step zeitgeist")
    return [
        simulate_piecewise(schedule, params, family, init, t_max, dt, seed=child)
        for child in children
    ]


def simulate_piecewise_ensemble(
    schedule: ZeitgeistSchedule,
    params: ModelParams,
    family: RateFamily,
    init: InitialState,
    t_max: float,
    dt: float,
    size: int,
    seed: int | None = None,
) -> EnsembleStats:
    return ensemble_stats(
        sample_piecewise_ensemble(schedule, params, family, init, t_max, dt, size, seed)
    )


def first_passage(
    rates: RateTable, n0: int, targets: set[int], rng: np.random.Generator
) -> tuple[float, int]:
    """Time until the chain first enters one of ``targets``, and the state hit."""
    if not 0 <= n0 <= rates.N:
        raise ParameterError(f"initial state {n0} outside [0, {rates.N}]")
    t = 0.0
    n = n0
    while n not in targets:
        up = rates.birth[n]
        total = up + rates.death[n]
        if total <= 0:
            raise ParameterError(f"state {n} has no exit; targets are unreachable")
        t += np.log(1.0 / (1.0 - rng.random())) / total
        n = n + 1 if rng.random() * total < up else n - 1
    return t, n
