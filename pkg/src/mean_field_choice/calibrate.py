"""Likelihood-based calibration of (F, J, gamma) from trajectory data.

The likelihood of a trajectory is the product of analytic transition
probabilities between consecutive observations, each conditioned on its
predecessor; the first observation of every trajectory is taken as given.
Rationality is fixed to 1 and altruism to 0, since only the products with
rationality are identifiable.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MeanFieldError, ParameterError, UndefinedMetricError
from .model import Logit, ModelParams, RateFamily, build_rate_table
from .simulate import InitialState, simulate
from .spectral import spectrum_of, transition_columns

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-300
STATE_TOLERANCE = 1e-9
MIN_POPULATION = 8

# Self-adaptation of the mutation factor and crossover rate.
REGENERATE_FACTOR = 0.1
REGENERATE_CROSSOVER = 0.1
FACTOR_LOWER = 0.1
FACTOR_SPAN = 0.9


@dataclass(frozen=True)
class Trajectory:
    """Observed states ``states[i]`` at non-decreasing ``times[i]``."""

    times: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class Dataset:
    """Trajectories of one population of N agents, observed as integer states."""

    N: int
    trajectories: tuple[Trajectory, ...]
    beta: float = 1.0
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ParameterError(f"N must be >= 1, got {self.N}")
        for index, trajectory in enumerate(self.trajectories):
            if len(trajectory) < 2:
                raise ParameterError(f"trajectory {index} has fewer than two points")
            if np.any(np.diff(trajectory.times) < 0):
                raise ParameterError(f"trajectory {index} has decreasing times")
            if np.any(trajectory.states < 0) or np.any(trajectory.states > self.N):
                raise ParameterError(f"trajectory {index} has states outside [0, {self.N}]")

    @classmethod
    def from_order_parameter(
        cls,
        N: int,
        series: Sequence[tuple[Sequence[float], Sequence[float]]],
        beta: float = 1.0,
        alpha: float = 0.0,
    ) -> "Dataset":
        """Build from (times, m) pairs, mapping each m to n = N(m + 1)/2."""
        trajectories = []
        for index, (times, values) in enumerate(series):
            trajectories.append(
                Trajectory(
                    times=np.asarray(times, dtype=float),
                    states=states_from_order_parameter(values, N, label=f"trajectory {index}"),
                )
            )
        return cls(N=N, trajectories=tuple(trajectories), beta=beta, alpha=alpha)

    @property
    def points(self) -> int:
        return sum(len(trajectory) for trajectory in self.trajectories)

    def combine(self, other: "Dataset") -> "Dataset":
        if (other.N, other.beta, other.alpha) != (self.N, self.beta, self.alpha):
            raise ParameterError("datasets describe different populations")
        return replace(self, trajectories=self.trajectories + other.trajectories)

    def truncate(self, calibration_time: float) -> "Dataset":
        """Keep observations with t <= calibration_time; drop trajectories left with one point."""
        kept = []
        for trajectory in self.trajectories:
            mask = trajectory.times <= calibration_time
            if mask.sum() >= 2:
                kept.append(Trajectory(trajectory.times[mask], trajectory.states[mask]))
        if not kept:
            raise ParameterError(f"no trajectory keeps two points up to t={calibration_time}")
        return replace(self, trajectories=tuple(kept))

    def thin(self, max_points: int) -> "Dataset":
        """Evenly subsample every trajectory to at most ``max_points`` observations."""
        if max_points < 2:
            raise ParameterError(f"max_points must be >= 2, got {max_points}")
        thinned = []
        for trajectory in self.trajectories:
            if len(trajectory) <= max_points:
                thinned.append(trajectory)
                continue
            index = np.unique(np.linspace(0, len(trajectory) - 1, max_points).round().astype(int))
            thinned.append(Trajectory(trajectory.times[index], trajectory.states[index]))
        return replace(self, trajectories=tuple(thinned))


def states_from_order_parameter(values: Sequence[float], N: int, label: str = "data") -> np.ndarray:
    raw = (np.asarray(values, dtype=float) + 1.0) * N / 2.0
    states = np.round(raw)
    off_lattice = np.flatnonzero(np.abs(raw - states) > STATE_TOLERANCE)
    if len(off_lattice):
        first = int(off_lattice[0])
        raise ParameterError(f"{label}: m={values[first]} does not map to an integer n for N={N}")
    return states.astype(int)


@dataclass(frozen=True)
class Theta:
    F: float
    J: float
    gamma: float

    def as_array(self) -> np.ndarray:
        return np.array([self.F, self.J, self.gamma])

    def to_params(self, data: Dataset) -> ModelParams:
        return ModelParams(
            F=self.F, J=self.J, alpha=data.alpha, beta=data.beta, gamma=self.gamma, N=data.N
        )


@dataclass(frozen=True)
class SearchSpace:
    """Box bounds; dimensions flagged ``log_scale`` are searched in log space."""

    lower: np.ndarray
    upper: np.ndarray
    log_scale: np.ndarray

    def __post_init__(self) -> None:
        if not len(self.lower) == len(self.upper) == len(self.log_scale):
            raise ParameterError("bounds need one lower, upper and scale flag per dimension")
        if np.any(self.lower > self.upper):
            raise ParameterError("every lower bound must not exceed its upper bound")
        if np.any(self.log_scale & (self.lower <= 0)):
            raise ParameterError("log-scale dimensions need positive bounds")

    @classmethod
    def box(cls, bounds: Sequence[tuple[float, float]]) -> "SearchSpace":
        lower, upper = np.array(bounds, dtype=float).T
        return cls(lower=lower, upper=upper, log_scale=np.zeros(len(lower), dtype=bool))

    def encode(self, x: np.ndarray) -> np.ndarray:
        return np.where(self.log_scale, np.log(np.where(self.log_scale, x, 1.0)), x)

    def decode(self, z: np.ndarray) -> np.ndarray:
        return np.where(self.log_scale, np.exp(z), z)


@dataclass(frozen=True)
class ParamBounds:
    """Search ranges for (F, J, gamma); J and gamma are searched in log space."""

    F: tuple[float, float] = (-2.0, 2.0)
    J: tuple[float, float] = (float(np.exp(-2.0)), float(np.exp(2.0)))
    gamma: tuple[float, float] = (float(np.exp(-1.0)), float(np.exp(1.0)))

    def to_search_space(self) -> SearchSpace:
        return SearchSpace(
            lower=np.array([self.F[0], self.J[0], self.gamma[0]], dtype=float),
            upper=np.array([self.F[1], self.J[1], self.gamma[1]], dtype=float),
            log_scale=np.array([False, True, True]),
        )


@dataclass(frozen=True)
class OptimizationResult:
    x: np.ndarray
    fun: float
    evaluations: int
    seed: int | None
    history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class CalibrationResult:
    theta: Theta
    nll: float
    evaluations: int
    seed: int | None
    history: list[float] = field(default_factory=list)


def neg_log_likelihood(theta: Theta, data: Dataset, family: RateFamily | None = None) -> float:
    """Negative log of the transition-product likelihood of the dataset.

    One spectrum is computed per theta; transitions sharing a time gap are
    evaluated together from a single set of propagator columns.
    """
    family = family if family is not None else Logit()
    rates = build_rate_table(theta.to_params(data), family)
    spectrum = spectrum_of(rates)

    gaps = np.concatenate([np.diff(trajectory.times) for trajectory in data.trajectories])
    sources = np.concatenate([trajectory.states[:-1] for trajectory in data.trajectories])
    targets = np.concatenate([trajectory.states[1:] for trajectory in data.trajectories])

    probabilities = np.empty(len(gaps))
    for gap in np.unique(gaps):
        selected = np.flatnonzero(gaps == gap)
        starts, column_of = np.unique(sources[selected], return_inverse=True)
        columns = transition_columns(rates, spectrum, float(gap), starts)
        probabilities[selected] = columns[targets[selected], column_of]
    return float(-np.log(np.maximum(probabilities, PROBABILITY_FLOOR)).sum())


def _reflect(z: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    z = np.where(z < lower, 2.0 * lower - z, z)
    z = np.where(z > upper, 2.0 * upper - z, z)
    return np.clip(z, lower, upper)


def differential_evolution(
    objective: Callable[[np.ndarray], float],
    bounds: ParamBounds | SearchSpace,
    pop_size: int = 50,
    steps: int = 100,
    seed: int | None = None,
) -> OptimizationResult:
    """Self-adaptive rand/1/bin differential evolution.

    Every member carries its own mutation factor and crossover rate, each
    regenerated with probability 0.1 before use and kept only when the trial
    replaces the member. Trials of a generation are built from the previous
    population before any is evaluated, so the result depends only on the seed.
    """
    if pop_size < MIN_POPULATION:
        raise ParameterError(f"population must be >= {MIN_POPULATION}, got {pop_size}")
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    space = bounds.to_search_space() if isinstance(bounds, ParamBounds) else bounds
    lower, upper = space.encode(space.lower), space.encode(space.upper)
    dim = len(lower)
    rng = np.random.default_rng(seed)

    def evaluate(z: np.ndarray) -> float:
        value = float(objective(space.decode(z)))
        return value if np.isfinite(value) else np.inf

    if np.all(lower == upper):
        value = evaluate(lower)
        return OptimizationResult(
            x=space.decode(lower), fun=value, evaluations=1, seed=seed, history=[value]
        )

    population = lower + (upper - lower) * rng.random((pop_size, dim))
    fitness = np.array([evaluate(z) for z in population])
    evaluations = pop_size
    factors = np.full(pop_size, 0.5)
    crossovers = np.full(pop_size, 0.9)
    history = [float(fitness.min())]

    for step in range(steps):
        trial_factors = np.where(
            rng.random(pop_size) < REGENERATE_FACTOR,
            FACTOR_LOWER + FACTOR_SPAN * rng.random(pop_size),
            factors,
        )
        trial_crossovers = np.where(
            rng.random(pop_size) < REGENERATE_CROSSOVER, rng.random(pop_size), crossovers
        )
        trials = np.empty_like(population)
        for i in range(pop_size):
            others = np.delete(np.arange(pop_size), i)
            r1, r2, r3 = rng.choice(others, size=3, replace=False)
            mutant = population[r1] + trial_factors[i] * (population[r2] - population[r3])
            mask = rng.random(dim) < trial_crossovers[i]
            mask[rng.integers(dim)] = True
            trials[i] = _reflect(np.where(mask, mutant, population[i]), lower, upper)

        trial_fitness = np.array([evaluate(z) for z in trials])
        evaluations += pop_size
        improved = trial_fitness <= fitness
        population[improved] = trials[improved]
        fitness[improved] = trial_fitness[improved]
        factors[improved] = trial_factors[improved]
        crossovers[improved] = trial_crossovers[improved]
        history.append(float(fitness.min()))
        logger.debug(f"Generation {step + 1}/{steps}: best objective {history[-1]:.6g}")

    best = int(np.argmin(fitness))
    logger.info(f"Differential evolution finished: best {fitness[best]:.6g} in {evaluations} evaluations")
    return OptimizationResult(
        x=space.decode(population[best]),
        fun=float(fitness[best]),
        evaluations=evaluations,
        seed=seed,
        history=history,
    )


def calibrate(
    data: Dataset,
    bounds: ParamBounds | None = None,
    pop_size: int = 200,
    steps: int = 200,
    seed: int | None = None,
    family: RateFamily | None = None,
) -> CalibrationResult:
    """Best-found (F, J, gamma) minimizing the negative log-likelihood.

    The result is a good local minimum of the search, not a certified global one.
    """
    bounds = bounds if bounds is not None else ParamBounds()

    def objective(x: np.ndarray) -> float:
        try:
            return neg_log_likelihood(Theta(*map(float, x)), data, family)
        except MeanFieldError as e:
            logger.debug(f"Likelihood undefined at {x}: {e}")
            return np.inf

    logger.info(
        f"Calibrating on {len(data.trajectories)} trajectories ({data.points} points), "
        f"population {pop_size}, {steps} steps"
    )
    result = differential_evolution(objective, bounds, pop_size=pop_size, steps=steps, seed=seed)
    return CalibrationResult(
        theta=Theta(*map(float, result.x)),
        nll=result.fun,
        evaluations=result.evaluations,
        seed=seed,
        history=result.history,
    )


def error_metrics(theta_true: Theta, theta_star: Theta) -> tuple[float, float]:
    """Total relative error E_tot and the relative error f of the ratio F/J."""
    truth = theta_true.as_array()
    if np.any(truth == 0):
        raise UndefinedMetricError("relative errors need nonzero true F, J and gamma")
    total = float(np.abs((truth - theta_star.as_array()) / truth).sum())
    true_ratio = theta_true.F / theta_true.J
    if theta_star.J == 0:
        raise UndefinedMetricError("estimated J is zero")
    ratio_error = abs((true_ratio - theta_star.F / theta_star.J) / true_ratio)
    return total, float(ratio_error)


def simulate_dataset(
    params: ModelParams,
    family: RateFamily,
    init: InitialState,
    t_max: float,
    points: int,
    trajectories: int,
    seed: int | None = None,
) -> Dataset:
    """Synthetic dataset: SSA trajectories sampled at ``points`` uniform times on [0, t_max]."""
    if points < 2 or trajectories < 1:
        raise ParameterError("need at least two points and one trajectory")
    rates = build_rate_table(params, family)
    dt = t_max / (points - 1)
    children = np.random.SeedSequence(seed).spawn(trajectories)
    series = []
    for child in children:
        path = simulate(rates, init, t_max, dt, seed=child)
        series.append(Trajectory(times=path.grid, states=path.states))
    return Dataset(N=params.N, trajectories=tuple(series), beta=params.beta, alpha=params.alpha)
