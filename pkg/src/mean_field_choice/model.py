"""Model parameters, transition-rate families and equilibrium analysis.

The mean-field binary decision model is reduced to a one-dimensional
birth-death chain over n, the number of right-deciding agents. Every solver
in the package consumes the chain through a ``RateTable``.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect
from scipy.special import expit

from .errors import NoPhaseTransitionError, ParameterError

logger = logging.getLogger(__name__)

# Uniform bracketing grid and bisection tolerance for m = tanh(...)
EQUILIBRIUM_GRID_POINTS = 10_000
EQUILIBRIUM_XTOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """The five model constants plus the agent count."""

    F: float
    J: float
    alpha: float
    beta: float
    gamma: float
    N: int

    def __post_init__(self) -> None:
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise ParameterError(f"N must be an integer, got {self.N!r}")
        if self.N < 1:
            raise ParameterError(f"N must be >= 1, got {self.N}")
        if self.J < 0:
            raise ParameterError(f"J must be >= 0, got {self.J}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beta < 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        # gamma = 0 freezes the chain; only the simulator accepts that.

    def with_field(self, **changes: Any) -> "ModelParams":
        """Return a copy with some constants replaced."""
        return replace(self, **changes)


@dataclass(frozen=True)
class Logit:
    """Glauber/logit rates W = gamma / (1 + exp(-beta * gain))."""

    name: str = field(default="logit", init=False)


@dataclass(frozen=True)
class Arrhenius:
    """Arrhenius rates W = gamma * exp(beta * utility after the flip).

    Rates are not bounded by gamma; the family is meant for exploration.
    """

    name: str = field(default="arrhenius", init=False)


@dataclass(frozen=True)
class Kirman:
    """Kirman's ant recruitment rates; ignores F, J, alpha, beta and gamma."""

    epsilon: float
    mu: float
    name: str = field(default="kirman", init=False)

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ParameterError(f"Kirman epsilon must be > 0, got {self.epsilon}")
        if self.mu < 0:
            raise ParameterError(f"Kirman mu must be >= 0, got {self.mu}")


RateFamily = Logit | Arrhenius | Kirman


@dataclass(frozen=True)
class RateTable:
    """Total birth and death propensities of the chain.

    Both vectors have length N + 1 so they can be indexed by state directly;
    ``birth[N]`` and ``death[0]`` are always zero.
    """

    N: int
    birth: np.ndarray
    death: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "birth", np.array(self.birth, dtype=float))
        object.__setattr__(self, "death", np.array(self.death, dtype=float))
        if self.birth.shape != (self.N + 1,) or self.death.shape != (self.N + 1,):
            raise ParameterError("birth and death must have length N + 1")
        if np.any(self.birth < 0) or np.any(self.death < 0):
            raise ParameterError("rates must be non-negative")
        if self.birth[self.N] != 0 or self.death[0] != 0:
            raise ParameterError("birth[N] and death[0] must be zero")
        self.birth.setflags(write=False)
        self.death.setflags(write=False)

    @property
    def exit_rates(self) -> np.ndarray:
        return self.birth + self.death


@dataclass(frozen=True)
class Equilibrium:
    m: float
    stable: bool


@dataclass(frozen=True)
class EquilibriumSet:
    roots: tuple[Equilibrium, ...]

    @property
    def count(self) -> int:
        return len(self.roots)

    @property
    def stable(self) -> list[float]:
        return [root.m for root in self.roots if root.stable]

    @property
    def unstable(self) -> list[float]:
        return [root.m for root in self.roots if not root.stable]


def _check_state(n: int, N: int) -> None:
    if not 0 <= n <= N:
        raise ParameterError(f"state n={n} outside [0, {N}]")


def order_parameter(n: int, N: int) -> float:
    """Average opinion m = (2n - N) / N of a state."""
    _check_state(n, N)
    return (2 * n - N) / N


def order_parameter_grid(N: int) -> np.ndarray:
    """Order parameter of every state 0..N."""
    return (2.0 * np.arange(N + 1) - N) / N


def _interaction(params: ModelParams) -> float:
    # Altruism rescales the interaction strength.
    return params.J * (1.0 + params.alpha)


def _gain(params: ModelParams, s: float, n: np.ndarray | float) -> np.ndarray | float:
    m = (2.0 * np.asarray(n, dtype=float) - params.N) / params.N
    coupling = _interaction(params)
    return -2.0 * s * (params.F + coupling * m) + 2.0 * coupling / params.N


def _check_flip(s: int, n: int, N: int) -> None:
    if s not in (1, -1):
        raise ParameterError(f"decision s must be +1 or -1, got {s}")
    _check_state(n, N)
    if s == 1 and n < 1:
        raise ParameterError("a right-decider can only flip when n >= 1")
    if s == -1 and n > N - 1:
        raise ParameterError("a left-decider can only flip when n <= N - 1")


def gain(params: ModelParams, s: int, n: int) -> float:
    """Generalized utility change for an agent flipping from s to -s.

    Args:
        params: Model constants
        s: Current decision of the flipping agent (+1 right, -1 left)
        n: Number of right-deciding agents before the flip

    Returns:
        G = -2s(F + J m(n)(1 + alpha)) + 2(1 + alpha)J/N
    """
    _check_flip(s, n, params.N)
    return float(_gain(params, s, n))


def utility_change(params: ModelParams, s: int, n: int) -> float:
    """Selfish utility change on a flip (the alpha = 0 gain)."""
    return gain(params.with_field(alpha=0.0), s, n)


def global_utility_change(params: ModelParams, s: int, n: int) -> float:
    """Change of the summed utility of all agents when one agent flips."""
    _check_flip(s, n, params.N)
    selfish = params.with_field(alpha=0.0)
    m = order_parameter(n, params.N)
    return float(_gain(selfish, s, n)) - 2.0 * params.J * s * (m - s / params.N)


def _utility_after_flip(params: ModelParams, s: float, n: np.ndarray | float) -> np.ndarray:
    n_after = np.asarray(n, dtype=float) - s
    m_after = (2.0 * n_after - params.N) / params.N
    return -s * (params.F + _interaction(params) * m_after)


def utility_after_flip(params: ModelParams, s: int, n: int) -> float:
    """Utility held by an agent after flipping from s to -s."""
    _check_flip(s, n, params.N)
    return float(_utility_after_flip(params, s, n))


def _rates_on(
    params: ModelParams, family: RateFamily, n: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent rates r(n), l(n) at (possibly non-integer) states."""
    n = np.asarray(n, dtype=float)
    if isinstance(family, Logit):
        r = params.gamma * expit(params.beta * _gain(params, -1, n))
        l = params.gamma * expit(params.beta * _gain(params, 1, n))
    elif isinstance(family, Arrhenius):
        r = params.gamma * np.exp(params.beta * _utility_after_flip(params, -1, n))
        l = params.gamma * np.exp(params.beta * _utility_after_flip(params, 1, n))
    elif isinstance(family, Kirman):
        if params.N < 2:
            raise ParameterError("Kirman rates need N >= 2")
        scale = family.mu / (params.N - 1)
        r = family.epsilon + scale * n
        l = family.epsilon + scale * (params.N - n)
    else:
        raise ParameterError(f"unknown rate family {family!r}")
    return np.asarray(r, dtype=float), np.asarray(l, dtype=float)


def per_agent_rates(params: ModelParams, family: RateFamily, n: int) -> tuple[float, float]:
    """Rates (r, l) at which one left/right agent flips with n right-deciders."""
    _check_state(n, params.N)
    r, l = _rates_on(params, family, np.array([n]))
    return float(r[0]), float(l[0])


def build_rate_table(params: ModelParams, family: RateFamily) -> RateTable:
    """Mass-action propensities birth[n] = (N-n) r(n), death[n] = n l(n)."""
    states = np.arange(params.N + 1)
    r, l = _rates_on(params, family, states)
    birth = (params.N - states) * r
    death = states * l
    # Exact zeros at the boundaries regardless of rounding.
    birth[params.N] = 0.0
    death[0] = 0.0
    logger.debug(f"Built {family.name} rate table for N={params.N}")
    return RateTable(N=params.N, birth=birth, death=death)


def hamiltonian(params: ModelParams, n: int) -> float:
    """H = N m (F + (alpha + 1) J m / 2); flipping one agent changes H by the gain."""
    m = order_parameter(n, params.N)
    return params.N * m * (params.F + 0.5 * _interaction(params) * m)


def critical_rationality(params: ModelParams) -> float:
    """Rationality above which the F = 0 steady state turns bimodal."""
    if params.J <= 0:
        raise NoPhaseTransitionError("J = 0: the model has no phase transition")
    return 1.0 / _interaction(params)


def mean_field_equilibria(params: ModelParams) -> EquilibriumSet:
    """Real roots of m = tanh(beta (F + J (1 + alpha) m)) on [-1, 1].

    Roots are bracketed by sign changes on a uniform grid and refined by
    bisection. A root is stable when d/dm [tanh(...) - m] <= 0 there, so a
    tangency at beta = beta_c counts as a single stable root.
    """
    coupling = _interaction(params)

    def excess(m: float) -> float:
        return float(np.tanh(params.beta * (params.F + coupling * m)) - m)

    grid = np.linspace(-1.0, 1.0, EQUILIBRIUM_GRID_POINTS + 1)
    values = np.tanh(params.beta * (params.F + coupling * grid)) - grid

    found: list[float] = []
    for i in range(len(grid) - 1):
        if values[i] == 0.0:
            found.append(float(grid[i]))
        elif values[i] * values[i + 1] < 0.0:
            found.append(bisect(excess, grid[i], grid[i + 1], xtol=EQUILIBRIUM_XTOL))
    if values[-1] == 0.0:
        found.append(float(grid[-1]))

    roots = []
    for m in found:
        slope = params.beta * coupling / np.cosh(params.beta * (params.F + coupling * m)) ** 2
        roots.append(Equilibrium(m=m, stable=bool(slope - 1.0 <= 0.0)))
    logger.debug(f"Found {len(roots)} mean-field equilibria: {[r.m for r in roots]}")
    return EquilibriumSet(roots=tuple(roots))


def rate_equation(
    params: ModelParams, family: RateFamily, n0: float, times: np.ndarray
) -> np.ndarray:
    """Integrate the deterministic rate equation d<n>/dt = (N-n) r(n) - n l(n).

    Args:
        params: Model constants
        family: Rate family evaluated at continuous n
        n0: Initial mean number of right-deciders
        times: Increasing output times starting at or after 0

    Returns:
        Mean number of right-deciders at each requested time
    """
    times = np.asarray(times, dtype=float)
    N = params.N

    def drift(_t: float, y: np.ndarray) -> np.ndarray:
        n = np.clip(y, 0.0, N)
        r, l = _rates_on(params, family, n)
        return (N - n) * r - n * l

    solution = solve_ivp(
        drift, (0.0, float(times[-1])), [float(n0)], t_eval=times, rtol=1e-9, atol=1e-12
    )
    if not solution.success:
        raise ParameterError(f"rate equation integration failed: {solution.message}")
    return solution.y[0]


FAMILY_NAMES = ("logit", "arrhenius", "kirman")
_PARAM_KEYS = {"F", "J", "alpha", "beta", "gamma", "N", "family", "epsilon", "mu"}


def params_to_json(params: ModelParams, family: RateFamily) -> dict[str, Any]:
    """Flat JSON object for a parameter set and its rate family."""
    payload: dict[str, Any] = {
        "F": params.F,
        "J": params.J,
        "alpha": params.alpha,
        "beta": params.beta,
        "gamma": params.gamma,
        "N": params.N,
        "family": family.name,
    }
    if isinstance(family, Kirman):
        payload["epsilon"] = family.epsilon
        payload["mu"] = family.mu
    return payload


def params_from_json(payload: dict[str, Any]) -> tuple[ModelParams, RateFamily]:
    """Inverse of ``params_to_json``; unknown keys are rejected."""
    unknown = set(payload) - _PARAM_KEYS
    if unknown:
        raise ParameterError(f"unknown model keys: {sorted(unknown)}")
    missing = {"F", "J", "alpha", "beta", "gamma", "N"} - set(payload)
    if missing:
        raise ParameterError(f"missing model keys: {sorted(missing)}")

    name = payload.get("family", "logit")
    family: RateFamily
    if name == "logit":
        family = Logit()
    elif name == "arrhenius":
        family = Arrhenius()
    elif name == "kirman":
        if "epsilon" not in payload or "mu" not in payload:
            raise ParameterError("kirman family needs epsilon and mu")
        family = Kirman(epsilon=float(payload["epsilon"]), mu=float(payload["mu"]))
    else:
        raise ParameterError(f"unknown rate family {name!r}; expected one of {FAMILY_NAMES}")

    params = ModelParams(
        F=float(payload["F"]),
        J=float(payload["J"]),
        alpha=float(payload["alpha"]),
        beta=float(payload["beta"]),
        gamma=float(payload["gamma"]),
        N=_as_agent_count(payload["N"]),
    )
    return params, family


def _as_agent_count(value: Any) -> int:
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParameterError(f"N must be an integer, got {value!r}")
    return value
