"""Equilibria, first-passage times and escape-time asymptotics of the bistable regime."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import NoMetastabilityError, ParameterError
from .model import Logit, ModelParams, RateFamily, RateTable, _rates_on
from .spectral import DistributionVector, log_steady_state, steady_state

logger = logging.getLogger(__name__)

DRIFT_GRID_POINTS = 4001
CURVATURE_STEP = 1e-6
# Log-probability dips shallower than this are the finite-N ripple of a flat top
# at criticality, not a separating minimum.
MIN_MODE_DEPTH = 1e-2

_PRECONDITION = "metastability needs beta > beta_c and |F| < J(1 + alpha)"


@dataclass(frozen=True)
class EquilibriaIndices:
    n_minus: int
    n_u: int
    n_plus: int


@dataclass(frozen=True)
class FirstPassageResult:
    """Exact first-passage summary of a bistable chain.

    ``tau[n]`` is the mean time to reach n_u from n, with tau[n_u] = 0.
    """

    equilibria: EquilibriaIndices
    tau: np.ndarray
    tau_lr: float
    tau_rl: float
    phi_R: float
    lambda2_approx: float

    @property
    def relaxation_time(self) -> float:
        return 1.0 / self.lambda2_approx


def _log_profile(steady: DistributionVector) -> np.ndarray:
    if steady.log_probs is not None:
        return np.asarray(steady.log_probs, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(steady.probs)


def find_equilibria(steady: DistributionVector) -> EquilibriaIndices:
    """Two maxima and the interior minimum between them, by neighbour comparison.

    A flat run of equal values counts as one extremum at its leftmost index.
    Two maxima separated by a dip shallower than MIN_MODE_DEPTH in log
    probability are treated as one flat-topped mode.

    Raises:
        NoMetastabilityError: If the steady state is not bimodal
    """
    profile = _log_profile(steady)
    starts = np.concatenate(([0], np.flatnonzero(np.diff(profile) != 0) + 1))
    values = profile[starts]

    maxima = []
    minima = []
    for k, start in enumerate(starts):
        left = values[k - 1] if k > 0 else -np.inf
        right = values[k + 1] if k + 1 < len(values) else -np.inf
        if values[k] > left and values[k] > right:
            maxima.append(int(start))
        elif 0 < k < len(values) - 1 and values[k] < left and values[k] < right:
            minima.append(int(start))

    if len(maxima) != 2 or len(minima) != 1:
        raise NoMetastabilityError(
            f"steady state has {len(maxima)} maxima and {len(minima)} interior minima; "
            f"{_PRECONDITION}"
        )
    n_minus, n_plus = maxima
    (n_u,) = minima
    if not n_minus < n_u < n_plus:
        raise NoMetastabilityError(f"minimum {n_u} does not separate maxima {maxima}")
    depth = min(profile[n_minus], profile[n_plus]) - profile[n_u]
    if depth < MIN_MODE_DEPTH:
        raise NoMetastabilityError(
            f"dip of {depth:.3g} at n={n_u} is a flat top, not two modes; {_PRECONDITION}"
        )
    return EquilibriaIndices(n_minus=n_minus, n_u=n_u, n_plus=n_plus)


def mfpt_to_unstable(rates: RateTable, n_u: int) -> np.ndarray:
    """Exact mean first-passage times to n_u from every state.

    Below n_u the chain reflects at 0; the time to cross from i to i+1 is
    sum_{j<=i} P_s(j) / (P_s(i) birth[i]). Above n_u the mirrored form with
    death rates applies. Sums are accumulated in log space.
    """
    N = rates.N
    if not 0 < n_u < N:
        raise ParameterError(f"n_u={n_u} must be an interior state of [0, {N}]")
    log_p = log_steady_state(rates)
    tau = np.zeros(N + 1)

    below = np.logaddexp.accumulate(log_p[:n_u])
    crossing_up = np.exp(below - log_p[:n_u] - np.log(rates.birth[:n_u]))
    tau[:n_u] = np.cumsum(crossing_up[::-1])[::-1]

    above = np.logaddexp.accumulate(log_p[::-1])[::-1][n_u + 1 :]
    crossing_down = np.exp(above - log_p[n_u + 1 :] - np.log(rates.death[n_u + 1 :]))
    tau[n_u + 1 :] = np.cumsum(crossing_down)
    return tau


def mode_escape_times(
    steady: DistributionVector, tau: np.ndarray, n_u: int
) -> tuple[float, float]:
    """Escape times from each mode, weighting tau by the steady state within the mode."""
    profile = _log_profile(steady)
    if not 0 < n_u < len(profile) - 1:
        raise ParameterError(f"n_u={n_u} leaves one mode empty")
    left = np.exp(profile[:n_u] - logsumexp(profile[:n_u]))
    right = np.exp(profile[n_u + 1 :] - logsumexp(profile[n_u + 1 :]))
    return float(np.dot(left, tau[:n_u])), float(np.dot(right, tau[n_u + 1 :]))


def fixation_curve(rates: RateTable, n_minus: int, n_plus: int) -> np.ndarray:
    """Probability of absorbing at n_plus before n_minus, for every i in [n_minus, n_plus]."""
    if not 0 <= n_minus < n_plus <= rates.N:
        raise ParameterError(f"need 0 <= n_minus < n_plus <= N, got ({n_minus}, {n_plus})")
    inner = np.arange(n_minus + 1, n_plus)
    if np.any(rates.birth[inner] <= 0):
        raise ParameterError("fixation needs positive birth rates between the absorbing states")
    with np.errstate(divide="ignore"):
        log_ratio = np.log(rates.death[inner]) - np.log(rates.birth[inner])
    log_steps = np.concatenate(([0.0], np.cumsum(log_ratio)))
    cumulative = np.logaddexp.accumulate(log_steps)
    curve = np.zeros(n_plus - n_minus + 1)
    curve[1:] = np.exp(cumulative - cumulative[-1])
    curve[-1] = 1.0
    return curve


def fixation_probability(rates: RateTable, n_minus: int, n_plus: int, i: int) -> float:
    if not n_minus <= i <= n_plus:
        raise ParameterError(f"state {i} outside [{n_minus}, {n_plus}]")
    return float(fixation_curve(rates, n_minus, n_plus)[i - n_minus])


def relaxation_rate(tau_lr: float, tau_rl: float, phi_R: float) -> float:
    """Two-state estimate of lambda_2 from the escape times and the fixation split."""
    if tau_lr <= 0 or tau_rl <= 0:
        raise ParameterError("escape times must be positive")
    if not 0.0 <= phi_R <= 1.0:
        raise ParameterError(f"phi_R must lie in [0, 1], got {phi_R}")
    return phi_R / tau_lr + (1.0 - phi_R) / tau_rl


def stationary_mode_ratio(tau_lr: float, tau_rl: float, phi_R: float) -> float:
    """Stationary pi_L / pi_R of the two-state reduction."""
    if tau_rl <= 0 or phi_R <= 0:
        raise ParameterError("need tau_rl > 0 and phi_R > 0")
    return tau_lr * (1.0 - phi_R) / (tau_rl * phi_R)


def analyze_metastability(
    rates: RateTable, steady: DistributionVector | None = None
) -> FirstPassageResult:
    """Equilibria, exact tau, mode escape times, phi_R and the lambda_2 estimate."""
    steady = steady if steady is not None else steady_state(rates)
    equilibria = find_equilibria(steady)
    tau = mfpt_to_unstable(rates, equilibria.n_u)
    tau_lr, tau_rl = mode_escape_times(steady, tau, equilibria.n_u)
    phi_R = fixation_probability(rates, equilibria.n_minus, equilibria.n_plus, equilibria.n_u)
    lambda2 = relaxation_rate(tau_lr, tau_rl, phi_R)
    logger.info(
        f"Equilibria {equilibria}; tau_lr={tau_lr:.4g}, tau_rl={tau_rl:.4g}, "
        f"phi_R={phi_R:.4f}, 1/lambda_2~{1.0 / lambda2:.4g}"
    )
    return FirstPassageResult(
        equilibria=equilibria,
        tau=tau,
        tau_lr=tau_lr,
        tau_rl=tau_rl,
        phi_R=phi_R,
        lambda2_approx=lambda2,
    )


def _check_bistable_regime(params: ModelParams) -> float:
    coupling = params.J * (1.0 + params.alpha)
    if coupling <= 0 or abs(params.F) >= coupling:
        raise NoMetastabilityError(f"|F|={abs(params.F)} >= J(1+alpha)={coupling}; {_PRECONDITION}")
    return params.F / coupling


def asymptotic_escape_times(
    params: ModelParams, family: RateFamily | None = None, exponent_only: bool = False
) -> tuple[float, float]:
    """Diffusion-limit escape times from the left and right modes.

    In ``exponent_only`` mode the large-rationality exponents
    N(1 - F/J(1+alpha)) and N(1 + F/J(1+alpha)) are returned, i.e. the
    logarithms of the escape times up to a prefactor.

    Otherwise the Kramers saddle-point estimate
    2 pi N / (a2 sqrt(Phi''(stable) |Phi''(unstable)|)) exp(barrier)
    is evaluated at finite rationality, with
    Phi(y) = -2N int a1/a2, a1 the drift and a2 the diffusion of the
    fraction of right-deciders.
    """
    ratio = _check_bistable_regime(params)
    N = params.N
    if exponent_only:
        return N * (1.0 - ratio), N * (1.0 + ratio)

    family = family if family is not None else Logit()

    def moments(y: float) -> tuple[float, float]:
        n = N * np.atleast_1d(y)
        r, l = _rates_on(params, family, n)
        birth = (N - n) * r
        death = n * l
        return float((birth - death)[0] / N), float((birth + death)[0] / N)

    def drift_ratio(y: float) -> float:
        a1, a2 = moments(y)
        return a1 / a2

    grid = np.linspace(0.0, 1.0, DRIFT_GRID_POINTS)
    signs = np.sign([drift_ratio(y) for y in grid])
    zeros = []
    for k in range(len(grid) - 1):
        if signs[k] == 0:
            # Symmetric chains put the unstable point exactly on the grid.
            zeros.append(float(grid[k]))
        elif signs[k] * signs[k + 1] < 0:
            zeros.append(brentq(drift_ratio, grid[k], grid[k + 1]))
    if len(zeros) != 3:
        raise NoMetastabilityError(f"drift has {len(zeros)} zeros in (0, 1); {_PRECONDITION}")
    phi_minus, phi_u, phi_plus = zeros

    def curvature(y: float) -> float:
        h = CURVATURE_STEP
        return -2.0 * N * (drift_ratio(y + h) - drift_ratio(y - h)) / (2.0 * h)

    barrier_left = -2.0 * N * quad(drift_ratio, phi_minus, phi_u, epsabs=1e-10)[0]
    barrier_right = 2.0 * N * quad(drift_ratio, phi_u, phi_plus, epsabs=1e-10)[0]
    saddle = abs(curvature(phi_u))

    def kramers(stable: float, barrier: float) -> float:
        _, a2 = moments(stable)
        prefactor = 2.0 * np.pi * N / (a2 * np.sqrt(curvature(stable) * saddle))
        return float(prefactor * np.exp(barrier))

    tau_lr = kramers(phi_minus, barrier_left)
    tau_rl = kramers(phi_plus, barrier_right)
    logger.debug(
        f"Kramers estimate: phi=({phi_minus:.4f}, {phi_u:.4f}, {phi_plus:.4f}), "
        f"barriers=({barrier_left:.3f}, {barrier_right:.3f})"
    )
    return tau_lr, tau_rl
