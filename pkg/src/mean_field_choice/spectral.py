"""Master operator, spectrum and the analytic time-dependent solution.

The transition probability of the birth-death chain is evaluated from the
resolvent of the tridiagonal master operator: a sum over eigenvalues of
products of orthogonal-polynomial values, rate products and inverse
eigenvalue differences. Every factor is carried as a sign plus a log
magnitude so that chains with N of a few hundred neither overflow nor
underflow.

Three evaluation paths are tried in order, each guarded by an error bound:

1. ``spectral``: the resolvent sum itself.
2. ``eigenvector``: propagation with the eigenvectors of the symmetrized
   operator (taken when two eigenvalues are nearly degenerate or the
   resolvent sum cancels too strongly).
3. ``krylov``: ``scipy.sparse.linalg.expm_multiply`` on the raw generator,
   for strongly bistable chains whose mode weights differ by many orders of
   magnitude.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse import diags
from scipy.sparse.linalg import expm_multiply
from scipy.special import logsumexp
from scipy.stats import binom

from .errors import NumericalError, ParameterError, ReducibleChainError
from .model import ModelParams, RateFamily, RateTable, build_rate_table, order_parameter_grid
from .utils.metrics import distribution_moments, mode_masses, total_variation

logger = logging.getLogger(__name__)

PINNING_TOLERANCE = 1e-8
DEGENERACY_TOLERANCE = 1e-12
CANCELLATION_TOLERANCE = 1e-10
NORMALIZATION_TOLERANCE = 1e-6

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class MasterOperator:
    """Tridiagonal generator; ``sub[n]`` is the flow n -> n+1, ``sup[n]`` the flow n+1 -> n."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.diag)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def to_sparse(self):
        return diags([self.sub, self.diag, self.sup], [-1, 0, 1], format="csc")


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of the master operator sorted descending, lambda_1 pinned to 0.

    ``eigenvectors[:, i]`` is the orthonormal eigenvector of the symmetrized
    operator for ``eigenvalues[i]``; ``log_steady`` is the log steady state
    used for the symmetrization.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    log_steady: np.ndarray
    raw_lambda1: float

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def relaxation_time(self) -> float:
        return -1.0 / self.lambda2

    @property
    def min_gap(self) -> float:
        return float(np.min(-np.diff(self.eigenvalues)))

    @property
    def spread(self) -> float:
        return float(self.eigenvalues[0] - self.eigenvalues[-1])

    @property
    def degenerate(self) -> bool:
        return self.min_gap < DEGENERACY_TOLERANCE * self.spread


@dataclass(frozen=True)
class DistributionVector:
    """Probability mass over n = 0..N at one time instant."""

    probs: np.ndarray
    timestamp: float = 0.0
    method: str = "exact"
    defect: float = 0.0
    log_probs: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return len(self.probs) - 1

    @property
    def m(self) -> np.ndarray:
        return order_parameter_grid(self.N)

    def mean(self) -> float:
        return distribution_moments(self.probs)[0]

    def variance(self) -> float:
        return distribution_moments(self.probs)[1]

    def total_variation(self, other: "DistributionVector") -> float:
        return total_variation(self.probs, other.probs)


@dataclass(frozen=True)
class ZeitgeistSchedule:
    """Piecewise-constant zeitgeist: ``values[j]`` holds on [breakpoints[j-1], breakpoints[j])."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.breakpoints) < 1:
            raise ParameterError("a schedule needs at least one interval")
        if len(self.breakpoints) != len(self.values):
            raise ParameterError("a schedule needs one value per breakpoint")
        edges = (0.0,) + tuple(self.breakpoints)
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ParameterError("breakpoints must be positive and strictly increasing")

    @property
    def end(self) -> float:
        return float(self.breakpoints[-1])

    def intervals(self) -> list[tuple[float, float, float]]:
        """(start, stop, F) for every interval."""
        starts = (0.0,) + tuple(self.breakpoints[:-1])
        return list(zip(starts, self.breakpoints, self.values))


def point_mass(N: int, n0: int) -> DistributionVector:
    if not 0 <= n0 <= N:
        raise ParameterError(f"initial state {n0} outside [0, {N}]")
    probs = np.zeros(N + 1)
    probs[n0] = 1.0
    return DistributionVector(probs=probs)


def binomial_initial(N: int, p0: float) -> DistributionVector:
    """Every agent independently starts right-deciding with probability p0."""
    if not 0.0 <= p0 <= 1.0:
        raise ParameterError(f"p0 must lie in [0, 1], got {p0}")
    return DistributionVector(probs=binom.pmf(np.arange(N + 1), N, p0))


def build_master_operator(rates: RateTable) -> MasterOperator:
    """Generator of the master equation with columns summing to zero."""
    return MasterOperator(
        sub=np.array(rates.birth[:-1]),
        diag=-(rates.birth + rates.death),
        sup=np.array(rates.death[1:]),
    )


def log_steady_state(rates: RateTable) -> np.ndarray:
    """Normalized log steady state from the Kirchhoff product formula."""
    forward = rates.birth[:-1]
    backward = rates.death[1:]
    if np.any(forward <= 0) or np.any(backward <= 0):
        raise ReducibleChainError(
            "steady state needs birth[0..N-1] > 0 and death[1..N] > 0"
        )
    log_weights = np.concatenate(([0.0], np.cumsum(np.log(forward) - np.log(backward))))
    return log_weights - logsumexp(log_weights)


def steady_state(rates: RateTable) -> DistributionVector:
    """Stationary distribution, independent of the initial condition."""
    log_probs = log_steady_state(rates)
    probs = np.exp(log_probs)
    return DistributionVector(
        probs=probs / probs.sum(), timestamp=np.inf, method="kirchhoff", log_probs=log_probs
    )


def compute_spectrum(op: MasterOperator, steady: DistributionVector) -> Spectrum:
    """All-real spectrum of the master operator via detailed-balance symmetrization.

    The similarity transform with sqrt(P_s) turns the generator into a
    symmetric tridiagonal matrix with off-diagonals sqrt(birth[n] death[n+1]).

    Raises:
        ReducibleChainError: If the steady state has a zero entry
        NumericalError: If the top eigenvalue is not consistent with zero
    """
    if steady.log_probs is not None:
        log_steady = np.asarray(steady.log_probs, dtype=float)
        irreducible = bool(np.all(np.isfinite(log_steady)))
    else:
        irreducible = bool(np.all(steady.probs > 0))
        log_steady = np.log(np.where(steady.probs > 0, steady.probs, 1.0))
    if not irreducible:
        raise ReducibleChainError("steady state has a zero entry; the chain is reducible")

    off_diagonal = np.sqrt(op.sub * op.sup)
    values, vectors = eigh_tridiagonal(op.diag, off_diagonal)
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]

    raw_lambda1 = float(values[0])
    scale = float(np.max(np.abs(values))) if len(values) > 1 else 0.0
    if abs(raw_lambda1) > PINNING_TOLERANCE * max(scale, np.finfo(float).tiny):
        raise NumericalError(
            f"top eigenvalue {raw_lambda1:.3e} is inconsistent with a conserved generator"
        )
    values[0] = 0.0
    logger.debug(f"Spectrum of dimension {len(values)}; pinned lambda_1 from {raw_lambda1:.2e}")
    return Spectrum(
        eigenvalues=values, eigenvectors=vectors, log_steady=log_steady, raw_lambda1=raw_lambda1
    )


def spectrum_of(rates: RateTable) -> Spectrum:
    """Convenience wrapper: operator, steady state and spectrum in one call."""
    return compute_spectrum(build_master_operator(rates), steady_state(rates))


def _scaled_recursion(
    lam: np.ndarray, shifts: np.ndarray, couplings: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Three-term determinant recursion at every eigenvalue in sign/log form.

    Computes D_0 = 1, D_1 = lam + shifts[0],
    D_{k+1} = (lam + shifts[k]) D_k - couplings[k] D_{k-1}.
    The running pair is rescaled every step and the scale kept in log space.
    """
    steps = len(shifts)
    log_mag = np.empty((steps + 1, len(lam)))
    sign = np.empty((steps + 1, len(lam)))
    log_mag[0] = 0.0
    sign[0] = 1.0

    current = np.ones_like(lam)
    previous = np.zeros_like(lam)
    log_scale = np.zeros_like(lam)
    with np.errstate(divide="ignore"):
        for k in range(steps):
            new = (lam + shifts[k]) * current - couplings[k] * previous
            log_mag[k + 1] = np.log(np.abs(new)) + log_scale
            sign[k + 1] = np.sign(new)
            scale = np.maximum(np.abs(new), np.abs(current))
            scale = np.where(scale > 0, scale, 1.0)
            previous = current / scale
            current = new / scale
            log_scale = log_scale + np.log(scale)
    return log_mag, sign


def _neumaier_sum(terms: np.ndarray) -> np.ndarray:
    """Compensated sum over the last axis."""
    total = np.zeros(terms.shape[:-1])
    compensation = np.zeros(terms.shape[:-1])
    for i in range(terms.shape[-1]):
        term = terms[..., i]
        candidate = total + term
        big = np.abs(total) >= np.abs(term)
        compensation += np.where(big, (total - candidate) + term, (term - candidate) + total)
        total = candidate
    return total + compensation


def _resolvent_columns(
    rates: RateTable, spectrum: Spectrum, t: float, sources: np.ndarray
) -> tuple[np.ndarray, float]:
    """Resolvent-sum transition probabilities and their worst absolute error bound."""
    N = rates.N
    lam = spectrum.eigenvalues
    birth, death = rates.birth, rates.death
    exit_rates = birth + death

    # Leading minors of (zI - A) over states 0..k-1, trailing minors over k+1..N.
    lead_coupling = np.concatenate(([0.0], birth[:-2] * death[1:-1]))
    log_lead, sign_lead = _scaled_recursion(lam, exit_rates[:-1], lead_coupling)
    trail_coupling = np.concatenate(([0.0], (birth[1:-1] * death[2:])[::-1]))
    log_trail_rev, sign_trail_rev = _scaled_recursion(lam, exit_rates[::-1][:-1], trail_coupling)
    log_trail, sign_trail = log_trail_rev[::-1], sign_trail_rev[::-1]

    with np.errstate(divide="ignore"):
        cum_birth = np.concatenate(([0.0], np.cumsum(np.log(birth[:-1]))))
        cum_death = np.concatenate(([0.0], np.cumsum(np.log(death[1:]))))

    differences = lam[:, None] - lam[None, :]
    np.fill_diagonal(differences, 1.0)
    log_den = np.log(np.abs(differences)).sum(axis=1)
    sign_den = np.prod(np.sign(differences), axis=1)

    targets = np.arange(N + 1)[:, None]
    src = sources[None, :]
    low = np.minimum(targets, src)
    high = np.maximum(targets, src)
    log_prefactor = np.where(
        targets > src,
        cum_birth[targets] - cum_birth[src],
        np.where(targets < src, cum_death[src] - cum_death[targets], 0.0),
    )

    log_terms = (
        log_prefactor[..., None]
        + log_lead[low]
        + log_trail[high]
        - log_den
        + lam * t
    )
    signs = sign_lead[low] * sign_trail[high] * sign_den

    peak = np.max(log_terms, axis=-1, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    scaled = signs * np.exp(log_terms - peak)
    with np.errstate(over="ignore", invalid="ignore"):
        values = _neumaier_sum(scaled) * np.exp(peak[..., 0])
        log_bound = np.log(_EPS * (N + 1) * np.abs(scaled).sum(axis=-1)) + peak[..., 0]
    return values, float(np.max(log_bound))


def _eigenvector_columns(
    spectrum: Spectrum, t: float, sources: np.ndarray
) -> tuple[np.ndarray, float]:
    vectors = spectrum.eigenvectors
    decay = np.exp(spectrum.eigenvalues * t)
    half = 0.5 * spectrum.log_steady
    log_ratio = half[:, None] - half[sources][None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(log_ratio)
        values = ((vectors * decay) @ vectors[sources].T) * ratio
        bound = _EPS * len(decay) * (np.abs(vectors) @ np.abs(vectors[sources]).T) * ratio
        log_bound = float(np.log(np.max(bound)))
    return values, log_bound


def _krylov_columns(rates: RateTable, t: float, sources: np.ndarray) -> np.ndarray:
    generator = build_master_operator(rates).to_sparse()
    start = np.zeros((rates.N + 1, len(sources)))
    start[sources, np.arange(len(sources))] = 1.0
    return np.asarray(expm_multiply(generator * t, start))


def _propagate_columns(
    rates: RateTable, spectrum: Spectrum, t: float, sources: np.ndarray
) -> tuple[np.ndarray, str]:
    """Columns of the transition matrix at time t for the given initial states."""
    if t < 0:
        raise ParameterError(f"time must be >= 0, got {t}")
    sources = np.asarray(sources, dtype=int)
    if t == 0:
        columns = np.zeros((rates.N + 1, len(sources)))
        columns[sources, np.arange(len(sources))] = 1.0
        return columns, "identity"

    log_tolerance = np.log(CANCELLATION_TOLERANCE)
    if not spectrum.degenerate:
        columns, log_bound = _resolvent_columns(rates, spectrum, t, sources)
        if log_bound <= log_tolerance and np.all(np.isfinite(columns)):
            return columns, "spectral"
        logger.debug(f"Resolvent sum cancels (log error bound {log_bound:.1f}) at t={t}")
    else:
        logger.debug(f"Near-degenerate eigenvalues (gap {spectrum.min_gap:.2e}) at t={t}")

    columns, log_bound = _eigenvector_columns(spectrum, t, sources)
    if log_bound <= log_tolerance and np.all(np.isfinite(columns)):
        return columns, "eigenvector"

    logger.debug(f"Eigenvector propagation too ill-conditioned at t={t}; using Krylov path")
    return _krylov_columns(rates, t, sources), "krylov"


def _finalize(probs: np.ndarray, strict: bool = True) -> tuple[np.ndarray, float]:
    """Clip negative dust, renormalize and report the pre-normalization defect."""
    negative_mass = float(-probs[probs < 0].sum())
    if negative_mass > NORMALIZATION_TOLERANCE:
        if strict:
            raise NumericalError(f"negative probability mass {negative_mass:.2e}")
        logger.warning(f"Clipping negative probability mass {negative_mass:.2e}")
    clipped = np.clip(probs, 0.0, None)
    total = float(clipped.sum())
    defect = abs(total - 1.0)
    if strict and defect > NORMALIZATION_TOLERANCE:
        raise NumericalError(f"normalization defect {defect:.2e} exceeds tolerance")
    if defect > 0:
        logger.debug(f"Renormalizing distribution with defect {defect:.2e}")
    return clipped / total, defect


def transition_probability(
    rates: RateTable, spectrum: Spectrum, n0: int, t: float
) -> DistributionVector:
    """Distribution of n at time t given n = n0 at time 0."""
    if not 0 <= n0 <= rates.N:
        raise ParameterError(f"initial state {n0} outside [0, {rates.N}]")
    columns, method = _propagate_columns(rates, spectrum, t, np.array([n0]))
    probs, defect = _finalize(columns[:, 0])
    return DistributionVector(probs=probs, timestamp=float(t), method=method, defect=defect)


def transition_columns(
    rates: RateTable, spectrum: Spectrum, t: float, sources: np.ndarray
) -> np.ndarray:
    """Columns P(. , t | n0, 0) for each n0 in ``sources``, from one evaluation."""
    sources = np.asarray(sources, dtype=int)
    if np.any(sources < 0) or np.any(sources > rates.N):
        raise ParameterError(f"initial states outside [0, {rates.N}]")
    columns, _ = _propagate_columns(rates, spectrum, t, sources)
    return np.column_stack([_finalize(columns[:, j])[0] for j in range(len(sources))])


def propagator(rates: RateTable, spectrum: Spectrum, t: float) -> np.ndarray:
    """Full transition matrix at time t; column n0 is P(. , t | n0, 0)."""
    return transition_columns(rates, spectrum, t, np.arange(rates.N + 1))


def evolve(
    rates: RateTable, spectrum: Spectrum, q0: DistributionVector, t: float
) -> DistributionVector:
    """Propagate an initial distribution: sum over n0 of q0(n0) P(n, t | n0, 0)."""
    if len(q0.probs) != rates.N + 1:
        raise ParameterError("initial distribution does not match the rate table")
    support = np.flatnonzero(q0.probs > 0)
    columns, method = _propagate_columns(rates, spectrum, t, support)
    probs, defect = _finalize(columns @ q0.probs[support])
    return DistributionVector(probs=probs, timestamp=float(t), method=method, defect=defect)


def evolve_piecewise(
    schedule: ZeitgeistSchedule,
    params: ModelParams,
    family: RateFamily,
    q0: DistributionVector,
    t: float,
) -> DistributionVector:
    """Propagate through a piecewise-constant zeitgeist, interval by interval.

    ``params.F`` is ignored; each interval uses its scheduled value.
    """
    if t < 0 or t > schedule.end:
        raise ParameterError(f"time {t} outside the schedule [0, {schedule.end}]")
    current = q0
    for start, stop, F in schedule.intervals():
        if t <= start:
            break
        rates = build_rate_table(params.with_field(F=F), family)
        span = min(t, stop) - start
        current = evolve(rates, spectrum_of(rates), current, span)
        logger.debug(f"Propagated zeitgeist interval [{start}, {stop}) with F={F}")
    return DistributionVector(
        probs=current.probs, timestamp=float(t), method=current.method, defect=current.defect
    )


def metastable_mode(
    rates: RateTable, spectrum: Spectrum, q0: DistributionVector
) -> tuple[float, np.ndarray, float]:
    """Second eigenvalue and its mode, anchored to the exact solution.

    The right eigenvector of lambda_2 has arbitrary scale, so it is fixed by a
    least-squares match of P_s + exp(lambda_2 t*) Phi_2 to the exact solution
    at t* = 5 / |lambda_3|. The fit uses the 1 / P_s inner product, in which
    the modes are orthogonal, so faster modes do not leak into the amplitude.

    Returns:
        Tuple of (lambda_2, Phi_2, t*)
    """
    if rates.N < 2:
        raise ParameterError("a metastable mode needs at least three states")
    lambda2 = float(spectrum.eigenvalues[1])
    lambda3 = float(spectrum.eigenvalues[2])
    steady = np.exp(spectrum.log_steady)
    half = 0.5 * spectrum.log_steady
    vector = spectrum.eigenvectors[:, 1]
    mode = np.exp(half) * vector
    mode = mode - mode.sum() * steady
    dual = np.exp(-half) * vector

    anchor_time = 5.0 / abs(lambda3)
    exact = evolve(rates, spectrum, q0, anchor_time).probs
    amplitude = float(np.dot(dual, exact - steady) / np.dot(dual, mode))
    phi2 = amplitude * np.exp(-lambda2 * anchor_time) * mode
    return lambda2, phi2, anchor_time


def metastable_approximation(
    steady: DistributionVector, lambda2: float, phi2: np.ndarray, t: float
) -> DistributionVector:
    """Two-eigenvalue approximation P_s + exp(lambda_2 t) Phi_2.

    Args:
        steady: Steady-state distribution
        lambda2: Second eigenvalue of the master operator (negative)
        phi2: Mode of lambda_2, summing to zero
        t: Time, meaningful once the faster modes have decayed
    """
    if lambda2 >= 0:
        raise ParameterError(f"lambda_2 must be negative, got {lambda2}")
    phi2 = np.asarray(phi2, dtype=float)
    phi2 = phi2 - phi2.sum() / len(phi2)
    probs, defect = _finalize(steady.probs + np.exp(lambda2 * t) * phi2, strict=False)
    return DistributionVector(probs=probs, timestamp=float(t), method="metastable", defect=defect)


def mode_occupancy(dist: DistributionVector, n_u: int) -> tuple[float, float]:
    """Probability mass left and right of the unstable equilibrium."""
    return mode_masses(dist.probs, n_u)
