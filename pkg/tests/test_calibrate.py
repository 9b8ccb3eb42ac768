"""Tests for the likelihood, the optimizer and the calibration pipeline."""

import numpy as np
import pytest

from mean_field_choice.calibrate import (
    Dataset,
    ParamBounds,
    SearchSpace,
    Theta,
    Trajectory,
    calibrate,
    differential_evolution,
    error_metrics,
    neg_log_likelihood,
    simulate_dataset,
    states_from_order_parameter,
)
from mean_field_choice.errors import ParameterError, UndefinedMetricError
from mean_field_choice.model import Logit, ModelParams, build_rate_table
from mean_field_choice.spectral import spectrum_of, transition_probability

TRUTH = Theta(F=0.025, J=1.5, gamma=1.0)
PARAMS = ModelParams(F=0.025, J=1.5, alpha=0.0, beta=1.0, gamma=1.0, N=20)


def _small_dataset(seed: int = 3) -> Dataset:
    return simulate_dataset(PARAMS, Logit(), 10, t_max=40.0, points=21, trajectories=5, seed=seed)


def _sphere(x: np.ndarray) -> float:
    return float(np.sum(x**2))


def test_error_metrics():
    """Test E_tot and f on a doubled field."""
    total, ratio = error_metrics(TRUTH, Theta(F=0.05, J=1.5, gamma=1.0))
    assert total == pytest.approx(1.0)
    assert ratio == pytest.approx(1.0)
    assert error_metrics(TRUTH, TRUTH) == (0.0, 0.0)


def test_error_metrics_need_nonzero_truth():
    """Test that relative errors are undefined for a zero true field."""
    with pytest.raises(UndefinedMetricError):
        error_metrics(Theta(F=0.0, J=1.5, gamma=1.0), TRUTH)


def test_differential_evolution_minimizes_sphere():
    """Test convergence on a smooth convex objective."""
    result = differential_evolution(
        _sphere, SearchSpace.box([(-2.0, 2.0)] * 3), pop_size=50, steps=200, seed=1
    )
    assert np.all(np.abs(result.x) < 1e-3)
    assert result.fun < 1e-6
    assert result.evaluations == 50 * 201
    assert result.history == sorted(result.history, reverse=True)


def test_differential_evolution_is_deterministic():
    """Test that the seed fixes the search."""
    space = SearchSpace.box([(-2.0, 2.0)] * 2)
    first = differential_evolution(_sphere, space, pop_size=10, steps=20, seed=6)
    second = differential_evolution(_sphere, space, pop_size=10, steps=20, seed=6)
    np.testing.assert_array_equal(first.x, second.x)
    assert first.history == second.history


def test_differential_evolution_collapsed_bounds():
    """Test that a degenerate box is evaluated once and echoed back."""
    bounds = ParamBounds(F=(0.025, 0.025), J=(1.5, 1.5), gamma=(1.0, 1.0))
    calls = []

    def objective(x):
        calls.append(x)
        return 2.0

    result = differential_evolution(objective, bounds, pop_size=8, steps=5, seed=0)
    assert result.evaluations == 1
    assert len(calls) == 1
    np.testing.assert_allclose(result.x, [0.025, 1.5, 1.0])


def test_differential_evolution_rejects_small_population():
    """Test the minimum population size."""
    with pytest.raises(ParameterError):
        differential_evolution(_sphere, SearchSpace.box([(-1.0, 1.0)]), pop_size=3)


def test_search_space_validation():
    """Test that inverted and non-positive log bounds are rejected."""
    with pytest.raises(ParameterError):
        SearchSpace.box([(1.0, -1.0)])
    with pytest.raises(ParameterError):
        ParamBounds(J=(0.0, 1.0)).to_search_space()


def test_log_scale_dimensions_stay_in_bounds():
    """Test that log-scale searches never leave the box."""
    bounds = ParamBounds(F=(-1.0, 1.0), J=(0.5, 4.0), gamma=(0.5, 2.0))
    seen = []

    def objective(x):
        seen.append(x.copy())
        return _sphere(x - np.array([0.0, 1.0, 1.0]))

    differential_evolution(objective, bounds, pop_size=10, steps=10, seed=2)
    points = np.array(seen)
    assert np.all(points[:, 1] >= 0.5 - 1e-12) and np.all(points[:, 1] <= 4.0 + 1e-12)
    assert np.all(points[:, 2] >= 0.5 - 1e-12) and np.all(points[:, 2] <= 2.0 + 1e-12)


def test_nll_is_sum_of_transition_logs():
    """Test the likelihood against a transition-by-transition sum."""
    data = _small_dataset()
    rates = build_rate_table(TRUTH.to_params(data), Logit())
    spectrum = spectrum_of(rates)
    expected = 0.0
    for trajectory in data.trajectories:
        for k in range(len(trajectory) - 1):
            gap = trajectory.times[k + 1] - trajectory.times[k]
            dist = transition_probability(rates, spectrum, int(trajectory.states[k]), float(gap))
            expected -= np.log(dist.probs[trajectory.states[k + 1]])
    assert neg_log_likelihood(TRUTH, data) == pytest.approx(expected, rel=1e-9)


def test_nll_prefers_true_parameters():
    """Test that the truth scores better than a distant theta."""
    data = _small_dataset()
    far = Theta(F=-1.0, J=0.2, gamma=2.5)
    assert neg_log_likelihood(TRUTH, data) < neg_log_likelihood(far, data)


def test_nll_allows_repeated_times():
    """Test that a zero gap contributes nothing when the state repeats."""
    data = Dataset(N=10, trajectories=(Trajectory(np.array([0.0, 0.0, 1.0]), np.array([5, 5, 6])),))
    single = Dataset(N=10, trajectories=(Trajectory(np.array([0.0, 1.0]), np.array([5, 6])),))
    assert neg_log_likelihood(TRUTH, data) == pytest.approx(neg_log_likelihood(TRUTH, single))


def test_dataset_validation():
    """Test rejection of malformed trajectories."""
    with pytest.raises(ParameterError):
        Dataset(N=10, trajectories=(Trajectory(np.array([0.0]), np.array([5])),))
    with pytest.raises(ParameterError):
        Dataset(N=10, trajectories=(Trajectory(np.array([1.0, 0.0]), np.array([5, 5])),))
    with pytest.raises(ParameterError):
        Dataset(N=10, trajectories=(Trajectory(np.array([0.0, 1.0]), np.array([5, 11])),))


def test_states_from_order_parameter():
    """Test the m to n mapping and rejection of off-lattice values."""
    np.testing.assert_array_equal(states_from_order_parameter([-1.0, 0.0, 0.2, 1.0], 10), [0, 5, 6, 10])
    with pytest.raises(ParameterError, match="m=0.15"):
        states_from_order_parameter([0.0, 0.15], 10)


def test_dataset_truncate_and_thin():
    """Test restriction to an early window and even subsampling."""
    data = _small_dataset()
    early = data.truncate(10.0)
    assert all(trajectory.times[-1] <= 10.0 for trajectory in early.trajectories)
    assert all(len(trajectory) == 6 for trajectory in early.trajectories)
    thinned = data.thin(5)
    assert all(len(trajectory) == 5 for trajectory in thinned.trajectories)
    assert all(trajectory.times[-1] == 40.0 for trajectory in thinned.trajectories)
    with pytest.raises(ParameterError):
        data.truncate(-1.0)


def test_dataset_combine():
    """Test merging datasets of the same population only."""
    data = _small_dataset()
    merged = data.combine(_small_dataset(seed=4))
    assert len(merged.trajectories) == 10
    other = Dataset(N=30, trajectories=data.trajectories[:0])
    with pytest.raises(ParameterError):
        data.combine(other)


def test_simulate_dataset_is_reproducible():
    """Test that synthetic datasets depend only on the seed."""
    first = _small_dataset(seed=12)
    second = _small_dataset(seed=12)
    assert first.points == 5 * 21
    for a, b in zip(first.trajectories, second.trajectories):
        np.testing.assert_array_equal(a.states, b.states)


def test_calibrate_collapsed_bounds_returns_truth():
    """Test the pipeline end to end with a fixed theta."""
    data = _small_dataset()
    bounds = ParamBounds(F=(0.025, 0.025), J=(1.5, 1.5), gamma=(1.0, 1.0))
    result = calibrate(data, bounds, pop_size=8, steps=3, seed=0)
    assert result.theta.F == pytest.approx(0.025)
    assert result.theta.J == pytest.approx(1.5)
    assert result.theta.gamma == pytest.approx(1.0)
    assert result.evaluations == 1
    assert result.nll == pytest.approx(neg_log_likelihood(result.theta, data))


@pytest.mark.slow
def test_calibration_recovers_parameters():
    """Test recovery of (F, J, gamma) from simulated trajectories."""
    params = PARAMS.with_field(N=50)
    data = simulate_dataset(params, Logit(), 25, t_max=1000.0, points=101, trajectories=50, seed=5)
    result = calibrate(data, pop_size=40, steps=60, seed=5)
    total, ratio = error_metrics(TRUTH, result.theta)
    assert total <= 1.0
    assert ratio <= 1.0


def test_nll_is_additive_over_combined_datasets():
    """Test that merging datasets sums their likelihoods."""
    first = _small_dataset(seed=3)
    second = _small_dataset(seed=4)
    combined = neg_log_likelihood(TRUTH, first.combine(second))
    assert combined == pytest.approx(
        neg_log_likelihood(TRUTH, first) + neg_log_likelihood(TRUTH, second), rel=1e-10
    )


@pytest.mark.slow
def test_single_short_trajectory_recovers_parameters_poorly():
    """Test that one trajectory started in the left mode leaves the parameters unidentified."""
    params = PARAMS.with_field(N=50)
    data = simulate_dataset(params, Logit(), 3, t_max=100.0, points=101, trajectories=1, seed=5)
    result = calibrate(data, pop_size=40, steps=60, seed=5)
    total, _ = error_metrics(TRUTH, result.theta)
    assert total > 1.0
