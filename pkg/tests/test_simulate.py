"""Tests for the exact stochastic simulator."""

import numpy as np
import pytest
from scipy.stats import kstest

from mean_field_choice.errors import ParameterError
from mean_field_choice.model import Logit, ModelParams, build_rate_table, rate_equation
from mean_field_choice.simulate import (
    BinomialStart,
    ensemble_stats,
    first_passage,
    sample_ensemble,
    simulate,
    simulate_ensemble,
    simulate_jumps,
    simulate_piecewise,
    simulate_piecewise_ensemble,
)
from mean_field_choice.spectral import (
    ZeitgeistSchedule,
    evolve,
    evolve_piecewise,
    point_mass,
    spectrum_of,
)

PARAMS = ModelParams(F=0.1, J=1.0, alpha=0.0, beta=1.0, gamma=1.0, N=20)


def test_trajectory_grid_and_range():
    """Test the recording grid and that states stay in [0, N]."""
    rates = build_rate_table(PARAMS, Logit())
    trajectory = simulate(rates, 10, t_max=5.0, dt=0.5, seed=1)
    np.testing.assert_allclose(trajectory.grid, np.arange(11) * 0.5)
    assert trajectory.states[0] == 10
    assert np.all((trajectory.states >= 0) & (trajectory.states <= 20))
    assert trajectory.m[0] == 0.0


def test_grid_must_divide_horizon():
    """Test that t_max has to be a whole number of steps."""
    rates = build_rate_table(PARAMS, Logit())
    with pytest.raises(ParameterError):
        simulate(rates, 10, t_max=1.0, dt=0.3, seed=1)
    with pytest.raises(ParameterError):
        simulate(rates, 10, t_max=1.0, dt=0.0, seed=1)


def test_jumps_are_single_steps():
    """Test that every event adds or removes exactly one right-decider."""
    rates = build_rate_table(PARAMS, Logit())
    path = simulate_jumps(rates, 10, t_max=20.0, seed=3)
    assert len(path.times) > 10
    np.testing.assert_array_equal(np.abs(np.diff(path.states)), 1)
    assert np.all(path.holding_times() > 0)
    assert path.times[-1] < 20.0


def test_zero_rates_freeze_trajectory():
    """Test that gamma = 0 leaves the population where it started."""
    rates = build_rate_table(PARAMS.with_field(gamma=0.0), Logit())
    trajectory = simulate(rates, 7, t_max=10.0, dt=1.0, seed=0)
    np.testing.assert_array_equal(trajectory.states, 7)


def test_same_seed_same_trajectory():
    """Test reproducibility from the seed alone."""
    rates = build_rate_table(PARAMS, Logit())
    first = simulate(rates, 10, t_max=10.0, dt=0.1, seed=42)
    second = simulate(rates, 10, t_max=10.0, dt=0.1, seed=42)
    other = simulate(rates, 10, t_max=10.0, dt=0.1, seed=43)
    np.testing.assert_array_equal(first.states, second.states)
    assert not np.array_equal(first.states, other.states)


def test_ensemble_is_reproducible():
    """Test that ensemble statistics depend only on the master seed."""
    rates = build_rate_table(PARAMS, Logit())
    first = simulate_ensemble(rates, 10, t_max=2.0, dt=0.5, size=20, seed=9)
    second = simulate_ensemble(rates, 10, t_max=2.0, dt=0.5, size=20, seed=9)
    np.testing.assert_array_equal(first.mean, second.mean)
    np.testing.assert_array_equal(first.histograms, second.histograms)


def test_ensemble_statistics_use_population_variance():
    """Test mean, variance and histogram of frozen binomial starts."""
    rates = build_rate_table(PARAMS.with_field(gamma=0.0), Logit())
    trajectories = sample_ensemble(rates, BinomialStart(0.5), t_max=1.0, dt=1.0, size=50, seed=4)
    initial = np.array([trajectory.states[0] for trajectory in trajectories])
    stats = ensemble_stats(trajectories)
    assert stats.size == 50
    assert stats.mean[0] == pytest.approx(initial.mean())
    assert stats.variance[0] == pytest.approx(initial.var())
    assert stats.distribution(1).probs.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(stats.standard_error(), np.sqrt(stats.variance / 50))


def test_ensemble_needs_members():
    """Test that an empty ensemble is rejected."""
    rates = build_rate_table(PARAMS, Logit())
    with pytest.raises(ParameterError):
        simulate_ensemble(rates, 10, t_max=1.0, dt=0.5, size=0)


def test_binomial_start_validation():
    """Test that p0 must be a probability."""
    with pytest.raises(ParameterError):
        BinomialStart(-0.1)


def test_holding_times_are_exponential():
    """Test that the time to leave a state is exponential with the exit rate."""
    rates = build_rate_table(PARAMS, Logit())
    rng = np.random.default_rng(2024)
    n = 12
    samples = [first_passage(rates, n, {n - 1, n + 1}, rng) for _ in range(2000)]
    times = np.array([time for time, _ in samples])
    ups = np.mean([hit == n + 1 for _, hit in samples])
    exit_rate = rates.exit_rates[n]
    assert kstest(times, "expon", args=(0.0, 1.0 / exit_rate)).pvalue > 1e-3
    assert ups == pytest.approx(rates.birth[n] / exit_rate, abs=0.05)


def test_ensemble_mean_matches_exact_solution():
    """Test the SSA ensemble mean against the exact distribution."""
    rates = build_rate_table(PARAMS, Logit())
    stats = simulate_ensemble(rates, 10, t_max=1.0, dt=1.0, size=2000, seed=11)
    exact = evolve(rates, spectrum_of(rates), point_mass(20, 10), 1.0)
    error = stats.standard_error()[-1]
    assert abs(stats.mean[-1] - exact.mean()) < 4.0 * error


def test_piecewise_simulation_respects_schedule_end():
    """Test that a simulation cannot run past the schedule."""
    schedule = ZeitgeistSchedule(breakpoints=(1.0, 2.0), values=(0.5, -0.5))
    with pytest.raises(ParameterError):
        simulate_piecewise(schedule, PARAMS, Logit(), 10, t_max=3.0, dt=0.5, seed=0)


@pytest.mark.slow
def test_piecewise_ensemble_matches_piecewise_evolution():
    """Test SSA under a field step against the exact piecewise solution."""
    schedule = ZeitgeistSchedule(breakpoints=(2.0, 4.0), values=(0.8, -0.8))
    stats = simulate_piecewise_ensemble(
        schedule, PARAMS, Logit(), 10, t_max=4.0, dt=2.0, size=10_000, seed=8
    )
    exact = evolve_piecewise(schedule, PARAMS, Logit(), point_mass(20, 10), 4.0)
    assert stats.distribution(-1).total_variation(exact) < 0.05


@pytest.mark.slow
def test_ensemble_histograms_match_exact_distributions():
    """Test SSA histograms of the two-mode example against the exact solution."""
    params = ModelParams(F=0.0, J=10.0, alpha=0.0, beta=1.0, gamma=1.0, N=100)
    rates = build_rate_table(params, Logit())
    spectrum = spectrum_of(rates)
    stats = simulate_ensemble(rates, 50, t_max=10.0, dt=0.1, size=2500, seed=2500)
    # Coarse-grain to ten order-parameter bins so sampling noise stays below the tolerance.
    edges = np.linspace(0, 101, 11).astype(int)
    for t, index in ((0.1, 1), (1.0, 10), (10.0, 100)):
        exact = evolve(rates, spectrum, point_mass(100, 50), t).probs
        empirical = stats.histograms[index]
        exact_bins = np.add.reduceat(exact, edges[:-1])
        empirical_bins = np.add.reduceat(empirical, edges[:-1])
        assert 0.5 * np.abs(exact_bins - empirical_bins).sum() < 0.05


def test_ensemble_members_record_spawn_index():
    """Test that each ensemble trajectory carries its integer seed."""
    rates = build_rate_table(PARAMS, Logit())
    trajectories = sample_ensemble(rates, 10, t_max=1.0, dt=0.5, size=4, seed=3)
    assert [trajectory.seed for trajectory in trajectories] == [0, 1, 2, 3]
    assert simulate(rates, 10, t_max=1.0, dt=0.5, seed=7).seed == 7


def test_ensemble_mean_follows_rate_equation_when_monomodal():
    """Test that below criticality the ensemble mean tracks the deterministic drift."""
    params = ModelParams(F=0.1, J=1.0, alpha=0.0, beta=0.5, gamma=1.0, N=100)
    rates = build_rate_table(params, Logit())
    stats = simulate_ensemble(rates, 10, t_max=5.0, dt=0.5, size=400, seed=21)
    deterministic = rate_equation(params, Logit(), 10.0, stats.grid)
    # One agent of slack for the finite-N offset of a nonlinear drift.
    tolerance = 3.0 * stats.standard_error() + 1.0
    assert np.all(np.abs(stats.mean - deterministic) < tolerance)


@pytest.mark.slow
def test_ensemble_histograms_match_exact_distributions_per_state():
    """Test per-state SSA histograms of the two-mode example at early times."""
    params = ModelParams(F=0.0, J=10.0, alpha=0.0, beta=1.0, gamma=1.0, N=100)
    rates = build_rate_table(params, Logit())
    spectrum = spectrum_of(rates)
    stats = simulate_ensemble(rates, 50, t_max=1.0, dt=0.1, size=10_000, seed=10_000)
    for t, index in ((0.1, 1), (1.0, 10)):
        exact = evolve(rates, spectrum, point_mass(100, 50), t)
        assert stats.distribution(index).total_variation(exact) < 0.05
