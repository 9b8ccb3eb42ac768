"""Tests for the MCP tool functions."""

import pytest

from mean_field_choice import server
from mean_field_choice.errors import ConfigError, NoMetastabilityError, ParameterError
from mean_field_choice.model import Kirman
from mean_field_choice.tools import solver

LOCK_IN = {"F": 0.025, "J": 1.5, "N": 50}


def test_create_session_parses_family():
    """Test session creation from flat tool arguments."""
    session = server.create_session(F=0.0, J=1.0, N=10, family="kirman", epsilon=0.1, mu=1.0)
    assert session.family == Kirman(epsilon=0.1, mu=1.0)
    with pytest.raises(ParameterError):
        server.create_session(F=0.0, J=1.0, N=10, family="voter")


def test_solve_distribution_tool():
    """Test one row per (t, n) summing to one per time."""
    result = server.solve_distribution(F=0.1, J=1.0, N=10, times=[0.0, 2.0], n0=3)
    assert result["id"] == 101
    assert result["count"] == 2 * 11
    at_zero = [row["prob"] for row in result["resource"] if row["t"] == 0.0]
    assert at_zero[3] == 1.0
    later = [row["prob"] for row in result["resource"] if row["t"] == 2.0]
    assert sum(later) == pytest.approx(1.0)


def test_steady_state_tool():
    """Test the steady-state table."""
    result = server.steady_state_distribution(**LOCK_IN)
    assert result["count"] == 51
    assert sum(row["prob"] for row in result["resource"]) == pytest.approx(1.0)


def test_master_spectrum_tool():
    """Test the leading eigenvalues and relaxation times."""
    result = server.master_spectrum(**LOCK_IN, count=3)
    rows = result["resource"]
    assert [row["index"] for row in rows] == [1, 2, 3]
    assert rows[0]["eigenvalue"] == 0.0
    assert rows[0]["relaxation_time"] is None
    assert rows[1]["relaxation_time"] == pytest.approx(1288.8, rel=0.01)


def test_spectrum_summary():
    """Test the spectrum diagnostics."""
    summary = solver.spectrum_summary(server.create_session(**LOCK_IN))
    assert summary["relaxation_time"] == pytest.approx(1288.8, rel=0.01)
    assert summary["lambda2"] < 0
    assert summary["min_gap"] > 0


def test_equilibria_tool():
    """Test roots and stability above criticality."""
    result = server.equilibria(F=0.0, J=1.0, N=100, beta=1.1)
    assert result["count"] == 3
    assert [row["Stable"] for row in result["resource"]] == [True, False, True]
    assert result["resource"][0]["beta_c"] == pytest.approx(1.0)


def test_metastability_analysis_tool():
    """Test the first-passage table and its summary."""
    result = server.metastability_analysis(**LOCK_IN)
    summary = result["summary"]
    assert (summary["n_minus"], summary["n_u"], summary["n_plus"]) == (3, 24, 47)
    rows = result["resource"]
    assert rows[24]["tau"] == 0.0
    assert rows[3]["fixation"] == 0.0
    assert rows[47]["fixation"] == 1.0
    assert rows[0]["fixation"] is None
    with pytest.raises(NoMetastabilityError):
        server.metastability_analysis(**LOCK_IN, beta=0.5)


def test_simulate_ensemble_tool():
    """Test seeded ensemble statistics."""
    first = server.simulate_ensemble(F=0.1, J=1.0, N=10, t_max=1.0, dt=0.5, ensemble=5, seed=3)
    second = server.simulate_ensemble(F=0.1, J=1.0, N=10, t_max=1.0, dt=0.5, ensemble=5, seed=3)
    assert first["count"] == 3
    assert first["resource"] == second["resource"]
    assert first["resource"][0] == {"t": 0.0, "mean": 5.0, "variance": 0.0}


def test_calibrate_dataset_tool():
    """Test a fixed-theta calibration from observation rows."""
    observations = [
        {"traj_id": 0, "t": 0.0, "m": 0.0},
        {"traj_id": 0, "t": 1.0, "m": 0.2},
        {"traj_id": 1, "t": 0.0, "m": -0.2},
        {"traj_id": 1, "t": 1.0, "m": -0.4},
    ]
    result = server.calibrate_dataset(
        N=10,
        observations=observations,
        bounds={"F": [0.1, 0.1], "J": [1.0, 1.0], "gamma": [1.0, 1.0]},
        pop_size=8,
        steps=1,
        truth={"F": 0.1, "J": 1.0, "gamma": 1.0},
    )
    row = result["resource"][0]
    assert result["id"] == 401
    assert row["F"] == pytest.approx(0.1)
    assert row["evaluations"] == 1
    assert row["E_tot"] == pytest.approx(0.0, abs=1e-12)
    assert "f" in result["fields"].values()


@pytest.mark.parametrize(
    "arguments",
    [
        {"truth": {"F": 0.1, "J": 1.0, "gamma": 1.0, "beta": 1.0}},
        {"truth": {"F": 0.1}},
        {"bounds": {"beta": [0.5, 1.5]}},
    ],
)
def test_calibrate_dataset_tool_rejects_bad_keys(arguments):
    """Test that truth and bounds are checked like a run config."""
    observations = [{"traj_id": 0, "t": 0.0, "m": 0.0}, {"traj_id": 0, "t": 1.0, "m": 0.2}]
    with pytest.raises(ConfigError):
        server.calibrate_dataset(N=10, observations=observations, pop_size=8, steps=1, **arguments)
