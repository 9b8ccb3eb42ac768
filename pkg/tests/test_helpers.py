"""Tests for helper functions."""

import json

import numpy as np
import pytest

from mean_field_choice.utils.helpers import (
    fields_to_headers,
    format_header,
    table_result,
    to_builtin,
)
from mean_field_choice.utils.metrics import distribution_moments, mode_masses, total_variation


def test_format_header():
    """Test header formatting."""
    assert format_header("tau_lr") == "Tau Lr"
    assert format_header("MeanN") == "Mean N"
    assert format_header("TVDistance") == "TV Distance"
    assert format_header("lambda2_inv_spectral") == "Lambda2 Inv Spectral"
    assert format_header("E_tot") == "E Tot"


def test_fields_to_headers():
    """Test fields to headers conversion."""
    fields = {"1": "n", "2": "tau", "3": "phi_R"}
    headers = fields_to_headers(fields)

    assert len(headers) == 3
    assert headers[0]["accessor"] == "n"
    assert headers[2]["accessor"] == "phi_R"
    assert headers[2]["Header"] == "Phi R"


def test_table_result():
    """Test the table shape shared by every tool."""
    rows = [{"n": 0, "prob": 0.25}, {"n": 1, "prob": 0.75}]
    table = table_result(102, "Steady-State Distribution", ["n", "prob"], rows)

    assert table["id"] == 102
    assert table["fields"] == {"1": "n", "2": "prob"}
    assert table["count"] == 2
    assert table["resource"] is rows
    assert [header["Header"] for header in table["headers"]] == ["N", "Prob"]


def test_to_builtin():
    """Test conversion of numpy values for JSON output."""
    payload = {"tau": np.array([1.0, 2.5]), "n": np.int64(3), "nested": (np.float64(0.5),)}
    converted = to_builtin(payload)
    assert converted == {"tau": [1.0, 2.5], "n": 3, "nested": [0.5]}
    json.dumps(converted)


def test_total_variation():
    """Test half the L1 distance."""
    assert total_variation([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)
    assert total_variation([0.2, 0.8], [0.2, 0.8]) == 0.0
    with pytest.raises(ValueError):
        total_variation([1.0], [0.5, 0.5])


def test_distribution_moments():
    """Test mean and variance over the state index."""
    mean, variance = distribution_moments([0.25, 0.5, 0.25])
    assert mean == pytest.approx(1.0)
    assert variance == pytest.approx(0.5)


def test_mode_masses():
    """Test that the separating state belongs to neither mode."""
    left, right = mode_masses([0.1, 0.2, 0.3, 0.4], 2)
    assert left == pytest.approx(0.3)
    assert right == pytest.approx(0.4)
