"""Solver tools: time-dependent distributions, steady state and spectrum."""

import logging
from typing import Any

import numpy as np

from ..session import ModelSession
from ..spectral import binomial_initial, point_mass
from ..utils.helpers import table_result

logger = logging.getLogger(__name__)


def solve_distribution(
    session: ModelSession,
    times: list[float],
    n0: int | None = None,
    p0: float | None = None,
) -> dict[str, Any]:
    """Exact distribution of n at each requested time."""
    N = session.params.N
    if p0 is not None:
        q0 = binomial_initial(N, p0)
    else:
        q0 = point_mass(N, n0 if n0 is not None else N // 2)

    output_data = []
    m = q0.m
    for t in times:
        dist = session.propagate(q0, float(t))
        logger.debug(f"Solved t={t} via {dist.method} (defect {dist.defect:.1e})")
        for n, prob in enumerate(dist.probs):
            output_data.append({"t": float(t), "n": n, "m": float(m[n]), "prob": float(prob)})

    return table_result(101, "Time-Dependent Distribution", ["t", "n", "m", "prob"], output_data)


def steady_state_distribution(session: ModelSession) -> dict[str, Any]:
    """Kirchhoff steady state over n."""
    steady = session.steady
    output_data = [
        {"n": n, "m": float(m), "prob": float(prob)}
        for n, (m, prob) in enumerate(zip(steady.m, steady.probs))
    ]
    return table_result(102, "Steady-State Distribution", ["n", "m", "prob"], output_data)


def master_spectrum(session: ModelSession, count: int = 10) -> dict[str, Any]:
    """Leading eigenvalues of the master operator and their relaxation times."""
    eigenvalues = session.spectrum.eigenvalues[: max(count, 1)]
    output_data = []
    for index, value in enumerate(eigenvalues, start=1):
        output_data.append({
            "index": index,
            "eigenvalue": float(value),
            "relaxation_time": float(-1.0 / value) if value < 0 else None,
        })
    logger.info(f"Relaxation time 1/|lambda_2| = {session.spectrum.relaxation_time:.6g}")
    return table_result(
        103, "Master Operator Spectrum", ["index", "eigenvalue", "relaxation_time"], output_data
    )


def spectrum_summary(session: ModelSession) -> dict[str, float]:
    spectrum = session.spectrum
    return {
        "lambda2": spectrum.lambda2,
        "relaxation_time": spectrum.relaxation_time,
        "min_gap": spectrum.min_gap,
        "pinning_residual": float(np.abs(spectrum.raw_lambda1)),
    }
