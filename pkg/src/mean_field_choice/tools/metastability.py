"""Metastability tools: equilibria and first-passage analysis."""

import logging
from typing import Any

from ..errors import NoPhaseTransitionError
from ..metastability import analyze_metastability, fixation_curve
from ..model import critical_rationality, mean_field_equilibria
from ..session import ModelSession
from ..utils.helpers import table_result

logger = logging.getLogger(__name__)


def equilibria(session: ModelSession) -> dict[str, Any]:
    """Mean-field equilibria m = tanh(beta (F + J (1 + alpha) m)) with their stability."""
    params = session.params
    roots = mean_field_equilibria(params)
    try:
        beta_c = critical_rationality(params)
    except NoPhaseTransitionError:
        beta_c = None

    output_data = [
        {
            "m": root.m,
            "n": params.N * (root.m + 1.0) / 2.0,
            "Stable": root.stable,
            "beta_c": beta_c,
        }
        for root in roots.roots
    ]
    logger.info(f"{roots.count} mean-field equilibria at beta={params.beta}")
    return table_result(201, "Mean-Field Equilibria", ["m", "n", "Stable", "beta_c"], output_data)


def metastability_analysis(session: ModelSession) -> dict[str, Any]:
    """Exact escape times, fixation split and the two-state relaxation estimate."""
    result = analyze_metastability(session.rates, session.steady)
    eq = result.equilibria
    fixation = fixation_curve(session.rates, eq.n_minus, eq.n_plus)

    output_data = []
    for n, tau in enumerate(result.tau):
        row: dict[str, Any] = {"n": n, "m": float(session.steady.m[n]), "tau": float(tau)}
        row["fixation"] = float(fixation[n - eq.n_minus]) if eq.n_minus <= n <= eq.n_plus else None
        output_data.append(row)

    table = table_result(
        202, "First-Passage Analysis", ["n", "m", "tau", "fixation"], output_data
    )
    table["summary"] = {
        "n_minus": eq.n_minus,
        "n_u": eq.n_u,
        "n_plus": eq.n_plus,
        "tau_lr": result.tau_lr,
        "tau_rl": result.tau_rl,
        "phi_R": result.phi_R,
        "lambda2_inv_approx": result.relaxation_time,
        "lambda2_inv_spectral": session.spectrum.relaxation_time,
    }
    return table
