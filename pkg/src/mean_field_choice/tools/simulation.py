"""Simulation tools: SSA ensembles."""

import logging
from typing import Any

from ..session import ModelSession
from ..simulate import BinomialStart, simulate_ensemble as run_ensemble
from ..utils.helpers import table_result

logger = logging.getLogger(__name__)


def simulate_ensemble(
    session: ModelSession,
    t_max: float,
    dt: float,
    ensemble: int,
    n0: int | None = None,
    p0: float | None = None,
    seed: int | None = None,
) -> dict[str, Any]:
    """Ensemble mean and variance of n on the grid 0, dt, ..., t_max."""
    N = session.params.N
    init = BinomialStart(p0) if p0 is not None else (n0 if n0 is not None else N // 2)
    stats = run_ensemble(session.rates, init, t_max, dt, ensemble, seed=seed)

    output_data = [
        {"t": float(t), "mean": float(mean), "variance": float(variance)}
        for t, mean, variance in zip(stats.grid, stats.mean, stats.variance)
    ]
    logger.info(f"Simulated {stats.size} trajectories over {len(stats.grid)} grid times")
    return table_result(301, "SSA Ensemble Statistics", ["t", "mean", "variance"], output_data)
