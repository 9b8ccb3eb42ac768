"""Calibration tools: likelihood fits to trajectory data."""

import logging
from collections import defaultdict
from typing import Any

from ..calibrate import Dataset, calibrate, error_metrics
from ..config import CalibrationConfig
from ..utils.helpers import table_result

logger = logging.getLogger(__name__)


def calibrate_dataset(
    N: int,
    observations: list[dict[str, Any]],
    bounds: dict[str, list[float]] | None = None,
    pop_size: int = 50,
    steps: int = 50,
    seed: int | None = None,
    truth: dict[str, float] | None = None,
) -> dict[str, Any]:
    """Fit (F, J, gamma) to observations given as rows of traj_id, t and m."""
    grouped: dict[Any, tuple[list[float], list[float]]] = defaultdict(lambda: ([], []))
    for row in observations:
        times, values = grouped[row["traj_id"]]
        times.append(float(row["t"]))
        values.append(float(row["m"]))
    data = Dataset.from_order_parameter(N, list(grouped.values()))

    # Same key checks as the calibration section of a run config.
    settings = CalibrationConfig(bounds=bounds, truth=truth)
    search = settings.param_bounds()
    theta_true = settings.true_theta()
    result = calibrate(data, search, pop_size=pop_size, steps=steps, seed=seed)

    row: dict[str, Any] = {
        "F": result.theta.F,
        "J": result.theta.J,
        "gamma": result.theta.gamma,
        "nll": result.nll,
        "evaluations": result.evaluations,
        "seed": result.seed,
    }
    columns = list(row)
    if theta_true is not None:
        row["E_tot"], row["f"] = error_metrics(theta_true, result.theta)
        columns += ["E_tot", "f"]
    logger.info(f"Calibrated theta*=({row['F']:.4g}, {row['J']:.4g}, {row['gamma']:.4g})")
    return table_result(401, "Calibration Result", columns, [row])
