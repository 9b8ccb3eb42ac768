"""CSV and JSON readers and writers for every result schema.

Floats are written with ``repr`` so a parsed file re-emits byte-identically.
"""

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .calibrate import CalibrationResult, Dataset, Trajectory, states_from_order_parameter
from .errors import ParameterError
from .metastability import FirstPassageResult
from .model import order_parameter_grid
from .simulate import EnsembleStats
from .simulate import Trajectory as SampledTrajectory
from .spectral import DistributionVector
from .utils.helpers import to_builtin

logger = logging.getLogger(__name__)

DISTRIBUTION_COLUMNS = ["t", "n", "m", "prob"]
TRAJECTORY_COLUMNS = ["traj_id", "t", "n", "m"]
ENSEMBLE_COLUMNS = ["t", "mean", "variance"]
HISTOGRAM_COLUMNS = ["t", "n", "m", "freq"]
DATASET_COLUMNS = ["traj_id", "t", "m"]
SIDECAR_KEYS = {"N", "beta", "alpha"}


def _number(value: Any) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def write_rows(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_number(value) for value in row])
    logger.debug(f"Wrote {path}")
    return path


def _read_rows(path: Path, columns: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    try:
        with Path(path).open(newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != list(columns):
                raise ParameterError(
                    f"{path}: expected header {','.join(columns)}, got {reader.fieldnames}"
                )
            return [(reader.line_num, row) for row in reader]
    except OSError as e:
        raise ParameterError(f"cannot read {path}: {e.strerror or e}") from e


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_builtin(payload), indent=2) + "\n")
    logger.debug(f"Wrote {path}")
    return path


def write_distributions(path: Path, distributions: Sequence[DistributionVector]) -> Path:
    """Long format t,n,m,prob; one block per distribution."""

    def rows():
        for dist in distributions:
            for n, (m, prob) in enumerate(zip(dist.m, dist.probs)):
                yield dist.timestamp, n, m, prob

    return write_rows(path, DISTRIBUTION_COLUMNS, rows())


def read_distributions(path: Path) -> list[DistributionVector]:
    blocks: dict[float, list[float]] = {}
    for line, row in _read_rows(path, DISTRIBUTION_COLUMNS):
        try:
            t, n, prob = float(row["t"]), int(row["n"]), float(row["prob"])
        except ValueError as e:
            raise ParameterError(f"{path}:{line}: {e}") from e
        block = blocks.setdefault(t, [])
        if n != len(block):
            raise ParameterError(f"{path}:{line}: expected n={len(block)}, got {n}")
        block.append(prob)
    return [DistributionVector(probs=np.array(p), timestamp=t) for t, p in blocks.items()]


def write_trajectories(path: Path, trajectories: Sequence[SampledTrajectory]) -> Path:
    def rows():
        for traj_id, trajectory in enumerate(trajectories):
            m = order_parameter_grid(trajectory.N)
            for t, n in zip(trajectory.grid, trajectory.states):
                yield traj_id, t, n, m[n]

    return write_rows(path, TRAJECTORY_COLUMNS, rows())


def write_ensemble_stats(path: Path, stats: EnsembleStats) -> Path:
    return write_rows(path, ENSEMBLE_COLUMNS, zip(stats.grid, stats.mean, stats.variance))


def write_histogram(path: Path, stats: EnsembleStats) -> Path:
    m = order_parameter_grid(stats.N)

    def rows():
        for t, histogram in zip(stats.grid, stats.histograms):
            for n, freq in enumerate(histogram):
                yield t, n, m[n], freq

    return write_rows(path, HISTOGRAM_COLUMNS, rows())


def first_passage_payload(result: FirstPassageResult) -> dict[str, Any]:
    eq = result.equilibria
    return {
        "n_minus": eq.n_minus,
        "n_u": eq.n_u,
        "n_plus": eq.n_plus,
        "tau": result.tau,
        "tau_lr": result.tau_lr,
        "tau_rl": result.tau_rl,
        "phi_R": result.phi_R,
        "lambda2_approx": result.lambda2_approx,
    }


def write_first_passage(
    path: Path, result: FirstPassageResult, extra: dict[str, Any] | None = None
) -> Path:
    return write_json(path, {**first_passage_payload(result), **(extra or {})})


def calibration_payload(
    result: CalibrationResult, metrics: tuple[float, float] | None = None
) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "F": result.theta.F,
        "J": result.theta.J,
        "gamma": result.theta.gamma,
        "nll": result.nll,
    }
    if metrics is not None:
        payload["E_tot"], payload["f"] = metrics
    payload["seed"] = result.seed
    payload["evaluations"] = result.evaluations
    payload["history"] = result.history
    return payload


def write_calibration(
    path: Path, result: CalibrationResult, metrics: tuple[float, float] | None = None
) -> Path:
    return write_json(path, calibration_payload(result, metrics))


def read_sidecar(path: Path) -> dict[str, Any]:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as e:
        raise ParameterError(f"cannot read sidecar {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise ParameterError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ParameterError(f"{path}: sidecar must be a JSON object")
    unknown = set(payload) - SIDECAR_KEYS
    if unknown:
        raise ParameterError(f"{path}: unknown sidecar keys {sorted(unknown)}")
    if "N" not in payload:
        raise ParameterError(f"{path}: sidecar needs N")
    return payload


def read_dataset(csv_path: Path, sidecar_path: Path) -> Dataset:
    """Dataset from a traj_id,t,m CSV and its {N, beta, alpha} sidecar.

    Raises:
        ParameterError: Naming the offending line for malformed rows
    """
    sidecar = read_sidecar(sidecar_path)
    N = int(sidecar["N"])
    grouped: dict[str, tuple[list[float], list[int]]] = {}
    for line, row in _read_rows(csv_path, DATASET_COLUMNS):
        try:
            t = float(row["t"])
            (n,) = states_from_order_parameter([float(row["m"])], N, label=f"line {line}")
        except (ValueError, TypeError) as e:
            raise ParameterError(f"{csv_path}:{line}: {e}") from e
        times, states = grouped.setdefault(row["traj_id"], ([], []))
        if times and t < times[-1]:
            raise ParameterError(f"{csv_path}:{line}: time {t} precedes {times[-1]}")
        times.append(t)
        states.append(int(n))
    trajectories = tuple(
        Trajectory(times=np.array(times), states=np.array(states, dtype=int))
        for times, states in grouped.values()
    )
    logger.info(f"Read {len(trajectories)} trajectories from {csv_path}")
    return Dataset(
        N=N,
        trajectories=trajectories,
        beta=float(sidecar.get("beta", 1.0)),
        alpha=float(sidecar.get("alpha", 0.0)),
    )


def write_dataset(csv_path: Path, sidecar_path: Path, data: Dataset) -> tuple[Path, Path]:
    m = order_parameter_grid(data.N)

    def rows():
        for traj_id, trajectory in enumerate(data.trajectories):
            for t, n in zip(trajectory.times, trajectory.states):
                yield traj_id, t, m[n]

    write_rows(csv_path, DATASET_COLUMNS, rows())
    write_json(sidecar_path, {"N": data.N, "beta": data.beta, "alpha": data.alpha})
    return Path(csv_path), Path(sidecar_path)
