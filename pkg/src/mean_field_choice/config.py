"""Run configuration parsed from a single JSON file.

Every section is a dataclass; unknown keys at any level raise ``ConfigError``.
"""

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .calibrate import ParamBounds, Theta
from .errors import ConfigError, ParameterError
from .model import ModelParams, RateFamily, params_from_json
from .simulate import BinomialStart, InitialState
from .spectral import ZeitgeistSchedule

logger = logging.getLogger(__name__)


def _build(cls, payload: Any, section: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"section '{section}' must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(sorted(unknown))}")
    try:
        return cls(**payload)
    except (TypeError, ParameterError) as e:
        raise ConfigError(f"invalid '{section}' section: {e}") from e


@dataclass(frozen=True)
class InitialConfig:
    n0: int | None = None
    p0: float | None = None

    def __post_init__(self) -> None:
        if (self.n0 is None) == (self.p0 is None):
            raise ConfigError("'initial' needs exactly one of n0 or p0")

    def to_state(self) -> InitialState:
        return BinomialStart(self.p0) if self.p0 is not None else int(self.n0)


@dataclass(frozen=True)
class ScheduleConfig:
    breakpoints: list[float]
    values: list[float]

    def to_schedule(self) -> ZeitgeistSchedule:
        return ZeitgeistSchedule(tuple(self.breakpoints), tuple(self.values))


@dataclass(frozen=True)
class SimulationConfig:
    t_max: float
    dt: float
    ensemble: int = 1


@dataclass(frozen=True)
class CalibrationConfig:
    data: str | None = None
    sidecar: str | None = None
    bounds: dict[str, list[float]] | None = None
    pop_size: int = 200
    steps: int = 200
    truth: dict[str, float] | None = None
    calibration_time: float | None = None
    max_points: int | None = None
    # Used when no data file is given: simulate trajectories from the model first.
    trajectories: int = 100
    points: int = 101
    t_max: float = 1000.0

    def param_bounds(self) -> ParamBounds:
        bounds = self.bounds or {}
        unknown = set(bounds) - {"F", "J", "gamma"}
        if unknown:
            raise ConfigError(f"unknown key(s) in 'calibration.bounds': {sorted(unknown)}")
        return ParamBounds(**{key: tuple(value) for key, value in bounds.items()})

    def true_theta(self) -> Theta | None:
        if self.truth is None:
            return None
        return _build(Theta, self.truth, "calibration.truth")


@dataclass(frozen=True)
class OutputConfig:
    steady: bool = False
    plot: bool = False


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    family: RateFamily
    times: list[float] = field(default_factory=list)
    initial: InitialConfig | None = None
    schedule: ScheduleConfig | None = None
    simulation: SimulationConfig | None = None
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int | None = None
    out: str = "results"
    base_dir: Path = field(default_factory=Path.cwd)

    def initial_state(self) -> InitialState:
        if self.initial is None:
            return self.params.N // 2
        return self.initial.to_state()

    def resolve(self, path: str) -> Path:
        """Paths in a config are relative to the config file."""
        candidate = Path(path)
        return candidate if candidate.is_absolute() else self.base_dir / candidate


_TOP_LEVEL = {
    "model", "times", "initial", "schedule", "simulation", "calibration", "output", "seed", "out",
}


def parse_config(payload: dict[str, Any], base_dir: Path | None = None) -> RunConfig:
    """Build a RunConfig from a decoded JSON object.

    Raises:
        ConfigError: On unknown keys or invalid values
    """
    unknown = set(payload) - _TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    if "model" not in payload:
        raise ConfigError("config needs a 'model' section")
    try:
        params, family = params_from_json(payload["model"])
    except ParameterError as e:
        raise ConfigError(f"invalid 'model' section: {e}") from e

    times = payload.get("times", [])
    if not isinstance(times, list) or any(not isinstance(t, (int, float)) for t in times):
        raise ConfigError("'times' must be a list of numbers")

    seed = payload.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0):
        raise ConfigError(f"'seed' must be a non-negative integer, got {seed!r}")

    config = RunConfig(
        params=params,
        family=family,
        times=[float(t) for t in times],
        initial=_build(InitialConfig, payload["initial"], "initial") if "initial" in payload else None,
        schedule=(
            _build(ScheduleConfig, payload["schedule"], "schedule") if "schedule" in payload else None
        ),
        simulation=(
            _build(SimulationConfig, payload["simulation"], "simulation")
            if "simulation" in payload
            else None
        ),
        calibration=_build(CalibrationConfig, payload.get("calibration", {}), "calibration"),
        output=_build(OutputConfig, payload.get("output", {}), "output"),
        seed=seed,
        out=str(payload.get("out", "results")),
        base_dir=base_dir if base_dir is not None else Path.cwd(),
    )
    return config


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(payload, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    logger.info(f"Loaded config {path}")
    return parse_config(payload, base_dir=path.parent)
