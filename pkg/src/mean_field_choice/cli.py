"""Command-line frontend: one subcommand per solver, one JSON config per run."""

import argparse
import logging
import os
import sys
from collections.abc import Callable
from dataclasses import replace
from pathlib import Path

from .calibrate import calibrate, error_metrics, simulate_dataset
from .config import RunConfig, load_config
from .errors import (
    NUMERICAL_PRECONDITION_ERRORS,
    ConfigError,
    NoMetastabilityError,
    NoPhaseTransitionError,
    ParameterError,
    UndefinedMetricError,
)
from .formats import (
    read_dataset,
    write_calibration,
    write_dataset,
    write_distributions,
    write_ensemble_stats,
    write_first_passage,
    write_histogram,
    write_json,
    write_rows,
    write_trajectories,
)
from .metastability import analyze_metastability, find_equilibria, fixation_curve
from .model import critical_rationality, mean_field_equilibria
from .session import ModelSession, get_model_session
from .simulate import ensemble_stats, sample_ensemble, sample_piecewise_ensemble
from .spectral import DistributionVector, binomial_initial, evolve_piecewise, point_mass
from .tools.solver import spectrum_summary

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

COMMANDS = ("solve", "steady", "simulate", "metastability", "calibrate", "equilibria", "spectrum")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _initial_distribution(config: RunConfig) -> DistributionVector:
    N = config.params.N
    if config.initial is not None and config.initial.p0 is not None:
        return binomial_initial(N, config.initial.p0)
    return point_mass(N, int(config.initial_state()))


def cmd_solve(config: RunConfig, session: ModelSession, out: Path) -> list[Path]:
    """Exact distributions at the configured times."""
    if not config.times:
        raise ConfigError("'solve' needs a non-empty 'times' list")
    q0 = _initial_distribution(config)
    if config.schedule is not None:
        schedule = config.schedule.to_schedule()
        distributions = [
            evolve_piecewise(schedule, config.params, config.family, q0, t) for t in config.times
        ]
    else:
        distributions = [session.propagate(q0, t) for t in config.times]
    for dist in distributions:
        logger.info(
            f"t={dist.timestamp:g}: <n>={dist.mean():.4f}, var={dist.variance():.4f} via {dist.method}"
        )

    written = [write_distributions(out / "distribution.csv", distributions)]
    if config.output.steady:
        written.append(write_distributions(out / "steady.csv", [session.steady]))
    if config.output.plot:
        from .plotting import plot_distributions

        written.append(plot_distributions(out / "evolution.svg", distributions))
    return written


def cmd_steady(config: RunConfig, session: ModelSession, out: Path) -> list[Path]:
    steady = session.steady
    written = [write_distributions(out / "steady.csv", [steady])]
    if config.output.plot:
        from .plotting import plot_distributions

        written.append(plot_distributions(out / "steady.svg", [steady]))
    return written


def cmd_simulate(config: RunConfig, session: ModelSession, out: Path) -> list[Path]:
    """SSA ensemble: every trajectory, per-time moments and histograms."""
    sim = config.simulation
    if sim is None:
        raise ConfigError("'simulate' needs a 'simulation' section")
    init = config.initial_state()
    if config.schedule is not None:
        trajectories = sample_piecewise_ensemble(
            config.schedule.to_schedule(),
            config.params,
            config.family,
            init,
            sim.t_max,
            sim.dt,
            sim.ensemble,
            seed=config.seed,
        )
    else:
        trajectories = sample_ensemble(
            session.rates, init, sim.t_max, sim.dt, sim.ensemble, seed=config.seed
        )
    stats = ensemble_stats(trajectories)
    logger.info(f"Final ensemble mean n={stats.mean[-1]:.3f}, variance={stats.variance[-1]:.3f}")

    written = [
        write_trajectories(out / "trajectories.csv", trajectories),
        write_ensemble_stats(out / "ensemble_stats.csv", stats),
        write_histogram(out / "histogram.csv", stats),
    ]
    if config.output.plot:
        from .plotting import plot_trajectories

        written.append(plot_trajectories(out / "trajectories.svg", trajectories))
    return written


def cmd_metastability(config: RunConfig, session: ModelSession, out: Path) -> list[Path]:
    """Exact first-passage analysis next to the spectral relaxation time."""
    result = analyze_metastability(session.rates, session.steady)
    eq = result.equilibria
    spectral = session.spectrum.relaxation_time
    approx = result.relaxation_time
    logger.info(f"1/lambda_2: spectral {spectral:.6g}, first-passage {approx:.6g}")

    fixation = fixation_curve(session.rates, eq.n_minus, eq.n_plus)
    m = session.steady.m
    written = [
        write_first_passage(
            out / "fpt.json",
            result,
            extra={
                "lambda2_inv_spectral": spectral,
                "lambda2_inv_approx": approx,
                "ratio": approx / spectral,
            },
        ),
        write_rows(
            out / "tau_curve.csv",
            ["n", "m", "tau"],
            ((n, m[n], tau) for n, tau in enumerate(result.tau)),
        ),
        write_rows(
            out / "fixation_curve.csv",
            ["n", "m", "phi"],
            ((n, m[n], phi) for n, phi in zip(range(eq.n_minus, eq.n_plus + 1), fixation)),
        ),
    ]
    if config.output.plot:
        from .plotting import plot_first_passage

        written.append(
            plot_first_passage(
                out / "first_passage.svg", result.tau, fixation, eq.n_minus, eq.n_u, eq.n_plus
            )
        )
    return written


def cmd_calibrate(config: RunConfig, session: ModelSession, out: Path) -> list[Path]:
    """Fit (F, J, gamma) to a dataset file, or to trajectories simulated from the model."""
    cal = config.calibration
    written: list[Path] = []
    if cal.data is not None:
        data_path = config.resolve(cal.data)
        sidecar = config.resolve(cal.sidecar) if cal.sidecar else data_path.with_suffix(".json")
        data = read_dataset(data_path, sidecar)
    else:
        data = simulate_dataset(
            config.params,
            config.family,
            config.initial_state(),
            cal.t_max,
            cal.points,
            cal.trajectories,
            seed=config.seed,
        )
        written.extend(write_dataset(out / "dataset.csv", out / "dataset.json", data))
    if cal.calibration_time is not None:
        data = data.truncate(cal.calibration_time)
    if cal.max_points is not None:
        data = data.thin(cal.max_points)

    result = calibrate(
        data,
        cal.param_bounds(),
        pop_size=cal.pop_size,
        steps=cal.steps,
        seed=config.seed,
        family=config.family,
    )
    truth = cal.true_theta()
    metrics = error_metrics(truth, result.theta) if truth is not None else None
    if metrics is not None:
        logger.info(f"E_tot={metrics[0]:.4f}, f={metrics[1]:.4f}")
    written.append(write_calibration(out / "calibration.json", result, metrics))
    return written


def cmd_equilibria(config: RunConfig, session: ModelSession, out: Path) -> list[Path]:
    """Mean-field roots and the number of steady-state modes."""
    params = config.params
    roots = mean_field_equilibria(params)
    try:
        beta_c = critical_rationality(params)
    except NoPhaseTransitionError:
        beta_c = None
    try:
        find_equilibria(session.steady)
        modes = 2
    except NoMetastabilityError:
        modes = 1
    logger.info(f"{roots.count} mean-field root(s), {modes} steady-state mode(s)")
    payload = {
        "beta": params.beta,
        "beta_c": beta_c,
        "count": roots.count,
        "roots": [{"m": root.m, "stable": root.stable} for root in roots.roots],
        "steady_modes": modes,
    }
    return [write_json(out / "equilibria.json", payload)]


def cmd_spectrum(config: RunConfig, session: ModelSession, out: Path) -> list[Path]:
    eigenvalues = session.spectrum.eigenvalues
    rows = (
        (index, value, -1.0 / value if value < 0 else float("inf"))
        for index, value in enumerate(eigenvalues, start=1)
    )
    return [
        write_rows(out / "spectrum.csv", ["index", "eigenvalue", "relaxation_time"], rows),
        write_json(out / "spectrum.json", spectrum_summary(session)),
    ]


HANDLERS: dict[str, Callable[[RunConfig, ModelSession, Path], list[Path]]] = {
    "solve": cmd_solve,
    "steady": cmd_steady,
    "simulate": cmd_simulate,
    "metastability": cmd_metastability,
    "calibrate": cmd_calibrate,
    "equilibria": cmd_equilibria,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mean-field-choice",
        description="Master-equation solver, SSA and calibration for binary mean-field choice.",
    )
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=HANDLERS[name].__doc__)
        sub.add_argument("--config", required=True, type=Path, help="JSON run configuration")
        sub.add_argument("--out", help="Output directory (overrides config 'out')")
        sub.add_argument("--seed", type=int, help="Master seed (overrides config 'seed')")
        sub.add_argument("--plot", action="store_true", help="Also write SVG plots")
    subparsers.add_parser("serve", help="Run the MCP tool server over stdio")
    return parser


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Command-line flags win over config values."""
    changes = {}
    if args.out is not None:
        changes["out"] = args.out
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be non-negative, got {args.seed}")
        changes["seed"] = args.seed
    if args.plot:
        changes["output"] = replace(config.output, plot=True)
    return replace(config, **changes) if changes else config


def _configure_logging(verbose: bool) -> None:
    level = "DEBUG" if verbose else os.getenv("MEAN_FIELD_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    if args.command == "serve":
        from .server import mcp

        logger.info("Starting mean-field choice MCP server in stdio mode")
        mcp.run(transport="stdio")
        return EXIT_OK

    try:
        config = apply_overrides(load_config(args.config), args)
        session = get_model_session(config.params, config.family)
        out = Path(config.out)
        written = HANDLERS[args.command](config, session, out)
    except (ConfigError, ParameterError, UndefinedMetricError) as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_PRECONDITION_ERRORS as e:
        logger.error(f"{args.command}: {type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    for path in written:
        print(path)
    return EXIT_OK
