"""Mean-field choice MCP server with category-based tool filtering."""

import logging
import os
from typing import Any

from mcp.server.fastmcp import FastMCP

from .model import params_from_json
from .session import ModelSession, get_model_session
from .tool_categories import is_tool_enabled
from .tools import calibration, metastability, simulation, solver

logger = logging.getLogger(__name__)

# Get enabled categories from environment variable
ENABLED_CATEGORIES = os.getenv("MCP_TOOL_CATEGORIES", "all")
logger.info(f"MCP Tool Categories: {ENABLED_CATEGORIES}")

mcp = FastMCP("mean-field-choice")


def create_session(
    F: float,
    J: float,
    N: int,
    alpha: float = 0.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    family: str = "logit",
    epsilon: float | None = None,
    mu: float | None = None,
) -> ModelSession:
    """Create a solver session from flat tool arguments."""
    payload: dict[str, Any] = {
        "F": F, "J": J, "N": N, "alpha": alpha, "beta": beta, "gamma": gamma, "family": family,
    }
    if epsilon is not None:
        payload["epsilon"] = epsilon
    if mu is not None:
        payload["mu"] = mu
    params, rate_family = params_from_json(payload)
    return get_model_session(params, rate_family)


def register_tool(tool_name: str):
    """Decorator to conditionally register tools based on enabled categories."""
    def decorator(func):
        if is_tool_enabled(tool_name, ENABLED_CATEGORIES):
            return mcp.tool()(func)
        return func
    return decorator


# ============================================================================
# SOLVE TOOLS
# ============================================================================

@register_tool("solve_distribution")
def solve_distribution(
    F: float,
    J: float,
    N: int,
    times: list[float],
    alpha: float = 0.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    family: str = "logit",
    n0: int | None = None,
    p0: float | None = None,
) -> dict[str, Any]:
    """Exact time-dependent distribution of the number of right-deciding agents.

    Args:
        F: Zeitgeist (external field)
        J: Interaction strength
        N: Number of agents
        times: Times at which to evaluate the distribution
        alpha: Altruism (0 selfish, 1 fully altruistic)
        beta: Rationality
        gamma: Decision rate
        family: Rate family, "logit" or "arrhenius"
        n0: Initial number of right-deciders (default: N // 2)
        p0: Binomial initial condition, overrides n0 when given

    Returns:
        Dictionary with one row per (t, n)
    """
    session = create_session(F, J, N, alpha, beta, gamma, family)
    return solver.solve_distribution(session, times, n0, p0)


@register_tool("steady_state_distribution")
def steady_state_distribution(
    F: float,
    J: float,
    N: int,
    alpha: float = 0.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    family: str = "logit",
) -> dict[str, Any]:
    """Stationary distribution of the decision chain.

    Args:
        F: Zeitgeist (external field)
        J: Interaction strength
        N: Number of agents
        alpha: Altruism
        beta: Rationality
        gamma: Decision rate
        family: Rate family, "logit" or "arrhenius"

    Returns:
        Dictionary with one row per state n
    """
    session = create_session(F, J, N, alpha, beta, gamma, family)
    return solver.steady_state_distribution(session)


@register_tool("master_spectrum")
def master_spectrum(
    F: float,
    J: float,
    N: int,
    alpha: float = 0.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    family: str = "logit",
    count: int = 10,
) -> dict[str, Any]:
    """Leading eigenvalues of the master operator.

    Args:
        F: Zeitgeist (external field)
        J: Interaction strength
        N: Number of agents
        alpha: Altruism
        beta: Rationality
        gamma: Decision rate
        family: Rate family, "logit" or "arrhenius"
        count: Number of eigenvalues to return (default: 10)

    Returns:
        Dictionary with eigenvalues and relaxation times
    """
    session = create_session(F, J, N, alpha, beta, gamma, family)
    return solver.master_spectrum(session, count)


# ============================================================================
# METASTABILITY TOOLS
# ============================================================================

@register_tool("equilibria")
def equilibria(
    F: float,
    J: float,
    N: int,
    alpha: float = 0.0,
    beta: float = 1.0,
) -> dict[str, Any]:
    """Mean-field equilibria and their stability.

    Args:
        F: Zeitgeist (external field)
        J: Interaction strength
        N: Number of agents
        alpha: Altruism
        beta: Rationality

    Returns:
        Dictionary with one row per equilibrium
    """
    session = create_session(F, J, N, alpha, beta)
    return metastability.equilibria(session)


@register_tool("metastability_analysis")
def metastability_analysis(
    F: float,
    J: float,
    N: int,
    alpha: float = 0.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    family: str = "logit",
) -> dict[str, Any]:
    """Exact first-passage analysis of the bistable regime.

    Args:
        F: Zeitgeist (external field)
        J: Interaction strength
        N: Number of agents
        alpha: Altruism
        beta: Rationality
        gamma: Decision rate
        family: Rate family, "logit" or "arrhenius"

    Returns:
        Dictionary with per-state escape times, fixation probabilities and a summary
    """
    session = create_session(F, J, N, alpha, beta, gamma, family)
    return metastability.metastability_analysis(session)


# ============================================================================
# SIMULATION TOOLS
# ============================================================================

@register_tool("simulate_ensemble")
def simulate_ensemble(
    F: float,
    J: float,
    N: int,
    t_max: float,
    dt: float,
    ensemble: int = 100,
    alpha: float = 0.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    family: str = "logit",
    n0: int | None = None,
    p0: float | None = None,
    seed: int | None = None,
) -> dict[str, Any]:
    """Ensemble statistics of exact stochastic simulations.

    Args:
        F: Zeitgeist (external field)
        J: Interaction strength
        N: Number of agents
        t_max: Final time, a whole number of dt steps
        dt: Recording interval
        ensemble: Number of trajectories (default: 100)
        alpha: Altruism
        beta: Rationality
        gamma: Decision rate
        family: Rate family, "logit" or "arrhenius"
        n0: Initial number of right-deciders (default: N // 2)
        p0: Binomial initial condition, overrides n0 when given
        seed: Master seed for reproducible ensembles (optional)

    Returns:
        Dictionary with ensemble mean and variance per grid time
    """
    session = create_session(F, J, N, alpha, beta, gamma, family)
    return simulation.simulate_ensemble(session, t_max, dt, ensemble, n0, p0, seed)


# ============================================================================
# CALIBRATION TOOLS
# ============================================================================

@register_tool("calibrate_dataset")
def calibrate_dataset(
    N: int,
    observations: list[dict[str, Any]],
    bounds: dict[str, list[float]] | None = None,
    pop_size: int = 50,
    steps: int = 50,
    seed: int | None = None,
    truth: dict[str, float] | None = None,
) -> dict[str, Any]:
    """Maximum-likelihood (F, J, gamma) from observed order-parameter trajectories.

    Args:
        N: Number of agents
        observations: Rows with keys traj_id, t and m
        bounds: Search ranges keyed by F, J, gamma (optional)
        pop_size: Differential-evolution population (default: 50)
        steps: Differential-evolution generations (default: 50)
        seed: Seed for a reproducible search (optional)
        truth: Known (F, J, gamma) to report error metrics against (optional)

    Returns:
        Dictionary with the best-found parameters and likelihood
    """
    return calibration.calibrate_dataset(N, observations, bounds, pop_size, steps, seed, truth)
