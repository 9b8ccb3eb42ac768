"""Optional SVG plots of distributions, trajectories and first-passage curves.

matplotlib is imported lazily with the Agg backend so headless runs and
commands without ``--plot`` never touch it.
"""

import logging
import os
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .model import order_parameter_grid
from .simulate import Trajectory
from .spectral import DistributionVector

logger = logging.getLogger(__name__)


def _pyplot():
    os.environ.setdefault("MPLCONFIGDIR", "/tmp/mplconfig")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # Stable element ids keep re-rendered SVGs byte-identical.
    matplotlib.rcParams["svg.hashsalt"] = "mean-field-choice"
    return plt


def _save(fig, path: Path) -> Path:
    plt = _pyplot()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote plot {path}")
    return path


def plot_distributions(path: Path, distributions: Sequence[DistributionVector]) -> Path:
    """Bar series over m, one per time."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if distributions:
        width = 2.0 / distributions[0].N
        for dist in distributions:
            label = "steady" if np.isinf(dist.timestamp) else f"t = {dist.timestamp:g}"
            ax.bar(dist.m, dist.probs, width=width, alpha=0.55, label=label)
        ax.legend(loc="upper center", fontsize=9)
    ax.set_xlabel("m")
    ax.set_ylabel("P(m, t)")
    ax.set_xlim(-1.05, 1.05)
    ax.grid(True, axis="y", alpha=0.25)
    return _save(fig, path)


def plot_trajectories(path: Path, trajectories: Sequence[Trajectory], limit: int = 20) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for index, trajectory in enumerate(trajectories[:limit]):
        ax.step(trajectory.grid, trajectory.m, where="post", linewidth=0.9, label=f"#{index}")
    if 0 < len(trajectories) <= 10:
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("m")
    ax.set_ylim(-1.05, 1.05)
    ax.grid(True, alpha=0.25)
    return _save(fig, path)


def plot_first_passage(
    path: Path, tau: np.ndarray, fixation: np.ndarray, n_minus: int, n_u: int, n_plus: int
) -> Path:
    """Mean first-passage times to n_u and the fixation curve, side by side."""
    plt = _pyplot()
    N = len(tau) - 1
    m = order_parameter_grid(N)
    fig, (ax_tau, ax_fix) = plt.subplots(1, 2, figsize=(11, 4.5))

    ax_tau.semilogy(m[tau > 0], tau[tau > 0], marker=".", linewidth=1.0)
    ax_tau.axvline(m[n_u], color="gray", linestyle="--", linewidth=1.0, label="unstable")
    ax_tau.set_xlabel("m")
    ax_tau.set_ylabel("mean first-passage time")
    ax_tau.legend(loc="best", fontsize=9)
    ax_tau.grid(True, alpha=0.25)

    ax_fix.plot(m[n_minus : n_plus + 1], fixation, marker=".", linewidth=1.0)
    ax_fix.axvline(m[n_u], color="gray", linestyle="--", linewidth=1.0)
    ax_fix.set_xlabel("m")
    ax_fix.set_ylabel("fixation probability")
    ax_fix.set_ylim(-0.05, 1.05)
    ax_fix.grid(True, alpha=0.25)
    return _save(fig, path)
