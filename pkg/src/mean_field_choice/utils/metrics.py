"""Distribution distances and moments."""

import numpy as np


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Half the L1 distance between two probability vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def distribution_moments(probs: np.ndarray) -> tuple[float, float]:
    """Mean and variance of n under a distribution over 0..N.

    Args:
        probs: Probability of each state n

    Returns:
        Tuple of (mean, variance)
    """
    probs = np.asarray(probs, dtype=float)
    n = np.arange(len(probs))
    mean = float(np.dot(n, probs))
    variance = float(np.dot((n - mean) ** 2, probs))
    return mean, variance


def mode_masses(probs: np.ndarray, n_u: int) -> tuple[float, float]:
    """Mass strictly left and strictly right of state n_u."""
    probs = np.asarray(probs, dtype=float)
    return float(probs[:n_u].sum()), float(probs[n_u + 1 :].sum())
