"""Model Session Module.

Caches the objects every solver call needs for one parameter set:
- Rate table of the birth-death chain
- Kirchhoff steady state
- Spectrum of the master operator
"""

import logging
from functools import cached_property

import numpy as np

from .model import Arrhenius, Kirman, Logit, ModelParams, RateFamily, RateTable, build_rate_table
from .spectral import (
    DistributionVector,
    MasterOperator,
    Spectrum,
    build_master_operator,
    compute_spectrum,
    evolve,
    propagator,
    steady_state,
    transition_probability,
)

logger = logging.getLogger(__name__)


class ModelSession:
    """Solver context for one (ModelParams, RateFamily) pair."""

    def __init__(self, params: ModelParams, family: RateFamily) -> None:
        self.params = params
        self.family = family

    @cached_property
    def rates(self) -> RateTable:
        return build_rate_table(self.params, self.family)

    @cached_property
    def operator(self) -> MasterOperator:
        return build_master_operator(self.rates)

    @cached_property
    def steady(self) -> DistributionVector:
        return steady_state(self.rates)

    @cached_property
    def spectrum(self) -> Spectrum:
        return compute_spectrum(self.operator, self.steady)

    def propagate(self, q0: DistributionVector, t: float) -> DistributionVector:
        return evolve(self.rates, self.spectrum, q0, t)

    def transition(self, n0: int, t: float) -> DistributionVector:
        return transition_probability(self.rates, self.spectrum, n0, t)

    def propagator(self, t: float) -> np.ndarray:
        return propagator(self.rates, self.spectrum, t)


def get_model_session(params: ModelParams, family: RateFamily | None = None) -> ModelSession:
    """Create a solver session with the requested rate family.

    Args:
        params: Model parameters
        family: Rate family (default: logit)

    Returns:
        ModelSession: Session with lazily built rates, steady state and spectrum
    """
    family = family if family is not None else Logit()
    if isinstance(family, Logit):
        logger.info(f"Creating model session with logit rates (N={params.N})")
    elif isinstance(family, Arrhenius):
        logger.info(f"Creating model session with Arrhenius rates (N={params.N})")
    elif isinstance(family, Kirman):
        logger.info(
            f"Creating model session with Kirman rates "
            f"(epsilon={family.epsilon}, mu={family.mu}, N={params.N})"
        )
    return ModelSession(params, family)
