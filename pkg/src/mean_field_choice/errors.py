"""Exception hierarchy for the mean-field choice toolkit."""


class MeanFieldError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(MeanFieldError, ValueError):
    """Invalid model parameters, states, schedules or dataset rows."""


class ConfigError(MeanFieldError, ValueError):
    """Invalid or unknown keys in a run configuration."""


class ReducibleChainError(MeanFieldError):
    """A zero transition rate splits the birth-death chain."""


class NoPhaseTransitionError(MeanFieldError):
    """The interaction strength is zero, so no critical rationality exists."""


class NoMetastabilityError(MeanFieldError):
    """The steady state is monomodal, so there is nothing to escape from."""


class NumericalError(MeanFieldError):
    """A numerical consistency check failed beyond its tolerance."""


class UndefinedMetricError(MeanFieldError):
    """An error metric divides by a zero true parameter."""


# Exceptions surfaced by the CLI with exit code 2.
NUMERICAL_PRECONDITION_ERRORS = (
    ReducibleChainError,
    NoPhaseTransitionError,
    NoMetastabilityError,
    NumericalError,
)
