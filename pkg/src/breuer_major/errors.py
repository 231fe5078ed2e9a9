"""Exception hierarchy. The CLI maps each class to an exit code."""


class BreuerMajorError(Exception):
    exit_code = 1


class ConfigError(BreuerMajorError, ValueError):
    """Malformed model, function or experiment description."""

    exit_code = 2


class ConditionError(BreuerMajorError, ValueError):
    """A hypothesis of the limit theorem fails (summability, n <= K, ...)."""

    exit_code = 2


class CapExceededError(BreuerMajorError):
    """Requested instance exceeds a desk-scale size cap."""

    exit_code = 4


class NumericalError(BreuerMajorError):
    """A numerical procedure failed its own accuracy check."""

    exit_code = 4


class QuadratureError(NumericalError):
    """Hermite coefficients did not stabilise under node doubling."""


class RankUndeterminedError(QuadratureError):
    pass
