"""Exception hierarchy shared across the package."""


class CoagSourceError(Exception):
    """Base class for all package errors."""


class KernelValidationError(CoagSourceError):
    """Kernel parameters outside the accepted (non-gelling) family."""


class KernelRangeError(CoagSourceError):
    """Kernel evaluation produced a non-finite value."""


class RegimeError(CoagSourceError):
    """Regime query asked for something the regime's laws do not define."""


class ConfigError(CoagSourceError):
    """Malformed run configuration.

    Carries the 1-based line number of the offending config line when the
    error originates from a config file.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IntegratorError(CoagSourceError):
    """Time integration failed; ``t_reached`` holds the last accepted time."""

    def __init__(self, message, t_reached=None):
        self.t_reached = t_reached
        if t_reached is not None:
            message = f"{message} (reached t = {t_reached!r})"
        super().__init__(message)


class DivergenceError(CoagSourceError):
    """A requested integral or asymptotic quantity is divergent."""


class InsufficientDataError(CoagSourceError):
    """Not enough points (or range) to perform the requested fit."""
