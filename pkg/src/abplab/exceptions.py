"""Error types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside the admissible range or inconsistent."""


class DomainError(ValueError):
    """An input violates a mathematical precondition (e.g. log of a
    function that is not strictly positive)."""


class ConfigError(ValueError):
    """A run configuration failed schema validation."""


class NumericsError(RuntimeError):
    """A numerical guarantee (positivity, conservation) failed beyond
    roundoff tolerance."""


class StepSizeError(RuntimeError):
    """A time step produced values outside the stability envelope."""


class TruncationError(RuntimeError):
    """Mass leaked against a truncated boundary beyond tolerance."""


class FitError(ValueError):
    """A regression was requested on data it cannot be applied to."""


class FlowAborted(RuntimeError):
    """A time-stepping loop hit a step failure partway through.

    Carries the last good state and the partial trace so callers can
    persist them before reporting the underlying cause.
    """

    def __init__(self, message, state=None, trace=None, cause=None):
        super().__init__(message)
        self.state = state
        self.trace = trace
        self.cause = cause
