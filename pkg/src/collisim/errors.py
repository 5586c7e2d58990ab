"""Exception hierarchy."""


class CollisimError(Exception):
    """Base class for all library errors."""


class ValidationError(CollisimError, ValueError):
    """An input violates a physical or structural invariant."""


class DimensionError(ValidationError):
    """Shapes or subsystem dimensions do not match."""


class CapExceededError(CollisimError):
    """A dense object would exceed the configured size cap."""


class ConvergenceError(CollisimError, ArithmeticError):
    """An iterative routine failed to converge."""


class InfiniteCorrelationLengthError(CollisimError):
    """The transfer matrix has a degenerate or non-decaying unit-modulus spectrum."""


class HypothesisError(CollisimError):
    """A precondition of the stroboscopic construction does not hold."""


class IntegrationError(CollisimError):
    """Fixed-step integration became unstable."""


class ScenarioParseError(CollisimError):
    """A scenario file cannot be parsed or lacks a required field."""
