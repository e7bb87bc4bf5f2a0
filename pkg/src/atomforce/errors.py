"""Exception types raised by the solver stack."""


class AtomForceError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(AtomForceError, ValueError):
    pass


class NumericalInstabilityError(AtomForceError):
    """Time-domain integration left the Bloch ball (step too large)."""


class SingularAssemblyError(AtomForceError):
    pass


class ConvergenceError(AtomForceError):
    """Truncated harmonic-balance solve did not converge before ``K_max``.

    ``history`` holds ``(K, residual, edge)`` tuples for every truncation tried.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class ConsistencyError(AtomForceError):
    pass


class ContinuedFractionError(AtomForceError):
    def __init__(self, message, last=None, previous=None):
        super().__init__(message)
        self.last = last
        self.previous = previous


class RecurrenceInstabilityError(AtomForceError):
    pass


class OutOfWindowError(AtomForceError, IndexError):
    pass


class UnsupportedError(AtomForceError):
    pass


class ConfigError(InvalidArgumentError):
    """Invalid configuration document; ``key`` is the offending key path."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
