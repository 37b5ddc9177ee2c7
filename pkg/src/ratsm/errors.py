"""Exception types shared across the package."""


class InputError(ValueError):
    """Raised when inputs violate a documented precondition."""


class NumericalError(RuntimeError):
    """Raised when a linear-algebra step fails (singular or indefinite system)."""


class DivergenceError(NumericalError):
    """Raised when the Picard iteration blows up (stepsize too large)."""


class ConfigError(InputError):
    """Raised for malformed benchmark configuration."""
