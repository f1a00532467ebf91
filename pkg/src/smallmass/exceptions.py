"""Package-wide exception types."""


class SmallmassError(Exception):
    """Base class for all package errors."""


class ModelEvaluationError(SmallmassError):
    """Drift or diffusion returned a non-finite value at a named point."""


class StabilityError(SmallmassError):
    """A step size violated a scheme's stability precondition."""


class BlowupError(SmallmassError):
    """A trajectory became non-finite; carries chain/step location."""


class DomainError(SmallmassError):
    """A quadrature domain is unusable (underflow, non-integrability)."""


class ConfigError(SmallmassError):
    """Experiment configuration failed to parse or validate."""
