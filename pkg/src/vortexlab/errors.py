"""Exception and warning taxonomy shared by all modules."""


class DomainError(ValueError):
    """Input outside the mathematical/physical domain of an operation."""


class CapabilityError(ValueError):
    """Request outside the implemented range (index caps, missing closed form)."""


class QuadratureError(RuntimeError):
    """A quadrature failed to reach its requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SchemaError(ValueError):
    """Config validation failure; carries the offending field path."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericsWarning(UserWarning):
    """A numeric estimate is returned but did not meet the requested tolerance."""


class ResolutionWarning(UserWarning):
    """A sampled grid may be under-resolved (norm unstable under refinement)."""
