"""Exception types shared across the package."""


class MalformedInputError(ValueError):
    """Input does not have the required shape or sign structure."""


class DomainError(ValueError):
    """Input is well formed but outside the domain of the operation."""


class ToleranceError(ValueError):
    """A numeric consistency check failed at the requested tolerance."""


class ChartError(DomainError):
    """A point left the coordinate chart used for fiber frames."""


class UnattainableError(DomainError):
    """The requested holonomy element is not produced by any loop."""


class NonCauchyWarning(RuntimeWarning):
    """A sequence of distance matrices did not settle within tolerance."""


class EmptyLiftWarning(RuntimeWarning):
    """A discrete horizontal-lift search returned no endpoints."""
