"""Exception types shared across the package."""


class LatticeMFError(Exception):
    """Base class for all package errors."""


class ConfigError(LatticeMFError):
    """Invalid experiment configuration.  Carries the offending field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class GeometryError(LatticeMFError):
    """Supports or translates leave the working box."""


class ResourceLimitError(LatticeMFError):
    """A site/mode/dimension cap would be exceeded."""


class NonConvergenceError(LatticeMFError):
    """Picard iteration did not reach the tolerance.

    The time interval is too long for the contraction; callers should
    subdivide via the flow (reverse-cocycle) property.
    """

    def __init__(self, message, defect, iterations):
        self.defect = defect
        self.iterations = iterations
        super().__init__(message)


class IntegratorError(LatticeMFError):
    """Unitarity drift beyond tolerance after re-unitarization."""
