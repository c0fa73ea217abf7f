"""Exception hierarchy shared across the package."""


class PtspecError(Exception):
    """Base class for all package errors."""


class ContractionError(PtspecError):
    """Tensor legs cannot be paired (dimension or index mismatch)."""


class NumericError(PtspecError):
    """Non-finite input or a linear-algebra routine failed."""


class IntegrationError(PtspecError):
    """A quadrature did not converge to the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ValidationError(PtspecError):
    """An operator/state failed a structural precondition."""


class ScheduleError(PtspecError):
    """An intervention schedule violates time ordering or grid bounds."""


class ConfigError(PtspecError):
    """A run configuration is malformed."""


class PtFileError(PtspecError):
    """A process-tensor file is corrupt, truncated or version-mismatched."""


class ResourceError(PtspecError):
    """A computation exceeded its configured resource budget."""

    def __init__(self, message, peak_bond_dim=None):
        super().__init__(message)
        self.peak_bond_dim = peak_bond_dim
