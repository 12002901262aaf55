"""Exception types shared across the package."""


class AugmentationError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(AugmentationError, ValueError):
    """A parameter lies outside its documented domain."""


class InvalidInputError(AugmentationError, ValueError):
    """Inputs violate a structural precondition, e.g. a shape mismatch."""


class DataError(AugmentationError):
    """Input data contains values the current configuration cannot handle."""
