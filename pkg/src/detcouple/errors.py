"""Exception types shared across the package."""


class DetcoupleError(ValueError):
    """Base class for all library errors."""


class ValidationError(DetcoupleError):
    """A point or configuration violates a model-space constraint."""


class AdmissibilityError(DetcoupleError):
    """A (distance, derivative) pair lies outside the admissible band."""


class DegenerateStateError(DetcoupleError):
    """The coupled state is degenerate (coincident or antipodal points)."""
