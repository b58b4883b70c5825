"""Exception types shared across the toolkit."""


class AvlocError(Exception):
    """Base class for all toolkit errors."""


class VocabularyError(AvlocError):
    """Unknown class name or malformed vocabulary."""


class ScopeError(AvlocError):
    """A class or option was requested outside the allowed scope."""


class DegenerateEmbeddingError(AvlocError):
    """Zero-norm or non-finite embedding row; upstream extraction failed."""


class ShapeError(AvlocError):
    """Array dimensions disagree with the declared configuration."""


class ContainerError(AvlocError):
    """Malformed or truncated embedding container file."""


class ManifestError(AvlocError):
    """Malformed manifest line or inconsistent entries."""


class SplitError(AvlocError):
    """Split constraints are infeasible for the given class counts."""


class TrainingError(AvlocError):
    """Invalid training configuration or training data."""


class EvaluationError(AvlocError):
    """Prediction and ground-truth sets cannot be compared."""
