"""Exception types shared across the package."""


class FlowseedError(Exception):
    """Base class for all package-specific errors."""


class MagicMismatch(FlowseedError):
    """File does not start with the .flo sanity value."""


class TruncatedFile(FlowseedError):
    """Flow file payload is shorter than its header promises."""


class NonFiniteFlow(FlowseedError):
    """Flow field contains NaN or Inf values."""


class UnsupportedFormat(FlowseedError):
    """Raster file is not in an accepted mode or layout."""


class DimensionMismatch(FlowseedError):
    """Inputs that must share a shape do not."""


class ClassMismatch(FlowseedError):
    """Inputs that must share a class id do not."""


class EmptyInput(FlowseedError):
    """An operation requiring at least one element got none."""


class LengthMismatch(FlowseedError):
    """Sequence lengths are inconsistent, e.g. flows vs. masks."""


class MissingScores(FlowseedError):
    """Score-based conflict resolution requested without per-class scores."""


class IgnoreInPrediction(FlowseedError):
    """A predicted label map contains the ignore label."""


class EmptyMatrix(FlowseedError):
    """Confusion matrix holds no evaluated pixels."""


class InvalidSpec(FlowseedError):
    """Synthetic scene specification violates its constraints."""


class ConfigError(FlowseedError):
    """Bad or inconsistent configuration or manifest."""
