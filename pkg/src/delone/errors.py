"""Exception types shared across the library."""


class DeloneError(Exception):
    """Base class for all library errors."""


class DegenerateError(DeloneError):
    """A linear system or point configuration is degenerate beyond the
    scale-relative floor (affinely dependent points, singular matrix)."""


class InvalidBudgetError(DeloneError):
    """A perturbation budget violates its preconditions (ordering of the
    scale constants, or the robustness recursion hit a nonpositive value)."""


class OutOfChartError(DeloneError):
    """Points exceed the injectivity/convexity radius of the metric chart."""


class IllConditionedError(DeloneError):
    """An almost-orthonormal frame is too far from orthonormal to correct."""


class RegionExhaustedError(DeloneError):
    """No candidate ball remains: the net covers the region (termination)."""


class SelectionFailedError(DeloneError):
    """Rejection sampling and the fallback grid scan both failed to find an
    allowed point.  Must not occur when the excluded volume is audited."""


class CoverageGapError(DeloneError):
    """A sample of the region lies outside every simplicial cone."""


class ValidationError(DeloneError):
    """A loaded artifact violates its schema or type invariants."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class UnsupportedDimError(DeloneError):
    """The operation is only available in a specific ambient dimension."""
