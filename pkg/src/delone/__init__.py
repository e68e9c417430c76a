"""Voronoi/Delaunay machinery over Delone point sets: construction in model
geometries, net synthesis by forbidden-region exclusion, and certification of
combinatorial stability under bounded perturbations and near-isometric
translation families."""

__version__ = "0.1.0"

from .errors import (
    CoverageGapError,
    DegenerateError,
    DeloneError,
    IllConditionedError,
    InvalidBudgetError,
    OutOfChartError,
    RegionExhaustedError,
    SelectionFailedError,
    UnsupportedDimError,
    ValidationError,
)

__all__ = [
    "CoverageGapError",
    "DegenerateError",
    "DeloneError",
    "IllConditionedError",
    "InvalidBudgetError",
    "OutOfChartError",
    "RegionExhaustedError",
    "SelectionFailedError",
    "UnsupportedDimError",
    "ValidationError",
    "__version__",
]
