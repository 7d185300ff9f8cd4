"""Model exports."""

from .documents import (
    ExperimentConfig,
    KatokSpec,
    MapDocument,
    NumericParams,
    ProfileSpec,
    ShearSpec,
    SkewSpec,
)
from .report import Report, ResultBlock

__all__ = [
    "ExperimentConfig",
    "KatokSpec",
    "MapDocument",
    "NumericParams",
    "ProfileSpec",
    "ShearSpec",
    "SkewSpec",
    "Report",
    "ResultBlock",
]
