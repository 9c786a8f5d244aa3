"""Bridge from scikit-learn forest classifiers to the treegrate model format."""

from .export import (
    ExportedModel,
    ExportError,
    UnsupportedModelError,
    export_forest,
    narrow_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "ExportedModel",
    "ExportError",
    "UnsupportedModelError",
    "export_forest",
    "narrow_threshold",
    "__version__",
]
