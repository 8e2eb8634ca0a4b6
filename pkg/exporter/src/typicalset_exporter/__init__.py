"""Export penultimate pre-activation features from vision classifiers as
feature dumps consumable by the typicalset tooling."""

__version__ = "0.1.0"

from .dump_format import write_feature_dump
from .export import ExportJob, discover_images, export_features, reference_logits
from .tail import UnsupportedArchitectureError, find_tail

__all__ = [
    "ExportJob",
    "UnsupportedArchitectureError",
    "discover_images",
    "export_features",
    "find_tail",
    "reference_logits",
    "write_feature_dump",
]
