"""Metadata-based malicious package detection with manipulation-resistant features."""

__version__ = "0.1.0"

from .catalog import FEATURE_SETS, FeatureCatalog, FeatureDescriptor, catalog, default_grouping, subset
from .features import FeatureMatrix, ccs, extract, extract_matrix
from .pmi import LabeledPMI, PackageMetadata, parse_pmi, serialize, validate_pmi

__all__ = [
    "FEATURE_SETS",
    "FeatureCatalog",
    "FeatureDescriptor",
    "FeatureMatrix",
    "LabeledPMI",
    "PackageMetadata",
    "catalog",
    "ccs",
    "default_grouping",
    "extract",
    "extract_matrix",
    "parse_pmi",
    "serialize",
    "subset",
    "validate_pmi",
]
