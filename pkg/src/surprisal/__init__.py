"""Surprisal profiles for timelines of high-dimensional distributions."""

from .core import (
    FeatureVocabulary,
    SparseDistribution,
    SurprisabilityProfile,
    Timeline,
    TimelineCenter,
    Violation,
    read_timeline,
    validate_timeline,
    write_timeline,
)
from .errors import (
    IngestError,
    PolicyError,
    SurprisalError,
    TimelineError,
    UndefinedAUCError,
    VocabularyMismatchError,
)
from .transform import (
    ThresholdPolicy,
    TransformResult,
    apply_threshold,
    build_tcr,
    mixture,
    surprisability_profile,
    transform_timeline,
)

__version__ = "0.1.0"

__all__ = [
    "FeatureVocabulary",
    "IngestError",
    "PolicyError",
    "SparseDistribution",
    "SurprisabilityProfile",
    "SurprisalError",
    "ThresholdPolicy",
    "Timeline",
    "TimelineCenter",
    "TimelineError",
    "TransformResult",
    "UndefinedAUCError",
    "Violation",
    "VocabularyMismatchError",
    "apply_threshold",
    "build_tcr",
    "mixture",
    "read_timeline",
    "surprisability_profile",
    "transform_timeline",
    "validate_timeline",
    "write_timeline",
]
