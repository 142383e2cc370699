"""Dataset schema, validation, synthesis, and statistics."""

from .records import (
    MAX_FRAMES,
    AnnotationRecord,
    StatsReport,
    dataset_stats,
    downsample_record,
    load_annotations,
    save_annotations,
)
from .synthetic import (
    ACTION_PREDICATE_IDS,
    DEFAULT_VOCAB,
    IDENTITY_NOUNS,
    PERSON_NOUNS,
    SyntheticSceneConfig,
    generate_synthetic,
)

__all__ = [
    "MAX_FRAMES",
    "AnnotationRecord",
    "StatsReport",
    "dataset_stats",
    "downsample_record",
    "load_annotations",
    "save_annotations",
    "ACTION_PREDICATE_IDS",
    "DEFAULT_VOCAB",
    "IDENTITY_NOUNS",
    "PERSON_NOUNS",
    "SyntheticSceneConfig",
    "generate_synthetic",
]
