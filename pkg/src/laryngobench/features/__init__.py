"""Audio feature sets: MFCC, an 88-slot acoustic descriptor vector, and pooled embeddings."""

from laryngobench.features.acoustic import ACOUSTIC_NAMES, extract_acoustic
from laryngobench.features.embeddings import (
    EmbeddingFormatError,
    load_embeddings,
    mean_pool,
    write_embeddings,
)
from laryngobench.features.mfcc import (
    MfccParams,
    TooShortError,
    extract_mfcc,
    mfcc_target_frames,
    standardize_mfcc,
)

from laryngobench.features.table import (
    FEATURE_SETS,
    FeatureTable,
    extract_table,
    featurize,
    read_feature_table,
    write_feature_table,
)

__all__ = [
    "ACOUSTIC_NAMES", "EmbeddingFormatError", "FEATURE_SETS", "FeatureTable", "MfccParams", "TooShortError",
    "extract_acoustic", "extract_mfcc", "load_embeddings", "mean_pool", "mfcc_target_frames",
    "extract_table", "featurize", "read_feature_table", "standardize_mfcc", "write_embeddings",
    "write_feature_table",
]
