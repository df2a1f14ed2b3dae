"""Frame-level kNN unit selection and voice morphing over feature files.

Core pipeline: load feature sequences (KNNF files), assemble a target
speaker's unit database, replace each source frame by the uniform
average of its k cosine-nearest target units, and blend the result with
the source via an interpolation weight in [0, 1]. Evaluation helpers
cover similarity matrices, confidence intervals, duration ablations and
a synthetic ground-truth generator.
"""

__version__ = "0.1.0"

from .errors import KnnfFormatError, ValidationError
from .features import (
    DEFAULT_FRAME_RATE_HZ,
    FeatureSequence,
    SubsetSpec,
    UnitDatabase,
    build_database,
    database_duration,
    database_from_sequences,
    load_database,
    load_features,
    save_database,
    save_features,
    subset_database,
)
from .retrieval import (
    ConversionResult,
    ConversionSpec,
    convert,
    cosine_distance,
    interpolate,
    select_unit,
    top_k,
)
from .search import SearchIndex, batch_search, build_index
from .evaluation import (
    AblationRow,
    CiSummary,
    EmbeddingSet,
    SimilarityReport,
    ablation_run,
    aggregate_ci,
    centroid_embedding,
    lambda_sweep,
    load_embedding_set,
    load_external_scores,
    proxy_secs,
    save_embedding_set,
    secs,
    similarity_matrix,
    write_ablation_csv,
)
from .synthetic import SynthConfig, SynthTruth, generate, label_frames

__all__ = [
    "AblationRow",
    "CiSummary",
    "ConversionResult",
    "ConversionSpec",
    "DEFAULT_FRAME_RATE_HZ",
    "EmbeddingSet",
    "FeatureSequence",
    "KnnfFormatError",
    "SearchIndex",
    "SimilarityReport",
    "SubsetSpec",
    "SynthConfig",
    "SynthTruth",
    "UnitDatabase",
    "ValidationError",
    "ablation_run",
    "aggregate_ci",
    "batch_search",
    "build_database",
    "build_index",
    "centroid_embedding",
    "convert",
    "cosine_distance",
    "database_duration",
    "database_from_sequences",
    "generate",
    "interpolate",
    "label_frames",
    "lambda_sweep",
    "load_database",
    "load_embedding_set",
    "load_external_scores",
    "load_features",
    "proxy_secs",
    "save_database",
    "save_embedding_set",
    "save_features",
    "secs",
    "select_unit",
    "similarity_matrix",
    "subset_database",
    "top_k",
    "write_ablation_csv",
]
