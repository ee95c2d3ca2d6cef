"""Track-to-track vehicle re-identification over CNN latent representations.

The package ranks gallery tracks against image or track queries under a
family of distance metrics (minimum Euclidean, minimum cosine, sparse
reconstruction residual, kernel set distances) and scores rankings with
the usual retrieval measures (mAP, CMC rank-k).
"""

from .errors import (
    ConvergenceError,
    DataError,
    DimensionMismatchError,
    FeatureFormatError,
    ManifestError,
    NumericalError,
    TrackReidError,
    ZeroNormError,
)
from .evaluation import (
    EvalReport,
    ExclusionPolicy,
    average_precision,
    cmc,
    evaluate,
    queries_from_gallery,
    rank_from_distances,
    rank_gallery,
)
from .featureio import (
    ManifestRecord,
    generate_synthetic,
    load_gallery,
    read_features,
    read_manifest,
    read_query_manifest,
    save_gallery,
    write_features,
    write_manifest,
    write_query_manifest,
)
from .metrics import (
    GalleryScorer,
    aggregate,
    distance_set,
    kernel_distance,
    mcd_i2t,
    med_i2t,
    track_distance,
)
from .sparse import (
    SparseCode,
    coordinate_descent_oracle,
    kkt_violation,
    lasso_lars,
    lasso_objective,
    rscr_i2t,
    rscr_t2t,
)
from .tracks import (
    AGGREGATIONS,
    FAMILIES,
    DistanceSpec,
    Gallery,
    Query,
    RankedList,
    TrackFeatures,
    Violation,
    validate_gallery,
)

__version__ = "0.1.0"

__all__ = [
    "AGGREGATIONS",
    "FAMILIES",
    "ConvergenceError",
    "DataError",
    "DimensionMismatchError",
    "DistanceSpec",
    "EvalReport",
    "ExclusionPolicy",
    "FeatureFormatError",
    "Gallery",
    "GalleryScorer",
    "ManifestError",
    "ManifestRecord",
    "NumericalError",
    "Query",
    "RankedList",
    "SparseCode",
    "TrackFeatures",
    "TrackReidError",
    "Violation",
    "ZeroNormError",
    "aggregate",
    "average_precision",
    "cmc",
    "coordinate_descent_oracle",
    "distance_set",
    "evaluate",
    "generate_synthetic",
    "kernel_distance",
    "kkt_violation",
    "lasso_lars",
    "lasso_objective",
    "load_gallery",
    "mcd_i2t",
    "med_i2t",
    "queries_from_gallery",
    "rank_from_distances",
    "rank_gallery",
    "read_features",
    "read_manifest",
    "read_query_manifest",
    "rscr_i2t",
    "rscr_t2t",
    "save_gallery",
    "track_distance",
    "validate_gallery",
    "write_features",
    "write_manifest",
    "write_query_manifest",
]
