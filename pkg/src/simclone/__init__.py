"""Value-similarity clone detection for tabular datasets.

The pipeline: parse tables and split them by column type (table_io), score
row and column pairs with value-based similarity metrics (similarity), pool
the matrices into 14-wide feature vectors (featurize), classify pairs with a
random forest (forest), attribute predictions with exact Shapley values
(shapley), and localize cloned regions via weighted heatmaps (localize).
Labeled training corpora are synthesized by clone injection (corpus).
"""

from .corpus import (
    CloneGroundTruth,
    InjectionConfig,
    PairRecord,
    generate_corpus,
    load_manifest,
    type1_inject,
    type3_inject,
)
from .errors import (
    ConfigError,
    EmptyTableError,
    InternalError,
    MetricError,
    PersistenceError,
    SchemaError,
    SimCloneError,
    TrainingError,
)
from .featurize import (
    FEATURE_NAMES,
    LITE_METRICS,
    FeatureVector,
    PoolingConfig,
    featurize_pair,
    mean_top_k,
    read_feature_csv,
    write_feature_csv,
)
from .forest import (
    CvReport,
    ForestConfig,
    ForestModel,
    cross_validate,
    load_model,
    predict_proba,
    predict_proba_batch,
    save_model,
    train_forest,
)
from .localize import (
    LocalizationReport,
    VisMatrices,
    build_vis,
    localization_precision_at_k,
    render_heatmap,
)
from .metrics import (
    ConfusionCounts,
    RankedPairList,
    auc,
    classification_metrics,
    precision_at_k,
    threshold_sweep,
)
from .shapley import (
    BackgroundSet,
    ShapAttribution,
    background_from_training,
    coalition_values,
    shapley_exact,
)
from .similarity import (
    CANONICAL_ORDER,
    Axis,
    MetricId,
    SimilarityMatrix,
    SimilarityMatrixSet,
    compute_matrix_set,
    jaccard,
    levenshtein_sim,
    mean_sim,
    sd_sim,
    simhash_sim,
    textrank_sim,
)
from .table_io import (
    ColumnType,
    LoadConfig,
    Table,
    TypedView,
    infer_column_type,
    load_table,
    split_typed,
)

__version__ = "0.1.0"
