"""Mean-top-K pooling of similarity matrices into fixed 14-wide feature vectors."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SchemaError
from .similarity import (
    ALL_METRICS,
    CANONICAL_ORDER,
    MetricId,
    SimilarityMatrixSet,
)


@dataclass(frozen=True)
class PoolingConfig:
    k: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("pooling k must be >= 1")


# Canonical feature column names, one per (metric, axis) slot.
FEATURE_NAMES = tuple(
    f"f_{axis.value}_{metric.value}" for metric, axis in CANONICAL_ORDER
)
N_FEATURES = len(FEATURE_NAMES)

# Reduced metric set trading a small accuracy drop for cheaper featurization.
LITE_METRICS = frozenset(
    {MetricId.JACCARD_STRING, MetricId.JACCARD_NUMERIC, MetricId.TEXTRANK,
     MetricId.MEAN, MetricId.SD}
)

_METRIC_ALIASES = {
    "jaccard": (MetricId.JACCARD_STRING, MetricId.JACCARD_NUMERIC),
    "jaccard_str": (MetricId.JACCARD_STRING,),
    "jaccard_num": (MetricId.JACCARD_NUMERIC,),
    "simhash": (MetricId.SIMHASH,),
    "levenshtein": (MetricId.LEVENSHTEIN,),
    "textrank": (MetricId.TEXTRANK,),
    "mean": (MetricId.MEAN,),
    "sd": (MetricId.SD,),
}


def resolve_metric_selection(spec: str) -> frozenset:
    """Map a CLI metric selector ("all", "lite", or a comma list) to MetricIds."""
    spec = spec.strip().lower()
    if spec == "all":
        return ALL_METRICS
    if spec == "lite":
        return LITE_METRICS
    selected = set()
    for name in spec.split(","):
        name = name.strip()
        if name not in _METRIC_ALIASES:
            raise ConfigError(f"unknown metric name: {name!r}")
        selected.update(_METRIC_ALIASES[name])
    if not selected:
        raise ConfigError("empty metric selection")
    return frozenset(selected)


@dataclass
class FeatureVector:
    pair_id: str
    values: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (N_FEATURES,):
            raise ConfigError(f"feature vector must have {N_FEATURES} entries")


def mean_top_k(matrix: np.ndarray, cfg: PoolingConfig = PoolingConfig()) -> float:
    """Mean of the k largest entries (all entries if fewer than k).

    A zero-entry matrix pools to 0.0. The selected entries are averaged in
    descending order so the result is bit-identical to a sort-based
    reference.
    """
    flat = np.asarray(matrix, dtype=np.float64).ravel()
    if flat.size == 0:
        return 0.0
    k = min(cfg.k, flat.size)
    if k < flat.size:
        top = np.partition(flat, flat.size - k)[flat.size - k:]
    else:
        top = flat
    return float(np.mean(np.sort(top)[::-1]))


def featurize_pair(mset: SimilarityMatrixSet,
                   cfg: PoolingConfig = PoolingConfig()) -> FeatureVector:
    """Pool each canonical slot; missing matrices contribute exactly 0.0."""
    values = np.zeros(N_FEATURES, dtype=np.float64)
    for slot, (_, _, matrix) in enumerate(mset.ordered()):
        if matrix is not None:
            values[slot] = mean_top_k(matrix.values, cfg)
    return FeatureVector(pair_id=mset.pair_id, values=values)


# ---------------------------------------------------------------------------
# feature CSV
# ---------------------------------------------------------------------------

_CSV_HEADER = ("pair_id",) + FEATURE_NAMES + ("label",)


def write_feature_csv(path, rows) -> None:
    """Write (pair_id, values, label) rows; label may be 0, 1, or None (NA)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for pair_id, values, label in rows:
            label_s = "NA" if label is None else str(int(label))
            writer.writerow([pair_id] + [repr(float(v)) for v in values] + [label_s])


def read_feature_csv(path):
    """Read a feature CSV; returns (pair_ids, X, labels).

    labels entries are 0/1 ints or None for NA. The header must match the
    canonical feature order exactly.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != _CSV_HEADER:
            raise SchemaError(
                f"{path}: feature CSV header does not match the canonical "
                f"feature order")
        pair_ids, rows, labels = [], [], []
        for row in reader:
            if not row:
                continue
            pair_ids.append(row[0])
            rows.append([float(v) for v in row[1:1 + N_FEATURES]])
            raw = row[1 + N_FEATURES]
            labels.append(None if raw == "NA" else int(raw))
    X = np.array(rows, dtype=np.float64) if rows else np.zeros((0, N_FEATURES))
    return pair_ids, X, labels
