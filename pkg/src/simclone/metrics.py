"""Classification and ranking metrics, plus the labeling-threshold sweep."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, MetricError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ConfigError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def classification_metrics(counts: ConfusionCounts) -> dict:
    """Accuracy, precision, recall, f1 with zero-denominator conventions:
    precision = 0 if no positive predictions, recall = 0 if no positives,
    f1 = 0 if precision + recall = 0."""
    if counts.total == 0:
        raise ConfigError("confusion counts are all zero")
    accuracy = (counts.tp + counts.tn) / counts.total
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    return {"accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1}


def auc(scores, labels) -> float:
    """ROC AUC via the Mann-Whitney rank statistic with average ranks for
    ties (equals the trapezoidal ROC area)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both classes present")
    # Average rank per distinct score: ranks are 1-based positions in the
    # ascending sort, tied scores sharing the mean of their positions.
    uniq, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    avg_rank = ends - (counts - 1) / 2.0
    rank_sum_pos = float(np.sum(avg_rank[inverse[labels == 1]]))
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class RankedPairList:
    """(pair_id, probability) entries sorted by descending probability,
    ties broken by pair_id for determinism."""

    entries: list

    @classmethod
    def from_scores(cls, scored) -> "RankedPairList":
        return cls(entries=sorted(scored, key=lambda e: (-e[1], e[0])))


def precision_at_k(ranked: RankedPairList, truth: dict, k: int) -> float:
    """Fraction of the top-k entries whose label is positive.

    truth maps pair_id to a boolean (clone or not).
    """
    if k < 1:
        raise MetricError("k must be >= 1")
    if k > len(ranked.entries):
        raise MetricError("k exceeds the ranked list length")
    hits = sum(1 for pair_id, _ in ranked.entries[:k] if truth[pair_id])
    return hits / k


# ---------------------------------------------------------------------------
# threshold sweep
# ---------------------------------------------------------------------------

SWEEP_HEADER = ("t", "accuracy", "auc", "f1", "precision", "recall")


def threshold_sweep(seed_tables, thresholds, rng_seed: int, workdir,
                    forest_cfg=None, folds: int = 10, pooling_cfg=None,
                    metrics_selection=None, axis_prob: float = 0.5,
                    jobs: int = 1, progress=None) -> list:
    """Regenerate the corpus at each labeling threshold, featurize it, run
    k-fold cross-validation, and collect one mean-metric row per threshold.
    """
    from .corpus import InjectionConfig, generate_corpus
    from .featurize import PoolingConfig
    from .forest import ForestConfig, cross_validate
    from .pipeline import featurize_corpus
    from .similarity import ALL_METRICS

    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise ConfigError(f"threshold {t} outside [0, 1]")
    forest_cfg = forest_cfg if forest_cfg is not None else ForestConfig()
    pooling_cfg = pooling_cfg if pooling_cfg is not None else PoolingConfig()
    metrics_selection = metrics_selection if metrics_selection is not None else ALL_METRICS

    workdir = Path(workdir)
    rows = []
    for t in thresholds:
        corpus_dir = workdir / f"t_{t:.4f}".replace(".", "_")
        cfg = InjectionConfig(threshold_t=t, rng_seed=rng_seed, axis_prob=axis_prob)
        generate_corpus(seed_tables, cfg, corpus_dir)
        _, X, labels = featurize_corpus(
            corpus_dir, metrics=metrics_selection, pooling=pooling_cfg,
            jobs=jobs, progress=progress)
        y = np.array([int(v) for v in labels], dtype=np.int64)
        report = cross_validate(X, y, k=folds, cfg=forest_cfg)
        rows.append({"t": t, **report.mean})
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([repr(float(row[c])) for c in SWEEP_HEADER])
