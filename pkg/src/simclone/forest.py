"""Random-forest binary classifier built on CART trees with Gini splits.

Trained models are plain data (flat node arrays per tree) so they serialize
to versioned JSON and round-trip exactly. Training is deterministic for a
fixed seed: every tree draws its bootstrap sample and per-node feature
subsets from its own counter-based substream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, PersistenceError, SchemaError, TrainingError
from .featurize import FEATURE_NAMES, FeatureVector
from .metrics import ConfusionCounts, MetricError, auc, classification_metrics
from .rng import substream

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int = 3  # floor(sqrt(14))
    bootstrap: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        if self.features_per_split < 1:
            raise ConfigError("features_per_split must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 when set")


@dataclass
class Tree:
    """Flat preorder node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # positive-class fraction at the node's leaf
    count: np.ndarray  # training samples that reached the leaf

    def used_features(self) -> np.ndarray:
        return np.unique(self.feature[self.feature >= 0])


@dataclass
class ForestModel:
    trees: list
    feature_order: tuple
    config: ForestConfig
    format_version: int = FORMAT_VERSION

    @property
    def n_features(self) -> int:
        return len(self.feature_order)


def _leaf(nodes, y_sum: float, n: int) -> int:
    nodes.append((-1, 0.0, -1, -1, y_sum / n, n))
    return len(nodes) - 1


def _best_split(X, y, idx, rng, cfg: ForestConfig):
    """Best (feature, threshold) among a random feature subset, or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; the split minimizing weighted Gini impurity wins, first seen
    winning ties.
    """
    n = idx.size
    d = X.shape[1]
    m = min(cfg.features_per_split, d)
    candidates = rng.choice(d, size=m, replace=False)
    total_pos = float(y[idx].sum())
    best_score = math.inf
    best = None
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    for f in candidates:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        pos_left = np.cumsum(y[idx][order])[:-1].astype(np.float64)
        valid = vs[:-1] < vs[1:]
        if cfg.min_leaf > 1:
            valid &= (n_left >= cfg.min_leaf) & (n_right >= cfg.min_leaf)
        if not valid.any():
            continue
        pos_right = total_pos - pos_left
        gini_left = 1.0 - (pos_left**2 + (n_left - pos_left)**2) / n_left**2
        gini_right = 1.0 - (pos_right**2 + (n_right - pos_right)**2) / n_right**2
        weighted = (n_left * gini_left + n_right * gini_right) / n
        weighted[~valid] = math.inf
        k = int(np.argmin(weighted))
        if weighted[k] < best_score:
            thr = float((vs[k] + vs[k + 1]) / 2.0)
            # Adjacent floats can round the midpoint up to vs[k+1]; fall back
            # to the left value so "<= thr" still separates the two sides.
            if thr >= vs[k + 1]:
                thr = float(vs[k])
            best_score = float(weighted[k])
            best = (int(f), thr)
    return best


def _grow_tree(X, y, sample_idx, rng, cfg: ForestConfig) -> Tree:
    nodes: list = []

    def build(idx: np.ndarray, depth: int) -> int:
        n = idx.size
        y_sum = float(y[idx].sum())
        pure = y_sum == 0.0 or y_sum == n
        depth_stop = cfg.max_depth is not None and depth >= cfg.max_depth
        if pure or depth_stop or n < 2 * cfg.min_leaf or n < 2:
            return _leaf(nodes, y_sum, n)
        split = _best_split(X, y, idx, rng, cfg)
        if split is None:
            return _leaf(nodes, y_sum, n)
        f, thr = split
        mask = X[idx, f] <= thr
        if not mask.any() or mask.all():
            return _leaf(nodes, y_sum, n)
        node_id = len(nodes)
        nodes.append(None)
        left_id = build(idx[mask], depth + 1)
        right_id = build(idx[~mask], depth + 1)
        nodes[node_id] = (f, thr, left_id, right_id, y_sum / n, n)
        return node_id

    build(sample_idx, 0)
    feature = np.array([nd[0] for nd in nodes], dtype=np.int32)
    threshold = np.array([nd[1] for nd in nodes], dtype=np.float64)
    left = np.array([nd[2] for nd in nodes], dtype=np.int32)
    right = np.array([nd[3] for nd in nodes], dtype=np.int32)
    value = np.array([nd[4] for nd in nodes], dtype=np.float64)
    count = np.array([nd[5] for nd in nodes], dtype=np.int64)
    return Tree(feature, threshold, left, right, value, count)


def _default_feature_order(d: int):
    if d == len(FEATURE_NAMES):
        return FEATURE_NAMES
    return tuple(f"f{i}" for i in range(d))


def train_forest(X, y, cfg: ForestConfig = ForestConfig(),
                 feature_order=None) -> ForestModel:
    """Train a forest of CART trees on (X, y) with y in {0, 1}."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ConfigError("features and labels must have matching lengths")
    n, d = X.shape
    if n < 2:
        raise ConfigError("need at least 2 training samples")
    if cfg.features_per_split > d:
        raise ConfigError("features_per_split exceeds feature count")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0, 1))):
        raise ConfigError("labels must be 0 or 1")
    if classes.size < 2:
        raise TrainingError("training data contains a single class")

    order = tuple(feature_order) if feature_order is not None else _default_feature_order(d)
    if len(order) != d:
        raise ConfigError("feature_order length does not match features")

    trees = []
    all_idx = np.arange(n)
    for t in range(cfg.n_trees):
        rng = substream(cfg.rng_seed, t, 0)
        idx = rng.integers(0, n, size=n) if cfg.bootstrap else all_idx
        trees.append(_grow_tree(X, y, np.asarray(idx), rng, cfg))
    return ForestModel(trees=trees, feature_order=order, config=cfg)


def constant_model(fraction: float, feature_order=FEATURE_NAMES,
                   cfg: ForestConfig = ForestConfig()) -> ForestModel:
    """A single-leaf forest predicting a fixed probability.

    Used for degenerate folds whose training labels are single-class: a
    forest fit on one class can only ever predict that class.
    """
    tree = Tree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.array([0.0]),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        value=np.array([fraction], dtype=np.float64),
        count=np.array([0], dtype=np.int64),
    )
    return ForestModel(trees=[tree], feature_order=tuple(feature_order), config=cfg)


def _tree_predict_batch(tree: Tree, X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int32)
    rows = np.arange(n)
    while True:
        f = tree.feature[node]
        active = f >= 0
        if not active.any():
            break
        f_safe = np.where(active, f, 0)
        go_left = X[rows, f_safe] <= tree.threshold[node]
        nxt = np.where(go_left, tree.left[node], tree.right[node])
        node = np.where(active, nxt, node)
    return tree.value[node]


def _check_order(model: ForestModel, feature_order) -> None:
    if feature_order is not None and tuple(feature_order) != tuple(model.feature_order):
        raise SchemaError("feature ordering does not match the model")


def predict_proba_batch(model: ForestModel, X, feature_order=None) -> np.ndarray:
    """Mean over trees of the reached leaf's positive-class fraction."""
    _check_order(model, feature_order)
    X = np.asarray(X, dtype=np.float64)
    out = np.zeros(X.shape[0], dtype=np.float64)
    for tree in model.trees:
        out += _tree_predict_batch(tree, X)
    return out / len(model.trees)


def predict_proba(model: ForestModel, fv, feature_order=None) -> float:
    if isinstance(fv, FeatureVector):
        x = fv.values
        feature_order = FEATURE_NAMES if feature_order is None else feature_order
    else:
        x = np.asarray(fv, dtype=np.float64)
    return float(predict_proba_batch(model, x[None, :], feature_order)[0])


def predict_label(proba: float) -> int:
    return int(proba >= 0.5)


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

@dataclass
class CvReport:
    folds: list                      # per-fold metric dicts
    mean: dict                       # arithmetic mean of the folds
    degenerate_auc_folds: int = 0    # folds where AUC defaulted to 0.5

    METRICS = ("accuracy", "auc", "f1", "precision", "recall")


def _fold_indices(n: int, k: int, y, seed: int, stratified: bool):
    perm = substream(seed, 0xCF01, 0).permutation(n)
    if not stratified:
        return np.array_split(perm, k)
    folds = [[] for _ in range(k)]
    slot = 0
    for cls in (1, 0):
        for i in perm:
            if y[i] == cls:
                folds[slot % k].append(int(i))
                slot += 1
    return [np.array(f, dtype=np.int64) for f in folds]


def cross_validate(X, y, k: int = 10, cfg: ForestConfig = ForestConfig(),
                   stratified: bool = False, feature_order=None) -> CvReport:
    """k-fold cross-validation; one shuffle with cfg.rng_seed, then train on
    k-1 folds and evaluate on the held-out one.

    A training split that degenerates to a single class is scored with the
    constant classifier for that class; a held-out fold with a single class
    gets AUC 0.5 and is counted in degenerate_auc_folds.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if k < 2:
        raise ConfigError("k must be >= 2")
    if k > n:
        raise ConfigError("k exceeds the sample count")
    folds = _fold_indices(n, k, y, cfg.rng_seed, stratified)

    order = tuple(feature_order) if feature_order is not None \
        else _default_feature_order(X.shape[1])
    results = []
    degenerate = 0
    for f in range(k):
        test_idx = folds[f]
        train_idx = np.concatenate([folds[g] for g in range(k) if g != f])
        y_train = y[train_idx]
        if np.unique(y_train).size < 2:
            model = constant_model(float(y_train[0]), order, cfg)
        else:
            model = train_forest(X[train_idx], y_train, cfg, order)
        probs = predict_proba_batch(model, X[test_idx])
        preds = (probs >= 0.5).astype(np.int64)
        truth = y[test_idx]
        counts = ConfusionCounts(
            tp=int(np.sum((preds == 1) & (truth == 1))),
            fp=int(np.sum((preds == 1) & (truth == 0))),
            tn=int(np.sum((preds == 0) & (truth == 0))),
            fn=int(np.sum((preds == 0) & (truth == 1))),
        )
        fold_metrics = classification_metrics(counts)
        try:
            fold_metrics["auc"] = auc(probs, truth)
        except MetricError:
            fold_metrics["auc"] = 0.5
            degenerate += 1
        results.append(fold_metrics)

    mean = {m: float(np.mean([r[m] for r in results])) for m in CvReport.METRICS}
    return CvReport(folds=results, mean=mean, degenerate_auc_folds=degenerate)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_model(model: ForestModel, path) -> None:
    doc = {
        "format_version": model.format_version,
        "feature_order": list(model.feature_order),
        "config": {
            "n_trees": model.config.n_trees,
            "max_depth": model.config.max_depth,
            "min_leaf": model.config.min_leaf,
            "features_per_split": model.config.features_per_split,
            "bootstrap": model.config.bootstrap,
            "rng_seed": model.config.rng_seed,
        },
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "value": tree.value.tolist(),
                "count": tree.count.tolist(),
            }
            for tree in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> ForestModel:
    try:
        with open(Path(path), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise PersistenceError(f"{path}: malformed model file: {exc}") from exc
    try:
        if doc["format_version"] != FORMAT_VERSION:
            raise PersistenceError(
                f"{path}: unsupported format_version {doc['format_version']!r}")
        feature_order = tuple(str(s) for s in doc["feature_order"])
        cfg_doc = doc["config"]
        cfg = ForestConfig(
            n_trees=int(cfg_doc["n_trees"]),
            max_depth=cfg_doc["max_depth"],
            min_leaf=int(cfg_doc["min_leaf"]),
            features_per_split=int(cfg_doc["features_per_split"]),
            bootstrap=bool(cfg_doc["bootstrap"]),
            rng_seed=int(cfg_doc["rng_seed"]),
        )
        trees = []
        for td in doc["trees"]:
            tree = Tree(
                feature=np.array(td["feature"], dtype=np.int32),
                threshold=np.array(td["threshold"], dtype=np.float64),
                left=np.array(td["left"], dtype=np.int32),
                right=np.array(td["right"], dtype=np.int32),
                value=np.array(td["value"], dtype=np.float64),
                count=np.array(td["count"], dtype=np.int64),
            )
            if tree.feature.size and tree.feature.max() >= len(feature_order):
                raise PersistenceError(f"{path}: node feature index out of range")
            trees.append(tree)
        if not trees:
            raise PersistenceError(f"{path}: model has no trees")
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"{path}: malformed model file: {exc}") from exc
    return ForestModel(trees=trees, feature_order=feature_order, config=cfg,
                       format_version=FORMAT_VERSION)
