"""Exact Shapley attribution of a forest prediction over the feature slots.

The value function is interventional: v(S) is the mean forest output over a
background set with the explained vector's values spliced in on the features
in S. All 2^d coalition values are enumerated and memoized; phi_i is the
classic factorial-weighted sum of marginal contributions.

Enumeration is exact but organized per tree: a tree's output depends only on
the features its nodes test, so each tree is evaluated once per coalition of
its own used features and the full v(S) table is assembled from those
per-tree tables. This changes nothing about the result and keeps 2^14
coalitions x 100 background rows x 100 trees tractable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, PersistenceError
from .forest import ForestModel
from .rng import substream

_MAX_FEATURES = 20  # 2^20 coalition values is the practical ceiling


@dataclass
class BackgroundSet:
    rows: np.ndarray  # (m, d) reference vectors
    provenance: str = ""

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[0] == 0:
            raise ConfigError("background set must contain at least one row")


@dataclass
class ShapAttribution:
    base_value: float          # v(empty) = mean prediction over the background
    phi: np.ndarray            # one value per feature slot
    prediction: float          # f(x)
    efficiency_residual: float  # f(x) - base_value - sum(phi)


def background_from_training(X, size: int = 100, seed: int = 0xB6) -> BackgroundSet:
    """Sample background rows uniformly (without replacement when possible)
    from the training features, with a fixed seed for reproducibility."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigError("training features must be a nonempty 2-d array")
    if X.shape[0] <= size:
        rows = X.copy()
        note = f"all {X.shape[0]} training rows"
    else:
        idx = substream(seed, 0xB6, 0).choice(X.shape[0], size=size, replace=False)
        rows = X[np.asarray(idx)]
        note = f"{size} of {X.shape[0]} training rows, seed {seed}"
    return BackgroundSet(rows=rows, provenance=note)


def save_background(bg: BackgroundSet, path) -> None:
    doc = {"provenance": bg.provenance, "rows": bg.rows.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_background(path) -> BackgroundSet:
    try:
        with open(Path(path), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return BackgroundSet(rows=np.array(doc["rows"], dtype=np.float64),
                             provenance=str(doc.get("provenance", "")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"{path}: malformed background file: {exc}") from exc


def _tree_coalition_table(tree, x, bg, used) -> np.ndarray:
    """Mean tree output over the background for every coalition of the
    tree's used features (bit k of the index = feature used[k] taken from x).

    A composed input only ever takes one of two values per feature, so each
    node's branch direction is precomputed as one boolean for x and one per
    background row; the batched traversal then only gathers from those small
    tables. Rows that reach a leaf drop out of the working set.
    """
    u = int(used.size)
    m = bg.shape[0]
    if u == 0:
        # Leaf-only tree: output is coalition- and background-independent.
        return np.array([float(tree.value[0])])
    n_c = 1 << u
    internal = tree.feature >= 0
    n_nodes = tree.feature.size

    local = np.zeros(int(tree.feature.max()) + 1, dtype=np.uint32)
    for k, f in enumerate(used):
        local[f] = k
    bitpos = np.zeros(n_nodes, dtype=np.uint32)
    bitpos[internal] = local[tree.feature[internal]]

    x_left = np.zeros(n_nodes, dtype=bool)
    x_left[internal] = x[tree.feature[internal]] <= tree.threshold[internal]
    b_left = np.zeros((n_nodes, m), dtype=bool)
    b_left[internal] = bg[:, tree.feature[internal]].T <= \
        tree.threshold[internal][:, None]
    b_left_flat = b_left.ravel()

    n = n_c * m
    coal_of = np.repeat(np.arange(n_c, dtype=np.uint32), m)
    bgrow_of = np.tile(np.arange(m, dtype=np.int64), n_c)
    out = np.empty(n, dtype=np.float64)

    idx = np.arange(n)
    node = np.zeros(n, dtype=np.int64)
    while idx.size:
        at_leaf = tree.feature[node] < 0
        if at_leaf.any():
            done = idx[at_leaf]
            out[done] = tree.value[node[at_leaf]]
            keep = ~at_leaf
            idx = idx[keep]
            node = node[keep]
            if idx.size == 0:
                break
        from_x = (coal_of[idx] >> bitpos[node]) & 1
        go_left = np.where(from_x.astype(bool),
                           x_left[node],
                           b_left_flat[node * m + bgrow_of[idx]])
        node = np.where(go_left, tree.left[node], tree.right[node]).astype(np.int64)
    return out.reshape(n_c, m).mean(axis=1)


def coalition_values(model: ForestModel, x, bg: BackgroundSet) -> np.ndarray:
    """The memoized v(S) table for all 2^d coalitions (bit i of the index
    set = feature i taken from x, clear = from the background row)."""
    d = model.n_features
    if d > _MAX_FEATURES:
        raise ConfigError(f"exact enumeration supports at most {_MAX_FEATURES} features")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise ConfigError("explained vector length does not match the model")
    if bg.rows.shape[1] != d:
        raise ConfigError("background width does not match the model")

    coal_all = np.arange(1 << d, dtype=np.uint32)
    v = np.zeros(1 << d, dtype=np.float64)
    for tree in model.trees:
        used = tree.used_features()
        table = _tree_coalition_table(tree, x, bg.rows, used)
        idx = np.zeros(1 << d, dtype=np.uint32)
        for k, f in enumerate(used):
            idx |= ((coal_all >> np.uint32(f)) & 1) << np.uint32(k)
        v += table[idx]
    return v / len(model.trees)


def shapley_exact(model: ForestModel, x, bg: BackgroundSet) -> ShapAttribution:
    """Exact Shapley values phi_i of the forest probability at x.

    phi_i = sum over coalitions S not containing i of
    |S|! (d-1-|S|)! / d! * (v(S+{i}) - v(S)).
    """
    d = model.n_features
    v = coalition_values(model, x, bg)

    weights = np.array(
        [math.factorial(s) * math.factorial(d - 1 - s) / math.factorial(d)
         for s in range(d)],
        dtype=np.float64,
    )
    coal_all = np.arange(1 << d, dtype=np.uint32)
    pop = np.bitwise_count(coal_all).astype(np.int64)
    phi = np.zeros(d, dtype=np.float64)
    for i in range(d):
        bit = np.uint32(1 << i)
        without = coal_all[(coal_all & bit) == 0]
        diffs = v[without | bit] - v[without]
        phi[i] = float(np.dot(weights[pop[without]], diffs))

    base = float(v[0])
    prediction = float(v[-1])
    residual = prediction - base - float(phi.sum())
    return ShapAttribution(base_value=base, phi=phi, prediction=prediction,
                           efficiency_residual=residual)


def attribution_to_json(attr: ShapAttribution, pair_id: str) -> dict:
    return {
        "pair_id": pair_id,
        "base_value": attr.base_value,
        "prediction": attr.prediction,
        "phi": [float(p) for p in attr.phi],
        "residual": attr.efficiency_residual,
    }
