"""Value-based similarity metrics and pairwise similarity matrices.

Seven metric slots cover two data types: four string metrics (set Jaccard,
simhash fingerprint agreement, token-level Levenshtein, and a log-damped
set-overlap score) and three numeric metrics (numeric set Jaccard, mean
closeness, standard-deviation closeness). Each applicable metric is computed
between every row of one table and every row of the other, and likewise for
columns, giving up to 14 matrices per table pair.

Every metric returns "higher = more similar"; simhash and Levenshtein are
therefore reported as 1 minus their normalized distance. The unit of
comparison is the whole cell string: cells are never split into words.

The scalar functions are the definition of each metric. The matrix builders
are vectorized fast paths over precomputed per-unit profiles and must agree
with the scalar functions; the test suite enforces this against independent
oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .table_io import TypedView

_EPS = 1e-12


class Axis(str, Enum):
    ROW = "row"
    COL = "col"


class MetricId(str, Enum):
    JACCARD_STRING = "jaccard_str"
    SIMHASH = "simhash"
    LEVENSHTEIN = "levenshtein"
    TEXTRANK = "textrank"
    JACCARD_NUMERIC = "jaccard_num"
    MEAN = "mean"
    SD = "sd"


STRING_METRICS = (
    MetricId.JACCARD_STRING,
    MetricId.SIMHASH,
    MetricId.LEVENSHTEIN,
    MetricId.TEXTRANK,
)
NUMERIC_METRICS = (MetricId.JACCARD_NUMERIC, MetricId.MEAN, MetricId.SD)
METRIC_ORDER = STRING_METRICS + NUMERIC_METRICS
ALL_METRICS = frozenset(METRIC_ORDER)

# Fixed slot order shared by feature vectors, models, and attributions:
# all row matrices first, then all column matrices, metrics in METRIC_ORDER.
CANONICAL_ORDER = tuple(
    (metric, axis) for axis in (Axis.ROW, Axis.COL) for metric in METRIC_ORDER
)


# ---------------------------------------------------------------------------
# scalar metrics
# ---------------------------------------------------------------------------

def jaccard(a, b) -> float:
    """|a.b| / |a|b| over finite sets; two empty units count as identical."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(token: str) -> int:
    """FNV-1a 64-bit hash of the token's UTF-8 bytes."""
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def simhash64(tokens) -> int | None:
    """64-bit simhash fingerprint of the distinct tokens, or None if empty.

    Each distinct token votes +1/-1 on every bit of its FNV-1a hash; a bit of
    the fingerprint is 1 iff its vote total is positive.
    """
    distinct = set(tokens)
    if not distinct:
        return None
    votes = [0] * 64
    for tok in distinct:
        h = fnv1a64(tok)
        for bit in range(64):
            votes[bit] += 1 if (h >> bit) & 1 else -1
    out = 0
    for bit in range(64):
        if votes[bit] > 0:
            out |= 1 << bit
    return out


def simhash_sim(a, b) -> float:
    """1 - hamming(simhash(a), simhash(b)) / 64."""
    ha, hb = simhash64(a), simhash64(b)
    if ha is None and hb is None:
        return 1.0
    if ha is None or hb is None:
        return 0.0
    return 1.0 - bin(ha ^ hb).count("1") / 64.0


def levenshtein_sim(a, b) -> float:
    """1 - edit_distance(a, b) / (|a| + |b|), one cell string = one symbol."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    prev = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        cur = [i]
        for j, tok_b in enumerate(b, start=1):
            cost = 0 if tok_a == tok_b else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return 1.0 - prev[-1] / (len(a) + len(b))


def textrank_sim(a, b) -> float:
    """|a.b| / (ln|a| + ln|b|); falls back to Jaccard when both sets have at
    most one element (or either is empty). May exceed 1 for large sets."""
    sa, sb = set(a), set(b)
    if not sa or not sb:
        return jaccard(sa, sb)
    denom = math.log(len(sa)) + math.log(len(sb))
    if denom <= _EPS:
        return jaccard(sa, sb)
    return len(sa & sb) / denom


def _stat_sim(v1: float, v2: float) -> float:
    s = v1 + v2
    d = abs(v1 - v2)
    if abs(s) <= _EPS:
        return 1.0 if d <= _EPS else 0.0
    return max(0.0, min(1.0, 1.0 - d / abs(s)))


def mean_sim(a, b) -> float:
    """Closeness of the two means: 1 - |m1-m2| / |m1+m2|, clamped to [0, 1]."""
    if len(a) == 0 and len(b) == 0:
        return 1.0
    if len(a) == 0 or len(b) == 0:
        return 0.0
    return _stat_sim(float(np.mean(a)), float(np.mean(b)))


def sd_sim(a, b) -> float:
    """Closeness of the two population standard deviations, as mean_sim."""
    if len(a) == 0 and len(b) == 0:
        return 1.0
    if len(a) == 0 or len(b) == 0:
        return 0.0
    return _stat_sim(float(np.std(a)), float(np.std(b)))


# ---------------------------------------------------------------------------
# per-unit profiles (precomputed once per table side)
# ---------------------------------------------------------------------------

@dataclass
class StringAxisProfile:
    """Precomputed summaries of every string unit along one axis.

    Fields not needed by the selected metrics stay None, so e.g. the lite
    metric set never pays for fingerprints or token codes.
    """

    n_units: int
    sets: list | None      # frozenset of distinct cell strings per unit
    sizes: np.ndarray | None
    hashes: np.ndarray | None  # uint64 simhash per unit
    codes: np.ndarray | None   # (n_units, unit_len) uint64 FNV codes, token order


@dataclass
class NumericAxisProfile:
    """Precomputed summaries of every numeric unit along one axis."""

    sets: list            # frozenset of present canonical floats per unit
    counts: np.ndarray    # number of present (non-missing) values
    means: np.ndarray     # mean of present values, 0.0 placeholder if empty
    sds: np.ndarray       # population sd of present values, 0.0 if empty

    @property
    def n_units(self) -> int:
        return len(self.sets)


@dataclass
class ViewProfile:
    string_rows: StringAxisProfile | None
    string_cols: StringAxisProfile | None
    numeric_rows: NumericAxisProfile | None
    numeric_cols: NumericAxisProfile | None
    view: TypedView


def _string_profile(units: list, code_cache: dict, want_sets: bool,
                    want_hashes: bool, want_codes: bool) -> StringAxisProfile:
    n = len(units)
    length = len(units[0]) if n else 0
    sets = sizes = hashes = codes = None
    if want_sets:
        sets = [frozenset(unit) for unit in units]
        sizes = np.array([len(s) for s in sets], dtype=np.int64)
    if want_hashes or want_codes:
        codes = np.zeros((n, length), dtype=np.uint64)
        for i, unit in enumerate(units):
            for j, tok in enumerate(unit):
                code = code_cache.get(tok)
                if code is None:
                    code = fnv1a64(tok)
                    code_cache[tok] = code
                codes[i, j] = code
        if want_hashes:
            hashes = np.zeros(n, dtype=np.uint64)
            for i in range(n):
                hashes[i] = _simhash_from_codes(codes[i])
        if not want_codes:
            codes = None
    return StringAxisProfile(n_units=n, sets=sets, sizes=sizes, hashes=hashes,
                             codes=codes)


def _simhash_from_codes(codes: np.ndarray) -> np.uint64:
    # Same bit-vote as simhash64, over distinct token hashes.
    distinct = np.unique(codes)
    bits = ((distinct[:, None] >> np.arange(64, dtype=np.uint64)[None, :]) & np.uint64(1))
    votes = 2 * bits.astype(np.int64).sum(axis=0) - len(distinct)
    out = np.uint64(0)
    for bit in np.nonzero(votes > 0)[0]:
        out |= np.uint64(1) << np.uint64(bit)
    return out


def _numeric_profile(matrix: np.ndarray) -> NumericAxisProfile:
    """Profile the rows of `matrix` as units (transpose first for columns)."""
    n = matrix.shape[0]
    sets = []
    counts = np.zeros(n, dtype=np.int64)
    means = np.zeros(n, dtype=np.float64)
    sds = np.zeros(n, dtype=np.float64)
    for i in range(n):
        vals = matrix[i]
        vals = vals[~np.isnan(vals)]
        sets.append(frozenset(vals.tolist()))
        counts[i] = vals.size
        if vals.size:
            means[i] = float(np.mean(vals))
            sds[i] = float(np.std(vals))
    return NumericAxisProfile(sets=sets, counts=counts, means=means, sds=sds)


def profile_view(view: TypedView, metrics=ALL_METRICS) -> ViewProfile:
    """Precompute the per-unit summaries the selected metrics need."""
    want_sets = (MetricId.JACCARD_STRING in metrics
                 or MetricId.TEXTRANK in metrics)
    want_hashes = MetricId.SIMHASH in metrics
    want_codes = MetricId.LEVENSHTEIN in metrics
    string_rows = string_cols = None
    if view.n_string_cols > 0 and (want_sets or want_hashes or want_codes):
        cache: dict = {}
        string_rows = _string_profile(view.string_sub, cache, want_sets,
                                      want_hashes, want_codes)
        cols = [[view.string_sub[i][j] for i in range(view.n_rows)]
                for j in range(view.n_string_cols)]
        string_cols = _string_profile(cols, cache, want_sets, want_hashes,
                                      want_codes)
    numeric_rows = numeric_cols = None
    if view.n_numeric_cols > 0 and any(m in metrics for m in NUMERIC_METRICS):
        numeric_rows = _numeric_profile(view.numeric_sub)
        numeric_cols = _numeric_profile(view.numeric_sub.T)
    return ViewProfile(
        string_rows=string_rows,
        string_cols=string_cols,
        numeric_rows=numeric_rows,
        numeric_cols=numeric_cols,
        view=view,
    )


# ---------------------------------------------------------------------------
# matrix builders
# ---------------------------------------------------------------------------

def _intersection_counts(sets_a: list, sets_b: list) -> np.ndarray:
    inter = np.zeros((len(sets_a), len(sets_b)), dtype=np.int64)
    for i, sa in enumerate(sets_a):
        if not sa:
            continue
        row = inter[i]
        for j, sb in enumerate(sets_b):
            if sb:
                row[j] = len(sa & sb)
    return inter


def _jaccard_from_counts(inter, sizes_a, sizes_b) -> np.ndarray:
    sa = sizes_a[:, None]
    sb = sizes_b[None, :]
    union = sa + sb - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    both_empty = (sa == 0) & (sb == 0)
    return np.where(both_empty, 1.0, out)


def _textrank_from_counts(inter, sizes_a, sizes_b, jac) -> np.ndarray:
    sa = np.maximum(sizes_a[:, None], 1)
    sb = np.maximum(sizes_b[None, :], 1)
    denom = np.log(sa) + np.log(sb)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > _EPS, inter / np.maximum(denom, _EPS), jac)
    degenerate = (sizes_a[:, None] <= 1) & (sizes_b[None, :] <= 1)
    empty = (sizes_a[:, None] == 0) | (sizes_b[None, :] == 0)
    return np.where(degenerate | empty, jac, out)


def _simhash_matrix(pa: StringAxisProfile, pb: StringAxisProfile) -> np.ndarray:
    xor = pa.hashes[:, None] ^ pb.hashes[None, :]
    return 1.0 - np.bitwise_count(xor).astype(np.float64) / 64.0


def _levenshtein_matrix(codes_a: np.ndarray, codes_b: np.ndarray) -> np.ndarray:
    """Token-level edit-distance similarity between every unit pair.

    All units on a side share one length, so the DP runs batched over all
    pairs at once; the in-row insertion dependency is resolved with a running
    minimum (cur[j] = j + min_{k<=j}(row[k] - k)).
    """
    na, len_a = codes_a.shape
    nb, len_b = codes_b.shape
    if len_a == 0 and len_b == 0:
        return np.ones((na, nb))
    if len_a == 0 or len_b == 0:
        return np.zeros((na, nb))
    out = np.empty((na, nb), dtype=np.float64)
    # Chunk over rows of A to bound DP state memory.
    chunk = max(1, 4_000_000 // (max(nb, 1) * (len_b + 1)))
    ar = np.arange(len_b + 1, dtype=np.int32)
    for start in range(0, na, chunk):
        stop = min(na, start + chunk)
        n_pairs = (stop - start) * nb
        b_tokens = np.broadcast_to(codes_b[None, :, :], (stop - start, nb, len_b))
        b_tokens = b_tokens.reshape(n_pairs, len_b)
        prev = np.broadcast_to(ar, (n_pairs, len_b + 1)).copy()
        row = np.empty_like(prev)
        for i in range(1, len_a + 1):
            a_tok = np.repeat(codes_a[start:stop, i - 1], nb)
            cost = (b_tokens != a_tok[:, None]).astype(np.int32)
            row[:, 0] = i
            np.minimum(prev[:, 1:] + 1, prev[:, :-1] + cost, out=row[:, 1:])
            row -= ar
            np.minimum.accumulate(row, axis=1, out=row)
            row += ar
            prev, row = row, prev
        dist = prev[:, -1].reshape(stop - start, nb)
        out[start:stop] = 1.0 - dist / float(len_a + len_b)
    return out


def _stat_matrix(vals_a, counts_a, vals_b, counts_b) -> np.ndarray:
    v1 = vals_a[:, None]
    v2 = vals_b[None, :]
    s = np.abs(v1 + v2)
    d = np.abs(v1 - v2)
    with np.errstate(divide="ignore", invalid="ignore"):
        core = np.clip(1.0 - d / np.maximum(s, _EPS), 0.0, 1.0)
    core = np.where(s <= _EPS, np.where(d <= _EPS, 1.0, 0.0), core)
    empty_a = counts_a[:, None] == 0
    empty_b = counts_b[None, :] == 0
    return np.where(empty_a & empty_b, 1.0, np.where(empty_a | empty_b, 0.0, core))


# ---------------------------------------------------------------------------
# matrix set
# ---------------------------------------------------------------------------

@dataclass
class SimilarityMatrix:
    metric: MetricId
    axis: Axis
    values: np.ndarray


@dataclass
class SimilarityMatrixSet:
    """All computed matrices for one table pair, plus the shape metadata
    needed to place column matrices back into original column coordinates."""

    pair_id: str
    matrices: dict
    a_n_rows: int
    a_n_cols: int
    b_n_rows: int
    b_n_cols: int
    a_string_col_map: tuple
    a_numeric_col_map: tuple
    b_string_col_map: tuple
    b_numeric_col_map: tuple

    def get(self, metric: MetricId, axis: Axis):
        return self.matrices.get((metric, axis))

    def ordered(self):
        """Yield (metric, axis, matrix-or-None) in canonical slot order."""
        for metric, axis in CANONICAL_ORDER:
            yield metric, axis, self.matrices.get((metric, axis))


def compute_matrix_set(
    v1: TypedView,
    v2: TypedView,
    pair_id: str = "",
    metrics=ALL_METRICS,
    profile_a: ViewProfile | None = None,
    profile_b: ViewProfile | None = None,
) -> SimilarityMatrixSet:
    """Compute every applicable (metric, axis) matrix between two views.

    String metrics need string columns on both sides; numeric metrics need
    numeric columns on both sides; anything else stays missing (and later
    pools to 0). Precomputed profiles may be passed in to amortize repeated
    comparisons against the same table.
    """
    pa = profile_a if profile_a is not None else profile_view(v1, metrics)
    pb = profile_b if profile_b is not None else profile_view(v2, metrics)
    matrices: dict = {}

    string_ok = v1.n_string_cols > 0 and v2.n_string_cols > 0
    numeric_ok = v1.n_numeric_cols > 0 and v2.n_numeric_cols > 0

    if string_ok:
        for axis, ua, ub in ((Axis.ROW, pa.string_rows, pb.string_rows),
                             (Axis.COL, pa.string_cols, pb.string_cols)):
            want_sets = (MetricId.JACCARD_STRING in metrics
                         or MetricId.TEXTRANK in metrics)
            jac = tr = None
            if want_sets:
                inter = _intersection_counts(ua.sets, ub.sets)
                jac = _jaccard_from_counts(inter, ua.sizes, ub.sizes)
                tr = _textrank_from_counts(inter, ua.sizes, ub.sizes, jac)
            if MetricId.JACCARD_STRING in metrics:
                matrices[(MetricId.JACCARD_STRING, axis)] = SimilarityMatrix(
                    MetricId.JACCARD_STRING, axis, jac)
            if MetricId.TEXTRANK in metrics:
                matrices[(MetricId.TEXTRANK, axis)] = SimilarityMatrix(
                    MetricId.TEXTRANK, axis, tr)
            if MetricId.SIMHASH in metrics:
                matrices[(MetricId.SIMHASH, axis)] = SimilarityMatrix(
                    MetricId.SIMHASH, axis, _simhash_matrix(ua, ub))
            if MetricId.LEVENSHTEIN in metrics:
                matrices[(MetricId.LEVENSHTEIN, axis)] = SimilarityMatrix(
                    MetricId.LEVENSHTEIN, axis,
                    _levenshtein_matrix(ua.codes, ub.codes))

    if numeric_ok:
        for axis, ua, ub in ((Axis.ROW, pa.numeric_rows, pb.numeric_rows),
                             (Axis.COL, pa.numeric_cols, pb.numeric_cols)):
            if MetricId.JACCARD_NUMERIC in metrics:
                inter = _intersection_counts(ua.sets, ub.sets)
                sizes_a = np.array([len(s) for s in ua.sets], dtype=np.int64)
                sizes_b = np.array([len(s) for s in ub.sets], dtype=np.int64)
                matrices[(MetricId.JACCARD_NUMERIC, axis)] = SimilarityMatrix(
                    MetricId.JACCARD_NUMERIC, axis,
                    _jaccard_from_counts(inter, sizes_a, sizes_b))
            if MetricId.MEAN in metrics:
                matrices[(MetricId.MEAN, axis)] = SimilarityMatrix(
                    MetricId.MEAN, axis,
                    _stat_matrix(ua.means, ua.counts, ub.means, ub.counts))
            if MetricId.SD in metrics:
                matrices[(MetricId.SD, axis)] = SimilarityMatrix(
                    MetricId.SD, axis,
                    _stat_matrix(ua.sds, ua.counts, ub.sds, ub.counts))

    return SimilarityMatrixSet(
        pair_id=pair_id,
        matrices=matrices,
        a_n_rows=v1.n_rows,
        a_n_cols=v1.n_cols,
        b_n_rows=v2.n_rows,
        b_n_cols=v2.n_cols,
        a_string_col_map=v1.string_col_map,
        a_numeric_col_map=v1.numeric_col_map,
        b_string_col_map=v2.string_col_map,
        b_numeric_col_map=v2.numeric_col_map,
    )


def matrix_to_json(m: SimilarityMatrix, pair_id: str) -> dict:
    """Debug/export form: row-major values plus identifying metadata."""
    return {
        "pair_id": pair_id,
        "metric": m.metric.value,
        "axis": m.axis.value,
        "shape": list(m.values.shape),
        "values": [float(v) for v in m.values.ravel()],
    }
