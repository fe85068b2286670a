"""Clone localization: attribution-weighted similarity heatmaps and P@K.

The 14 similarity matrices of a pair are collapsed into one row-space matrix
and one column-space matrix by weighting each metric's matrix with its
attribution value (or a uniform weight for the baseline) and averaging over
the 7 metric slots per axis. Column matrices are scattered back into original
column coordinates first, since string and numeric sub-tables index different
column subsets. High cells in the combined matrices mark likely clone
locations; ranking all cells against the injection ground truth yields
precision@K.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .corpus import CloneGroundTruth
from .errors import ConfigError, InternalError
from .similarity import (
    CANONICAL_ORDER,
    METRIC_ORDER,
    NUMERIC_METRICS,
    Axis,
    MetricId,
    SimilarityMatrixSet,
)

MODE_SHAP = "shap"
MODE_UNIFORM = "uniform"

_N_METRICS = len(METRIC_ORDER)
_SLOT = {pair: i for i, pair in enumerate(CANONICAL_ORDER)}


@dataclass
class VisMatrices:
    pair_id: str
    mode: str
    m_row: np.ndarray  # (n_rows of A, n_rows of B)
    m_col: np.ndarray  # (n_cols of A, n_cols of B), original coordinates


@dataclass
class LocalizationReport:
    pair_id: str
    mode: str
    ks: tuple
    precisions: dict   # k -> precision
    degenerate: bool   # empty ground truth


def _col_coordinates(mset: SimilarityMatrixSet, metric: MetricId):
    if metric in NUMERIC_METRICS:
        return mset.a_numeric_col_map, mset.b_numeric_col_map
    return mset.a_string_col_map, mset.b_string_col_map


def build_vis(mset: SimilarityMatrixSet, attribution=None,
              mode: str = MODE_SHAP) -> VisMatrices:
    """Average the per-metric matrices per axis, weighted by attribution
    (mode "shap") or by 1 for every slot (mode "uniform"). Missing matrices
    contribute zero. Combined entries are clamped below at 0 so negative
    weights can only mute a region, never rank it."""
    if mode not in (MODE_SHAP, MODE_UNIFORM):
        raise ConfigError(f"unknown visualization mode: {mode!r}")
    if mode == MODE_SHAP:
        if attribution is None:
            raise ConfigError("shap mode needs an attribution vector")
        phi = np.asarray(
            attribution.phi if hasattr(attribution, "phi") else attribution,
            dtype=np.float64)
        if phi.shape != (len(CANONICAL_ORDER),):
            raise ConfigError("attribution must cover all 14 feature slots")

    m_row = np.zeros((mset.a_n_rows, mset.b_n_rows), dtype=np.float64)
    m_col = np.zeros((mset.a_n_cols, mset.b_n_cols), dtype=np.float64)
    for metric in METRIC_ORDER:
        for axis, acc in ((Axis.ROW, m_row), (Axis.COL, m_col)):
            matrix = mset.get(metric, axis)
            if matrix is None:
                continue
            weight = 1.0 if mode == MODE_UNIFORM else float(phi[_SLOT[(metric, axis)]])
            if axis == Axis.ROW:
                if matrix.values.shape != acc.shape:
                    raise InternalError("row matrix shape mismatch")
                acc += weight * matrix.values
            else:
                a_map, b_map = _col_coordinates(mset, metric)
                if matrix.values.shape != (len(a_map), len(b_map)):
                    raise InternalError("column matrix shape mismatch")
                acc[np.ix_(a_map, b_map)] += weight * matrix.values
    m_row /= _N_METRICS
    m_col /= _N_METRICS
    np.clip(m_row, 0.0, None, out=m_row)
    np.clip(m_col, 0.0, None, out=m_col)
    return VisMatrices(pair_id=mset.pair_id, mode=mode, m_row=m_row, m_col=m_col)


def vis_to_json(vis: VisMatrices) -> dict:
    return {
        "pair_id": vis.pair_id,
        "mode": vis.mode,
        "m_row": [[float(v) for v in row] for row in vis.m_row],
        "m_col": [[float(v) for v in row] for row in vis.m_col],
    }


# ---------------------------------------------------------------------------
# ranking against ground truth
# ---------------------------------------------------------------------------

def ranked_cells(vis: VisMatrices) -> list:
    """All cells of both matrices ranked by value descending; ties broken by
    (axis, i, j) with rows before columns, so repeated runs rank identically.

    Returns (axis, i, j, value) tuples.
    """
    parts = []
    for code, axis, m in ((0, Axis.ROW, vis.m_row), (1, Axis.COL, vis.m_col)):
        if m.size == 0:
            continue
        n_rows, n_cols = m.shape
        flat = m.ravel()
        i_idx, j_idx = np.divmod(np.arange(flat.size), n_cols)
        parts.append((np.full(flat.size, code), i_idx, j_idx, flat, axis))
    if not parts:
        return []
    axis_code = np.concatenate([p[0] for p in parts])
    i_all = np.concatenate([p[1] for p in parts])
    j_all = np.concatenate([p[2] for p in parts])
    v_all = np.concatenate([p[3] for p in parts])
    order = np.lexsort((j_all, i_all, axis_code, -v_all))
    axes = (Axis.ROW, Axis.COL)
    return [(axes[int(axis_code[p])], int(i_all[p]), int(j_all[p]), float(v_all[p]))
            for p in order]


def localization_precision_at_k(vis: VisMatrices, truth: CloneGroundTruth,
                                ks) -> LocalizationReport:
    """P@K over the pooled row+column cell ranking: a ranked cell is a hit
    iff its axis matches the ground truth axis and (i, j) is an aligned
    (source, target) pair."""
    ks = tuple(int(k) for k in ks)
    if any(k < 1 for k in ks):
        raise ConfigError("every K must be >= 1")
    truth_cells = set(zip(truth.source_indices, truth.target_indices))
    if not truth_cells:
        return LocalizationReport(vis.pair_id, vis.mode, ks,
                                  {k: 0.0 for k in ks}, degenerate=True)
    top = ranked_cells(vis)[:max(ks)]
    hits = np.cumsum([
        1 if axis == truth.axis and (i, j) in truth_cells else 0
        for axis, i, j, _ in top
    ])
    precisions = {}
    for k in ks:
        got = int(hits[min(k, len(top)) - 1]) if len(top) else 0
        precisions[k] = got / k
    return LocalizationReport(vis.pair_id, vis.mode, ks, precisions,
                              degenerate=False)


# ---------------------------------------------------------------------------
# SVG rendering
# ---------------------------------------------------------------------------

_LIGHT = (247, 251, 255)
_DARK = (8, 48, 107)
_CAPTION_H = 26
_TITLE_H = 16
_MARGIN = 34
_GAP = 40


def _fill(intensity: float) -> str:
    r = round(_LIGHT[0] + (_DARK[0] - _LIGHT[0]) * intensity)
    g = round(_LIGHT[1] + (_DARK[1] - _LIGHT[1]) * intensity)
    b = round(_LIGHT[2] + (_DARK[2] - _LIGHT[2]) * intensity)
    return f"rgb({r},{g},{b})"


def _panel(m: np.ndarray, title: str, x0: float, y0: float, parts: list) -> tuple:
    parts.append(f'<text x="{x0}" y="{y0 - 4}" font-size="12" '
                 f'font-family="monospace">{escape(title)}</text>')
    if m.size == 0:
        parts.append(f'<rect x="{x0}" y="{y0}" width="120" height="60" '
                     f'fill="none" stroke="#999"/>')
        parts.append(f'<text x="{x0 + 12}" y="{y0 + 34}" font-size="11" '
                     f'fill="#666">no data</text>')
        return 120.0, 60.0
    n_rows, n_cols = m.shape
    cell = max(3.0, min(18.0, 520.0 / max(n_rows, n_cols)))
    mn, mx = float(m.min()), float(m.max())
    span = mx - mn
    for i in range(n_rows):
        y = y0 + i * cell
        for j in range(n_cols):
            # min = max degenerates to a flat mid-scale panel
            inten = 0.5 if span <= 0 else (float(m[i, j]) - mn) / span
            parts.append(
                f'<rect x="{x0 + j * cell:.2f}" y="{y:.2f}" '
                f'width="{cell:.2f}" height="{cell:.2f}" fill="{_fill(inten)}"/>')
    step_i = max(1, -(-n_rows // 8))
    step_j = max(1, -(-n_cols // 8))
    for i in range(0, n_rows, step_i):
        parts.append(f'<text x="{x0 - 4:.2f}" y="{y0 + (i + 0.8) * cell:.2f}" '
                     f'font-size="8" text-anchor="end" fill="#444">{i}</text>')
    for j in range(0, n_cols, step_j):
        parts.append(f'<text x="{x0 + (j + 0.2) * cell:.2f}" '
                     f'y="{y0 + n_rows * cell + 10:.2f}" font-size="8" '
                     f'fill="#444">{j}</text>')
    return n_cols * cell, n_rows * cell + 12


def render_heatmap(vis: VisMatrices, out_path) -> None:
    """Two min-max normalized single-hue grids (row space, column space)
    with index ticks and a caption naming the pair and weighting mode."""
    parts: list = []
    caption = f"pair {vis.pair_id} ({vis.mode} weighting)"
    x = _MARGIN
    y = _CAPTION_H + _TITLE_H
    w1, h1 = _panel(vis.m_row, "rows", x, y, parts)
    x2 = x + w1 + _GAP
    w2, h2 = _panel(vis.m_col, "columns", x2, y, parts)
    width = x2 + w2 + _MARGIN
    height = y + max(h1, h2) + _MARGIN
    header = (f'<svg xmlns="http://www.w3.org/2000/svg" '
              f'width="{width:.0f}" height="{height:.0f}" '
              f'viewBox="0 0 {width:.0f} {height:.0f}">')
    caption_el = (f'<text x="{_MARGIN}" y="18" font-size="13" '
                  f'font-family="monospace">{escape(caption)}</text>')
    svg = "\n".join([header, caption_el, *parts, "</svg>"])
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(svg + "\n")


def write_localization_csv(path, reports: list) -> None:
    """Per-pair detail rows: pair_id, k, precision (one file per mode)."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("pair_id", "k", "precision"))
        for rep in reports:
            for k in rep.ks:
                writer.writerow((rep.pair_id, k, repr(rep.precisions[k])))


def save_vis_json(vis: VisMatrices, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vis_to_json(vis), fh, sort_keys=True)
        fh.write("\n")
