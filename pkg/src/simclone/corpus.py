"""Synthetic clone-injected corpus generation.

From a list of seed tables, every (i, j) pair with j >= i yields one
generated table: a self-pair gets a consecutive block copied out of the seed
(an exact clone), a cross-pair gets scattered units of the larger table
injected into the smaller one. The injected fraction p is drawn on either
side of the labeling threshold t with equal probability, so generated
corpora stay close to a 1:1 clone/non-clone balance for any t.

Every pair carries a ground-truth manifest of exactly which source units
were cloned to which target positions, which is what localization scoring
evaluates against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .rng import substream
from .similarity import Axis
from .table_io import Table, write_table_csv

TYPE1 = "type1"
TYPE3 = "type3"
LABEL_CLONE = "clone"
LABEL_NONCLONE = "nonclone"

MANIFEST_NAME = "manifest.json"
TABLES_DIR = "tables"


@dataclass(frozen=True)
class InjectionConfig:
    threshold_t: float
    rng_seed: int
    axis_prob: float = 0.5  # probability of injecting rows rather than columns

    def __post_init__(self):
        if not 0.0 <= self.threshold_t <= 1.0:
            raise ConfigError("threshold_t must be in [0, 1]")
        if not 0.0 <= self.axis_prob <= 1.0:
            raise ConfigError("axis_prob must be in [0, 1]")


@dataclass
class CloneGroundTruth:
    axis: Axis
    source_indices: tuple  # unit indices in table A
    target_indices: tuple  # aligned unit indices in table B

    def __post_init__(self):
        if len(self.source_indices) != len(self.target_indices):
            raise ConfigError("ground truth index lists must align")


@dataclass
class PairRecord:
    pair_id: str
    table_a_id: str
    table_b_id: str
    injected_fraction_p: float
    clone_type: str
    label: str
    ground_truth: CloneGroundTruth | None


def _choose_axis(rng, axis_prob: float) -> Axis:
    return Axis.ROW if rng.random() < axis_prob else Axis.COL


def _rows_block(table: Table, start: int, length: int) -> list:
    return [list(row) for row in table.cells[start:start + length]]


def _cols_block(table: Table, start: int, length: int) -> list:
    return [row[start:start + length] for row in table.cells]


def _fit_row(row: list, width: int) -> list:
    if len(row) >= width:
        return row[:width]
    return row + [""] * (width - len(row))


def type1_inject(a: Table, p: float, rng, axis_prob: float = 0.5):
    """Copy a consecutive block of rows or columns of `a` into a new table.

    The block covers max(1, round(p * N)) units so even p = 0 produces a
    one-unit table. Returns the new table and the aligned ground truth.
    """
    axis = _choose_axis(rng, axis_prob)
    n_units = a.n_rows if axis == Axis.ROW else a.n_cols
    length = max(1, int(math.floor(p * n_units + 0.5)))
    start = int(rng.integers(0, n_units - length + 1))
    if axis == Axis.ROW:
        cells = _rows_block(a, start, length)
    else:
        cells = _cols_block(a, start, length)
    truth = CloneGroundTruth(
        axis=axis,
        source_indices=tuple(range(start, start + length)),
        target_indices=tuple(range(length)),
    )
    return Table(id="", source_path="", cells=cells), truth


def type3_inject(a: Table, b: Table, p: float, rng, axis_prob: float = 0.5):
    """Scatter sampled units of the larger table into the smaller one.

    ceil(p * N_source) units are sampled without replacement (not
    necessarily consecutive) and inserted one by one at uniformly random
    positions of the target, which is then truncated back to its original
    unit count from the tail. Injected rows are truncated or padded with
    empty cells to the target's width (columns analogously, to its height).

    Returns (generated_table, ground_truth, source_is_a); ground-truth source
    indices refer to the source table, target indices to the returned table.
    """
    axis = _choose_axis(rng, axis_prob)
    n_a = a.n_rows if axis == Axis.ROW else a.n_cols
    n_b = b.n_rows if axis == Axis.ROW else b.n_cols
    source_is_a = n_a >= n_b
    source, target = (a, b) if source_is_a else (b, a)
    n_source, n_target = max(n_a, n_b), min(n_a, n_b)

    count = math.ceil(p * n_source)
    sampled = [int(v) for v in rng.choice(n_source, size=count, replace=False)] \
        if count else []

    if axis == Axis.ROW:
        units = [(None, list(row)) for row in target.cells]
        width = target.n_cols
        for src_idx in sampled:
            pos = int(rng.integers(0, len(units) + 1))
            units.insert(pos, (src_idx, _fit_row(list(source.cells[src_idx]), width)))
        units = units[:n_target]
        cells = [u[1] for u in units]
    else:
        columns = [(None, target.column(j)) for j in range(target.n_cols)]
        height = target.n_rows
        for src_idx in sampled:
            pos = int(rng.integers(0, len(columns) + 1))
            columns.insert(pos, (src_idx, _fit_row(source.column(src_idx), height)))
        columns = columns[:n_target]
        units = columns
        cells = [[col[1][i] for col in columns] for i in range(height)]

    aligned = [(src, tgt) for tgt, (src, _) in enumerate(units) if src is not None]
    truth = CloneGroundTruth(
        axis=axis,
        source_indices=tuple(src for src, _ in aligned),
        target_indices=tuple(tgt for _, tgt in aligned),
    )
    return Table(id="", source_path="", cells=cells), truth, source_is_a


def _draw_p(rng, t: float) -> float:
    """Draw the injected fraction on either side of t with equal chance.

    At t = 0 the below-threshold interval is empty, so the draw always comes
    from [t, 1] (every pair labeled clone); t = 1 is the mirror case.
    """
    if t <= 0.0:
        return float(rng.uniform(0.0, 1.0))
    if t >= 1.0:
        return float(rng.uniform(0.0, t))
    p1 = float(rng.uniform(0.0, t))
    p2 = float(rng.uniform(t, 1.0))
    return p1 if rng.random() < 0.5 else p2


def generate_corpus(tables: list, cfg: InjectionConfig, out_dir) -> list:
    """Generate all (i, j >= i) pairs, materialize tables, write the manifest.

    Returns the pair records in (i, j) order. Each pair draws from its own
    counter-based substream keyed by (seed, i, j), so regeneration is
    byte-identical and pair generation is order-independent.
    """
    if len(tables) < 2:
        raise ConfigError("corpus generation needs at least 2 seed tables")
    ids = [t.id for t in tables]
    if len(set(ids)) != len(ids):
        raise ConfigError("seed table ids must be unique")

    out_dir = Path(out_dir)
    tables_dir = out_dir / TABLES_DIR
    tables_dir.mkdir(parents=True, exist_ok=True)
    for t in tables:
        write_table_csv(t, tables_dir / f"{t.id}.csv")

    records = []
    n = len(tables)
    for i in range(n):
        for j in range(i, n):
            rng = substream(cfg.rng_seed, i, j)
            p = _draw_p(rng, cfg.threshold_t)
            pair_id = f"p{i:04d}_{j:04d}"
            if i == j:
                generated, truth = type1_inject(tables[i], p, rng, cfg.axis_prob)
                a_table = tables[i]
                clone_type = TYPE1
            else:
                generated, truth, source_is_a = type3_inject(
                    tables[i], tables[j], p, rng, cfg.axis_prob)
                # Ground-truth source indices refer to the sampled-from table,
                # so that table is recorded as side A of the pair.
                a_table = tables[i] if source_is_a else tables[j]
                clone_type = TYPE3
            generated.id = f"{pair_id}_b"
            write_table_csv(generated, tables_dir / f"{generated.id}.csv")
            label = LABEL_CLONE if p >= cfg.threshold_t else LABEL_NONCLONE
            records.append(PairRecord(
                pair_id=pair_id,
                table_a_id=a_table.id,
                table_b_id=generated.id,
                injected_fraction_p=p,
                clone_type=clone_type,
                label=label,
                ground_truth=truth,
            ))

    write_manifest(out_dir, cfg, records)
    return records


def write_manifest(corpus_dir, cfg: InjectionConfig, records: list) -> None:
    doc = {
        "config": {
            "threshold_t": cfg.threshold_t,
            "rng_seed": cfg.rng_seed,
            "axis_prob": cfg.axis_prob,
        },
        "pairs": [
            {
                "pair_id": r.pair_id,
                "a": r.table_a_id,
                "b": r.table_b_id,
                "p": r.injected_fraction_p,
                "type": r.clone_type,
                "label": r.label,
                "ground_truth": None if r.ground_truth is None else {
                    "axis": r.ground_truth.axis.value,
                    "source_indices": list(r.ground_truth.source_indices),
                    "target_indices": list(r.ground_truth.target_indices),
                },
            }
            for r in records
        ],
    }
    path = Path(corpus_dir) / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(corpus_dir):
    """Read a corpus manifest; returns (config_dict, records)."""
    path = Path(corpus_dir) / MANIFEST_NAME
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    records = []
    for entry in doc["pairs"]:
        gt = entry.get("ground_truth")
        truth = None
        if gt is not None:
            truth = CloneGroundTruth(
                axis=Axis(gt["axis"]),
                source_indices=tuple(gt["source_indices"]),
                target_indices=tuple(gt["target_indices"]),
            )
        records.append(PairRecord(
            pair_id=entry["pair_id"],
            table_a_id=entry["a"],
            table_b_id=entry["b"],
            injected_fraction_p=entry["p"],
            clone_type=entry["type"],
            label=entry["label"],
            ground_truth=truth,
        ))
    return doc["config"], records
