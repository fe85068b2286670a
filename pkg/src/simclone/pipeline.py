"""Shared orchestration: cached table profiles and corpus/directory featurization."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .corpus import TABLES_DIR, LABEL_CLONE, load_manifest
from .errors import ConfigError
from .featurize import PoolingConfig, featurize_pair
from .similarity import ALL_METRICS, compute_matrix_set, profile_view
from .table_io import LoadConfig, load_table, split_typed


class TableStore:
    """Loads and caches (table, typed view, profile) triples by table id.

    Seed tables are compared against many partners, so profiling each table
    exactly once dominates featurization cost savings. Profiles are built
    for the store's metric selection only.
    """

    def __init__(self, tables_dir, load_cfg: LoadConfig = LoadConfig(),
                 metrics=ALL_METRICS):
        self.tables_dir = Path(tables_dir)
        self.load_cfg = load_cfg
        self.metrics = frozenset(metrics)
        self._cache: dict = {}

    def get(self, table_id: str):
        entry = self._cache.get(table_id)
        if entry is None:
            table = load_table(self.tables_dir / f"{table_id}.csv", self.load_cfg,
                               table_id=table_id)
            view = split_typed(table, self.load_cfg)
            entry = (table, view, profile_view(view, self.metrics))
            self._cache[table_id] = entry
        return entry

    def matrix_set(self, a_id: str, b_id: str, pair_id: str, metrics=None):
        metrics = self.metrics if metrics is None else frozenset(metrics)
        if not metrics <= self.metrics:
            raise ConfigError("store profiles do not cover the requested metrics")
        _, view_a, prof_a = self.get(a_id)
        _, view_b, prof_b = self.get(b_id)
        return compute_matrix_set(view_a, view_b, pair_id, metrics,
                                  profile_a=prof_a, profile_b=prof_b)


# Per-process state for parallel featurization.
_WORKER_STORE: TableStore | None = None
_WORKER_ARGS: tuple = ()


def _worker_init(tables_dir, load_cfg, metrics, pooling):
    global _WORKER_STORE, _WORKER_ARGS
    _WORKER_STORE = TableStore(tables_dir, load_cfg, metrics)
    _WORKER_ARGS = (metrics, pooling)


def _worker_featurize(job):
    index, pair_id, a_id, b_id = job
    metrics, pooling = _WORKER_ARGS
    mset = _WORKER_STORE.matrix_set(a_id, b_id, pair_id, metrics)
    return index, featurize_pair(mset, pooling).values


def featurize_corpus(corpus_dir, metrics=ALL_METRICS,
                     pooling: PoolingConfig = PoolingConfig(),
                     load_cfg: LoadConfig = LoadConfig(),
                     jobs: int = 1, progress=None):
    """Featurize every pair of a generated corpus.

    Returns (pair_ids, X, labels) in manifest order, independent of the
    worker count. labels are 1 for clone, 0 for non-clone.
    """
    corpus_dir = Path(corpus_dir)
    _, records = load_manifest(corpus_dir)
    jobs_list = [(idx, r.pair_id, r.table_a_id, r.table_b_id)
                 for idx, r in enumerate(records)]
    values = _run_featurize(corpus_dir / TABLES_DIR, jobs_list, metrics,
                            pooling, load_cfg, jobs, progress)
    pair_ids = [r.pair_id for r in records]
    labels = [1 if r.label == LABEL_CLONE else 0 for r in records]
    return pair_ids, values, labels


def featurize_directory(dir_path, metrics=ALL_METRICS,
                        pooling: PoolingConfig = PoolingConfig(),
                        load_cfg: LoadConfig = LoadConfig(),
                        jobs: int = 1, progress=None):
    """Featurize all unordered pairs of the CSV tables in a directory.

    Returns (pairs, X) where pairs is a list of (table_a_id, table_b_id),
    in sorted-filename order.
    """
    dir_path = Path(dir_path)
    files = sorted(p for p in dir_path.iterdir() if p.suffix.lower() == ".csv")
    if len(files) < 2:
        raise ConfigError(f"{dir_path}: need at least 2 CSV tables")
    ids = [p.stem for p in files]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{dir_path}: duplicate table names")
    pairs = [(ids[i], ids[j]) for i in range(len(ids))
             for j in range(i + 1, len(ids))]
    jobs_list = [(idx, f"{a}__{b}", a, b) for idx, (a, b) in enumerate(pairs)]
    values = _run_featurize(dir_path, jobs_list, metrics, pooling, load_cfg,
                            jobs, progress)
    return pairs, values


def _run_featurize(tables_dir, jobs_list, metrics, pooling, load_cfg,
                   jobs, progress) -> np.ndarray:
    from .featurize import N_FEATURES

    out = np.zeros((len(jobs_list), N_FEATURES), dtype=np.float64)
    if not jobs_list:
        return out
    if jobs <= 1:
        store = TableStore(tables_dir, load_cfg, metrics)
        for done, (index, pair_id, a_id, b_id) in enumerate(jobs_list, start=1):
            mset = store.matrix_set(a_id, b_id, pair_id, metrics)
            out[index] = featurize_pair(mset, pooling).values
            if progress:
                progress("featurize", done, len(jobs_list))
    else:
        with ProcessPoolExecutor(
                max_workers=jobs, initializer=_worker_init,
                initargs=(tables_dir, load_cfg, metrics, pooling)) as pool:
            done = 0
            for index, values in pool.map(_worker_featurize, jobs_list,
                                          chunksize=32):
                out[index] = values
                done += 1
                if progress:
                    progress("featurize", done, len(jobs_list))
    return out


def load_tables_from_dir(dir_path, load_cfg: LoadConfig = LoadConfig()) -> list:
    """Load every CSV in a directory as a seed table, sorted by filename."""
    dir_path = Path(dir_path)
    files = sorted(p for p in dir_path.iterdir() if p.suffix.lower() == ".csv")
    tables = [load_table(p, load_cfg) for p in files]
    ids = [t.id for t in tables]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{dir_path}: duplicate table names")
    return tables


def pair_matrix_set(path_a, path_b, load_cfg: LoadConfig = LoadConfig(),
                    metrics=ALL_METRICS, pair_id: str | None = None):
    """Matrix set for two standalone table files."""
    table_a = load_table(path_a, load_cfg)
    table_b = load_table(path_b, load_cfg)
    if pair_id is None:
        pair_id = f"{table_a.id}__{table_b.id}"
    view_a = split_typed(table_a, load_cfg)
    view_b = split_typed(table_b, load_cfg)
    return compute_matrix_set(view_a, view_b, pair_id, metrics)
