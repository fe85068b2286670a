"""Command-line interface exposing the full detection pipeline.

Configuration precedence for every option: command-line flag, then a
SIMCLONE_* environment variable, then a TOML config file given with
--config, then the built-in default. The resolved configuration is echoed
as JSON beside every output so runs are reproducible from their artifacts.

Exit codes: 0 success, 1 runtime or I/O failure, 2 configuration error.
Progress lines go to standard error; data only goes to files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import corpus as corpus_mod
from . import localize as localize_mod
from . import metrics as metrics_mod
from . import pipeline
from . import shapley as shapley_mod
from .errors import ConfigError, SimCloneError
from .featurize import (
    PoolingConfig,
    read_feature_csv,
    resolve_metric_selection,
    write_feature_csv,
)
from .forest import (
    ForestConfig,
    cross_validate,
    load_model,
    predict_proba_batch,
    save_model,
    train_forest,
)
from .table_io import LoadConfig

ENV_PREFIX = "SIMCLONE_"


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean value {raw!r}")


class Resolver:
    """Merges flag, environment, config-file, and default values."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file_doc = {}
        config_path = getattr(args, "config", None)
        if config_path is None:
            config_path = os.environ.get(ENV_PREFIX + "CONFIG")
        if config_path:
            with open(config_path, "rb") as fh:
                self.file_doc = tomllib.load(fh)
        self.resolved: dict = {}

    def get(self, name: str, default, cast=str):
        key = name.replace("-", "_")
        value = getattr(self.args, key, None)
        if value is None:
            env = os.environ.get(ENV_PREFIX + key.upper())
            if env is not None:
                value = _parse_bool(env) if cast is bool else cast(env)
            elif key in self.file_doc:
                value = self.file_doc[key]
                if cast is not str and isinstance(value, str):
                    value = _parse_bool(value) if cast is bool else cast(value)
            else:
                value = default
        self.resolved[key] = value
        return value

    def echo(self, command: str, beside) -> None:
        doc = {"command": command, "options": _jsonable(self.resolved)}
        path = Path(beside)
        if path.is_dir():
            out = path / "run_config.json"
        else:
            out = path.with_name(path.name + ".run.json")
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _progress_printer():
    state = {"last": -1}

    def cb(stage: str, done: int, total: int):
        tick = done * 20 // max(total, 1)
        if tick != state["last"] or done == total:
            state["last"] = tick
            print(f"progress {stage} {done}/{total}", file=sys.stderr)

    return cb


def _load_cfg_from(res: Resolver) -> LoadConfig:
    return LoadConfig(
        max_rows=res.get("max-rows", 4000, int),
        max_cols=res.get("max-cols", 60, int),
        header_mode=res.get("header-mode", "none"),
        numeric_threshold=res.get("numeric-threshold", 0.95, float),
        delimiter=res.get("delimiter", ","),
    )


def _jobs_from(res: Resolver) -> int:
    jobs = res.get("jobs", 0, int)
    if jobs <= 0:
        jobs = os.cpu_count() or 1
    return jobs


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_inject(args) -> int:
    res = Resolver(args)
    seed_dir = res.get("seed-dir", None)
    out_dir = res.get("out", None)
    if not seed_dir or not out_dir:
        raise ConfigError("--seed-dir and --out are required")
    threshold = res.get("threshold", 0.1, float)
    seed = res.get("seed", 0, int)
    axis_prob = res.get("axis-prob", 0.5, float)
    load_cfg = _load_cfg_from(res)

    tables = pipeline.load_tables_from_dir(seed_dir, load_cfg)
    if len(tables) < 2:
        raise ConfigError(f"{seed_dir}: need at least 2 parseable seed tables")
    cfg = corpus_mod.InjectionConfig(threshold_t=threshold, rng_seed=seed,
                                     axis_prob=axis_prob)
    records = corpus_mod.generate_corpus(tables, cfg, out_dir)
    res.echo("inject", out_dir)
    print(f"progress inject {len(records)}/{len(records)}", file=sys.stderr)
    return 0


def cmd_featurize(args) -> int:
    res = Resolver(args)
    corpus_dir = res.get("corpus", None)
    pairs_list = res.get("pairs-list", None)
    out = res.get("out", None)
    if not out:
        raise ConfigError("--out is required")
    if bool(corpus_dir) == bool(pairs_list):
        raise ConfigError("exactly one of --corpus or --pairs-list is required")
    metrics = resolve_metric_selection(res.get("metrics", "all"))
    pooling = PoolingConfig(k=res.get("k", 10, int))
    load_cfg = _load_cfg_from(res)
    jobs = _jobs_from(res)
    progress = _progress_printer()

    if corpus_dir:
        pair_ids, X, labels = pipeline.featurize_corpus(
            corpus_dir, metrics, pooling, load_cfg, jobs, progress)
        rows = list(zip(pair_ids, X, labels))
    else:
        rows = []
        with open(pairs_list, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["a", "b"]:
                raise ConfigError(f"{pairs_list}: expected a CSV with header a,b")
            pair_paths = [(row[0], row[1]) for row in reader if row]
        for done, (path_a, path_b) in enumerate(pair_paths, start=1):
            mset = pipeline.pair_matrix_set(path_a, path_b, load_cfg, metrics)
            from .featurize import featurize_pair
            fv = featurize_pair(mset, pooling)
            rows.append((fv.pair_id, fv.values, None))
            progress("featurize", done, len(pair_paths))
    write_feature_csv(out, rows)
    res.echo("featurize", out)
    return 0


def _labeled_training_data(features_path):
    pair_ids, X, labels = read_feature_csv(features_path)
    keep = [i for i, lab in enumerate(labels) if lab is not None]
    if len(keep) < len(labels):
        print(f"progress train skipping {len(labels) - len(keep)} unlabeled rows",
              file=sys.stderr)
    if not keep:
        raise ConfigError(f"{features_path}: no labeled rows")
    X = X[keep]
    y = np.array([labels[i] for i in keep], dtype=np.int64)
    ids = [pair_ids[i] for i in keep]
    return ids, X, y


def _forest_cfg_from(res: Resolver) -> ForestConfig:
    max_depth = res.get("max-depth", 0, int)
    return ForestConfig(
        n_trees=res.get("trees", 100, int),
        max_depth=None if max_depth <= 0 else max_depth,
        min_leaf=res.get("min-leaf", 1, int),
        features_per_split=res.get("features-per-split", 3, int),
        bootstrap=res.get("bootstrap", True, bool),
        rng_seed=res.get("seed", 0, int),
    )


def cmd_train(args) -> int:
    res = Resolver(args)
    features = res.get("features", None)
    model_out = res.get("model-out", None)
    if not features or not model_out:
        raise ConfigError("--features and --model-out are required")
    cfg = _forest_cfg_from(res)
    bg_size = res.get("background-size", 100, int)

    _, X, y = _labeled_training_data(features)
    model = train_forest(X, y, cfg)
    save_model(model, model_out)
    bg = shapley_mod.background_from_training(X, size=bg_size, seed=cfg.rng_seed)
    shapley_mod.save_background(bg, str(model_out) + ".background.json")
    res.echo("train", model_out)
    return 0


def cmd_crossval(args) -> int:
    res = Resolver(args)
    features = res.get("features", None)
    out = res.get("out", None)
    if not features or not out:
        raise ConfigError("--features and --out are required")
    folds = res.get("folds", 10, int)
    stratified = res.get("stratified", False, bool)
    cfg = _forest_cfg_from(res)

    _, X, y = _labeled_training_data(features)
    report = cross_validate(X, y, k=folds, cfg=cfg, stratified=stratified)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("fold",) + report.METRICS)
        for f, fold in enumerate(report.folds):
            writer.writerow([f] + [repr(fold[m]) for m in report.METRICS])
        writer.writerow(["mean"] + [repr(report.mean[m]) for m in report.METRICS])
    res.echo("crossval", out)
    return 0


def cmd_detect(args) -> int:
    res = Resolver(args)
    model_path = res.get("model", None)
    table_dir = res.get("dir", None)
    out = res.get("out", None)
    if not model_path or not table_dir or not out:
        raise ConfigError("--model, --dir and --out are required")
    top = res.get("top", 0, int)
    metrics = resolve_metric_selection(res.get("metrics", "all"))
    pooling = PoolingConfig(k=res.get("k", 10, int))
    load_cfg = _load_cfg_from(res)
    jobs = _jobs_from(res)

    model = load_model(model_path)
    pairs, X = pipeline.featurize_directory(
        table_dir, metrics, pooling, load_cfg, jobs, _progress_printer())
    probs = predict_proba_batch(model, X)
    ranked = metrics_mod.RankedPairList.from_scores(
        [(f"{a}__{b}", float(p)) for (a, b), p in zip(pairs, probs)])
    entries = ranked.entries if top <= 0 else ranked.entries[:top]
    id_to_pair = {f"{a}__{b}": (a, b) for a, b in pairs}
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("rank", "table_a", "table_b", "probability"))
        for rank, (pair_id, prob) in enumerate(entries, start=1):
            a, b = id_to_pair[pair_id]
            writer.writerow((rank, a, b, repr(prob)))
    res.echo("detect", out)
    return 0


def _load_background(res: Resolver, model_path) -> shapley_mod.BackgroundSet:
    bg_path = res.get("background", None)
    if bg_path is None:
        candidate = Path(str(model_path) + ".background.json")
        if not candidate.exists():
            raise ConfigError(
                "no background set: pass --background or train with this CLI "
                "so the sidecar background file exists")
        bg_path = candidate
    return shapley_mod.load_background(bg_path)


def cmd_localize(args) -> int:
    res = Resolver(args)
    model_path = res.get("model", None)
    out_svg = res.get("out-svg", None)
    if not model_path or not out_svg:
        raise ConfigError("--model and --out-svg are required")
    pair = getattr(args, "pair", None)
    if not pair or len(pair) != 2:
        raise ConfigError("--pair needs exactly two table paths")
    res.resolved["pair"] = list(pair)
    mode = res.get("mode", localize_mod.MODE_SHAP)
    out_json = res.get("out-json", None)
    attribution_out = res.get("attribution-out", None)
    pooling = PoolingConfig(k=res.get("k", 10, int))
    load_cfg = _load_cfg_from(res)

    model = load_model(model_path)
    mset = pipeline.pair_matrix_set(pair[0], pair[1], load_cfg)
    from .featurize import featurize_pair
    fv = featurize_pair(mset, pooling)

    attribution = None
    if mode == localize_mod.MODE_SHAP:
        bg = _load_background(res, model_path)
        attribution = shapley_mod.shapley_exact(model, fv.values, bg)
        if attribution_out:
            with open(attribution_out, "w", encoding="utf-8") as fh:
                json.dump(shapley_mod.attribution_to_json(attribution, fv.pair_id),
                          fh, sort_keys=True)
                fh.write("\n")
    vis = localize_mod.build_vis(mset, attribution, mode)
    localize_mod.render_heatmap(vis, out_svg)
    if out_json:
        localize_mod.save_vis_json(vis, out_json)
    res.echo("localize", out_svg)
    return 0


def cmd_eval_localization(args) -> int:
    res = Resolver(args)
    model_path = res.get("model", None)
    corpus_dir = res.get("corpus", None)
    out = res.get("out", None)
    if not model_path or not corpus_dir or not out:
        raise ConfigError("--model, --corpus and --out are required")
    ks = [int(v) for v in str(res.get("k", "1,5,10")).split(",") if v.strip()]
    budgets_raw = [v.strip() for v in str(res.get("top-pairs", "20")).split(",")]
    modes = [m.strip() for m in str(res.get("modes", "shap,uniform")).split(",")]
    features_csv = res.get("features", None)
    pooling = PoolingConfig(k=res.get("pool-k", 10, int))
    load_cfg = _load_cfg_from(res)
    jobs = _jobs_from(res)
    progress = _progress_printer()

    for m in modes:
        if m not in (localize_mod.MODE_SHAP, localize_mod.MODE_UNIFORM):
            raise ConfigError(f"unknown mode {m!r}")

    model = load_model(model_path)
    _, records = corpus_mod.load_manifest(corpus_dir)
    by_id = {r.pair_id: r for r in records}

    if features_csv:
        pair_ids, X, _ = read_feature_csv(features_csv)
        missing = [p for p in pair_ids if p not in by_id]
        if missing:
            raise ConfigError(f"feature rows not in manifest: {missing[:3]}")
    else:
        pair_ids, X, _ = pipeline.featurize_corpus(
            corpus_dir, pooling=pooling, load_cfg=load_cfg, jobs=jobs,
            progress=progress)
    probs = predict_proba_batch(model, X)
    row_of = {pid: i for i, pid in enumerate(pair_ids)}

    true_positives = sorted(
        ((pid, float(p)) for pid, p in zip(pair_ids, probs)
         if by_id[pid].label == corpus_mod.LABEL_CLONE and p >= 0.5),
        key=lambda e: (-e[1], e[0]))

    budgets = []
    for b in budgets_raw:
        budgets.append(len(true_positives) if b == "all" else int(b))
    max_needed = min(max(budgets) if budgets else 0, len(true_positives))

    bg = _load_background(res, model_path) if localize_mod.MODE_SHAP in modes else None
    store = pipeline.TableStore(Path(corpus_dir) / corpus_mod.TABLES_DIR, load_cfg)
    reports: dict = {m: [] for m in modes}
    for done, (pid, _) in enumerate(true_positives[:max_needed], start=1):
        record = by_id[pid]
        mset = store.matrix_set(record.table_a_id, record.table_b_id, pid)
        attribution = None
        if localize_mod.MODE_SHAP in modes:
            attribution = shapley_mod.shapley_exact(model, X[row_of[pid]], bg)
        for m in modes:
            vis = localize_mod.build_vis(
                mset, attribution if m == localize_mod.MODE_SHAP else None, m)
            reports[m].append(localize_mod.localization_precision_at_k(
                vis, record.ground_truth, ks))
        progress("localize", done, max_needed)

    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("top_pairs", "mode", "k", "precision", "n_pairs"))
        for budget in budgets:
            for m in modes:
                subset = reports[m][:budget]
                for k in ks:
                    value = (float(np.mean([r.precisions[k] for r in subset]))
                             if subset else 0.0)
                    writer.writerow((budget, m, k, repr(value), len(subset)))
    for m in modes:
        localize_mod.write_localization_csv(f"{out}.{m}.pairs.csv", reports[m])
    res.echo("eval-localization", out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sub, *names):
    sub.add_argument("--config", help="TOML config file mirroring the flags")
    if "load" in names:
        sub.add_argument("--max-rows", type=int)
        sub.add_argument("--max-cols", type=int)
        sub.add_argument("--header-mode", choices=["none", "first-row-is-header"])
        sub.add_argument("--numeric-threshold", type=float)
        sub.add_argument("--delimiter")
    if "jobs" in names:
        sub.add_argument("--jobs", type=int,
                         help="worker processes (default: logical cores)")
    if "forest" in names:
        sub.add_argument("--trees", type=int)
        sub.add_argument("--max-depth", type=int)
        sub.add_argument("--min-leaf", type=int)
        sub.add_argument("--features-per-split", type=int)
        sub.add_argument("--bootstrap", action=argparse.BooleanOptionalAction,
                         default=None)
        sub.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simclone",
        description="Detect and localize data clones between tabular datasets "
                    "using cell-value similarity.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("inject", help="generate a labeled clone-injected corpus")
    p.add_argument("--seed-dir")
    p.add_argument("--out")
    p.add_argument("--threshold", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--axis-prob", type=float)
    _add_common(p, "load")
    p.set_defaults(func=cmd_inject)

    p = subs.add_parser("featurize", help="pool similarity matrices into feature CSV")
    p.add_argument("--corpus")
    p.add_argument("--pairs-list")
    p.add_argument("--out")
    p.add_argument("--metrics", help="all | lite | comma list")
    p.add_argument("--k", type=int, help="pooling K")
    _add_common(p, "load", "jobs")
    p.set_defaults(func=cmd_featurize)

    p = subs.add_parser("train", help="train the forest on a feature CSV")
    p.add_argument("--features")
    p.add_argument("--model-out")
    p.add_argument("--background-size", type=int)
    _add_common(p, "forest")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("crossval", help="k-fold cross-validation report")
    p.add_argument("--features")
    p.add_argument("--folds", type=int)
    p.add_argument("--stratified", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--out")
    _add_common(p, "forest")
    p.set_defaults(func=cmd_crossval)

    p = subs.add_parser("detect", help="rank all table pairs in a directory")
    p.add_argument("--model")
    p.add_argument("--dir")
    p.add_argument("--top", type=int)
    p.add_argument("--out")
    p.add_argument("--metrics")
    p.add_argument("--k", type=int)
    _add_common(p, "load", "jobs")
    p.set_defaults(func=cmd_detect)

    p = subs.add_parser("localize", help="heatmap for one table pair")
    p.add_argument("--model")
    p.add_argument("--pair", nargs=2, metavar=("A", "B"))
    p.add_argument("--mode", choices=["shap", "uniform"])
    p.add_argument("--out-svg")
    p.add_argument("--out-json")
    p.add_argument("--attribution-out")
    p.add_argument("--background")
    p.add_argument("--k", type=int)
    _add_common(p, "load")
    p.set_defaults(func=cmd_localize)

    p = subs.add_parser("eval-localization",
                        help="P@K of localization on a labeled corpus")
    p.add_argument("--model")
    p.add_argument("--corpus")
    p.add_argument("--features", help="reuse a precomputed feature CSV")
    p.add_argument("--k")
    p.add_argument("--top-pairs")
    p.add_argument("--modes")
    p.add_argument("--pool-k", type=int)
    p.add_argument("--background")
    p.add_argument("--out")
    _add_common(p, "load", "jobs")
    p.set_defaults(func=cmd_eval_localization)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimCloneError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
