import csv
import json
import xml.dom.minidom
from pathlib import Path

import numpy as np
import pytest

from simclone.cli import main
from simclone.featurize import FEATURE_NAMES, read_feature_csv
from simclone.table_io import write_table_csv


@pytest.fixture(scope="module")
def seed_dir(tmp_path_factory, small_seed_tables):
    d = tmp_path_factory.mktemp("seeds")
    for t in small_seed_tables:
        write_table_csv(t, d / f"{t.id}.csv")
    return d


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, seed_dir):
    """One full CLI pipeline run shared by the assertions below."""
    ws = tmp_path_factory.mktemp("ws")
    corpus = ws / "corpus"
    feats = ws / "features.csv"
    model = ws / "model.json"
    assert main(["inject", "--seed-dir", str(seed_dir), "--out", str(corpus),
                 "--threshold", "0.1", "--seed", "11"]) == 0
    assert main(["featurize", "--corpus", str(corpus), "--out", str(feats),
                 "--jobs", "1"]) == 0
    assert main(["train", "--features", str(feats), "--model-out", str(model),
                 "--trees", "30", "--seed", "4"]) == 0
    return {"ws": ws, "corpus": corpus, "features": feats, "model": model,
            "seed_dir": seed_dir}


class TestInject:
    def test_manifest_and_config_echo(self, workspace):
        manifest = json.loads((workspace["corpus"] / "manifest.json").read_text())
        n = len(list(workspace["seed_dir"].glob("*.csv")))
        assert len(manifest["pairs"]) == n * (n + 1) // 2
        echo = json.loads((workspace["corpus"] / "run_config.json").read_text())
        assert echo["command"] == "inject"
        assert echo["options"]["threshold"] == 0.1

    def test_deterministic_across_runs(self, workspace, tmp_path):
        out2 = tmp_path / "corpus2"
        assert main(["inject", "--seed-dir", str(workspace["seed_dir"]),
                     "--out", str(out2), "--threshold", "0.1", "--seed", "11"]) == 0
        m1 = (workspace["corpus"] / "manifest.json").read_bytes()
        assert m1 == (out2 / "manifest.json").read_bytes()

    def test_config_error_exit_code(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["inject", "--seed-dir", str(empty),
                     "--out", str(tmp_path / "c")]) == 2

    def test_io_error_exit_code(self, tmp_path):
        assert main(["inject", "--seed-dir", str(tmp_path / "missing"),
                     "--out", str(tmp_path / "c")]) == 1


class TestFeaturize:
    def test_feature_csv_schema(self, workspace):
        ids, X, labels = read_feature_csv(workspace["features"])
        manifest = json.loads((workspace["corpus"] / "manifest.json").read_text())
        assert len(ids) == len(manifest["pairs"])
        assert X.shape == (len(ids), 14)
        assert set(labels) <= {0, 1}

    def test_deterministic_bytes(self, workspace, tmp_path):
        out2 = tmp_path / "f2.csv"
        assert main(["featurize", "--corpus", str(workspace["corpus"]),
                     "--out", str(out2), "--jobs", "1"]) == 0
        assert workspace["features"].read_bytes() == out2.read_bytes()

    def test_output_independent_of_jobs(self, workspace, tmp_path):
        out2 = tmp_path / "f_par.csv"
        assert main(["featurize", "--corpus", str(workspace["corpus"]),
                     "--out", str(out2), "--jobs", "2"]) == 0
        assert workspace["features"].read_bytes() == out2.read_bytes()

    def test_lite_zeroes_slots(self, workspace, tmp_path):
        out = tmp_path / "lite.csv"
        assert main(["featurize", "--corpus", str(workspace["corpus"]),
                     "--out", str(out), "--metrics", "lite"]) == 0
        _, X, _ = read_feature_csv(out)
        for name in ("f_row_simhash", "f_row_levenshtein", "f_col_simhash",
                     "f_col_levenshtein"):
            assert np.all(X[:, FEATURE_NAMES.index(name)] == 0.0)
        assert X[:, FEATURE_NAMES.index("f_row_jaccard_str")].max() > 0.0

    def test_requires_exactly_one_input(self, workspace, tmp_path):
        assert main(["featurize", "--out", str(tmp_path / "x.csv")]) == 2
        assert main(["featurize", "--corpus", str(workspace["corpus"]),
                     "--pairs-list", "x", "--out", str(tmp_path / "x.csv")]) == 2

    def test_pairs_list_mode(self, workspace, tmp_path):
        tables = sorted((workspace["corpus"] / "tables").glob("seed*.csv"))[:3]
        pairs_file = tmp_path / "pairs.csv"
        with open(pairs_file, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b"])
            w.writerow([str(tables[0]), str(tables[1])])
            w.writerow([str(tables[0]), str(tables[2])])
        out = tmp_path / "pl.csv"
        assert main(["featurize", "--pairs-list", str(pairs_file),
                     "--out", str(out)]) == 0
        ids, X, labels = read_feature_csv(out)
        assert len(ids) == 2
        assert labels == [None, None]


class TestTrainAndCrossval:
    def test_model_and_background_written(self, workspace):
        assert workspace["model"].exists()
        doc = json.loads(workspace["model"].read_text())
        assert set(doc) == {"format_version", "feature_order", "config", "trees"}
        assert doc["feature_order"] == list(FEATURE_NAMES)
        bg = json.loads(Path(str(workspace["model"]) + ".background.json").read_text())
        assert len(bg["rows"][0]) == 14

    def test_deterministic_model(self, workspace, tmp_path):
        m2 = tmp_path / "m2.json"
        assert main(["train", "--features", str(workspace["features"]),
                     "--model-out", str(m2), "--trees", "30", "--seed", "4"]) == 0
        assert workspace["model"].read_bytes() == m2.read_bytes()

    def test_crossval_report(self, workspace, tmp_path):
        out = tmp_path / "cv.csv"
        assert main(["crossval", "--features", str(workspace["features"]),
                     "--folds", "4", "--trees", "20", "--seed", "4",
                     "--out", str(out)]) == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 5
        assert rows[-1]["fold"] == "mean"
        assert 0.0 <= float(rows[-1]["f1"]) <= 1.0


class TestDetect:
    def test_ranked_output(self, workspace, tmp_path):
        table_dir = tmp_path / "tables"
        table_dir.mkdir()
        src = sorted((workspace["seed_dir"]).glob("*.csv"))[:3]
        for f in src:
            (table_dir / f.name).write_bytes(f.read_bytes())
        # a duplicated table must rank first
        (table_dir / "copycat.csv").write_bytes(src[0].read_bytes())
        out = tmp_path / "det.csv"
        assert main(["detect", "--model", str(workspace["model"]),
                     "--dir", str(table_dir), "--out", str(out)]) == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 6  # C(4,2)
        assert {rows[0]["table_a"], rows[0]["table_b"]} == \
            {"copycat", src[0].stem}
        probs = [float(r["probability"]) for r in rows]
        assert probs == sorted(probs, reverse=True)

    def test_top_truncation(self, workspace, tmp_path):
        table_dir = tmp_path / "tables"
        table_dir.mkdir()
        for f in sorted((workspace["seed_dir"]).glob("*.csv"))[:4]:
            (table_dir / f.name).write_bytes(f.read_bytes())
        out = tmp_path / "det.csv"
        assert main(["detect", "--model", str(workspace["model"]),
                     "--dir", str(table_dir), "--top", "3",
                     "--out", str(out)]) == 0
        assert len(list(csv.DictReader(open(out)))) == 3

    def test_needs_two_tables(self, workspace, tmp_path):
        table_dir = tmp_path / "one"
        table_dir.mkdir()
        f = next(iter(sorted((workspace["seed_dir"]).glob("*.csv"))))
        (table_dir / f.name).write_bytes(f.read_bytes())
        assert main(["detect", "--model", str(workspace["model"]),
                     "--dir", str(table_dir), "--out", str(tmp_path / "d.csv")]) == 2


class TestLocalize:
    def test_svg_and_json(self, workspace, tmp_path):
        manifest = json.loads((workspace["corpus"] / "manifest.json").read_text())
        pair = next(p for p in manifest["pairs"] if p["label"] == "clone")
        a = workspace["corpus"] / "tables" / f"{pair['a']}.csv"
        b = workspace["corpus"] / "tables" / f"{pair['b']}.csv"
        svg = tmp_path / "h.svg"
        vj = tmp_path / "v.json"
        attr = tmp_path / "a.json"
        assert main(["localize", "--model", str(workspace["model"]),
                     "--pair", str(a), str(b), "--mode", "shap",
                     "--out-svg", str(svg), "--out-json", str(vj),
                     "--attribution-out", str(attr)]) == 0
        doc = xml.dom.minidom.parse(str(svg))
        assert doc.documentElement.tagName == "svg"
        vis = json.loads(vj.read_text())
        assert set(vis) == {"pair_id", "mode", "m_row", "m_col"}
        att = json.loads(attr.read_text())
        assert abs(att["residual"]) <= 1e-6
        assert len(att["phi"]) == 14

    def test_uniform_differs_from_shap(self, workspace, tmp_path):
        manifest = json.loads((workspace["corpus"] / "manifest.json").read_text())
        pair = next(p for p in manifest["pairs"] if p["label"] == "clone")
        a = workspace["corpus"] / "tables" / f"{pair['a']}.csv"
        b = workspace["corpus"] / "tables" / f"{pair['b']}.csv"
        outs = {}
        for mode in ("shap", "uniform"):
            vj = tmp_path / f"{mode}.json"
            assert main(["localize", "--model", str(workspace["model"]),
                         "--pair", str(a), str(b), "--mode", mode,
                         "--out-svg", str(tmp_path / f"{mode}.svg"),
                         "--out-json", str(vj)]) == 0
            outs[mode] = json.loads(vj.read_text())
        assert outs["shap"]["m_row"] != outs["uniform"]["m_row"]

    def test_missing_background_is_config_error(self, workspace, tmp_path):
        lone_model = tmp_path / "m.json"
        lone_model.write_bytes(workspace["model"].read_bytes())
        manifest = json.loads((workspace["corpus"] / "manifest.json").read_text())
        pair = manifest["pairs"][0]
        a = workspace["corpus"] / "tables" / f"{pair['a']}.csv"
        b = workspace["corpus"] / "tables" / f"{pair['b']}.csv"
        assert main(["localize", "--model", str(lone_model),
                     "--pair", str(a), str(b), "--mode", "shap",
                     "--out-svg", str(tmp_path / "h.svg")]) == 2


class TestEvalLocalization:
    def test_report_structure(self, workspace, tmp_path):
        out = tmp_path / "loc.csv"
        assert main(["eval-localization", "--model", str(workspace["model"]),
                     "--corpus", str(workspace["corpus"]),
                     "--features", str(workspace["features"]),
                     "--k", "1,5", "--top-pairs", "3", "--out", str(out)]) == 0
        rows = list(csv.DictReader(open(out)))
        # (1 budget) x (2 modes) x (2 ks)
        assert len(rows) == 4
        assert {r["mode"] for r in rows} == {"shap", "uniform"}
        for mode in ("shap", "uniform"):
            detail = list(csv.DictReader(open(f"{out}.{mode}.pairs.csv")))
            assert len(detail) == 3 * 2  # pairs x ks
            assert list(detail[0]) == ["pair_id", "k", "precision"]

    def test_deterministic(self, workspace, tmp_path):
        outs = []
        for name in ("l1.csv", "l2.csv"):
            out = tmp_path / name
            assert main(["eval-localization", "--model", str(workspace["model"]),
                         "--corpus", str(workspace["corpus"]),
                         "--features", str(workspace["features"]),
                         "--k", "5", "--top-pairs", "2", "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestConfigPrecedence:
    def test_env_and_file_and_flag(self, seed_dir, tmp_path, monkeypatch):
        cfg_file = tmp_path / "cfg.toml"
        cfg_file.write_text('threshold = 0.3\nseed = 5\n')
        # file value applies when flag and env are absent
        out1 = tmp_path / "c1"
        assert main(["inject", "--seed-dir", str(seed_dir), "--out", str(out1),
                     "--config", str(cfg_file)]) == 0
        echo1 = json.loads((out1 / "run_config.json").read_text())
        assert echo1["options"]["threshold"] == 0.3
        # env overrides file
        monkeypatch.setenv("SIMCLONE_THRESHOLD", "0.4")
        out2 = tmp_path / "c2"
        assert main(["inject", "--seed-dir", str(seed_dir), "--out", str(out2),
                     "--config", str(cfg_file)]) == 0
        echo2 = json.loads((out2 / "run_config.json").read_text())
        assert echo2["options"]["threshold"] == 0.4
        # flag beats both
        out3 = tmp_path / "c3"
        assert main(["inject", "--seed-dir", str(seed_dir), "--out", str(out3),
                     "--config", str(cfg_file), "--threshold", "0.2"]) == 0
        echo3 = json.loads((out3 / "run_config.json").read_text())
        assert echo3["options"]["threshold"] == 0.2

    def test_labels_match_threshold(self, seed_dir, tmp_path):
        out = tmp_path / "c"
        assert main(["inject", "--seed-dir", str(seed_dir), "--out", str(out),
                     "--threshold", "0.0", "--seed", "3"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert all(p["label"] == "clone" for p in manifest["pairs"])
