import csv
import json
import shutil

import numpy as np
import pytest
import yaml

from blendids.bundle import BundleError, ModelBundle
from blendids.cli import main
from blendids.config import ROLE_OFFSETS, RunConfig, derive_seed
from blendids.dataset import load_csv
from blendids.errors import BlendSplitError, ConfigError
from blendids.evaluate import metrics
from blendids.pipeline import run_crossval, run_training
from blendids.report import ComparisonTable, RunReports, build_table, collect, render
from blendids.synth import make_blobs

SMALL = dict(forest_trees=15, net_epochs=20, svm_epochs=5)


def write_config(path, **overrides):
    path.write_text(yaml.safe_dump(overrides))
    return path


@pytest.fixture
def synth_dir(tmp_path):
    assert main(["gen-synth", "--out", str(tmp_path), "--n", "600", "--seed", "1"]) == 0
    cfg = yaml.safe_load((tmp_path / "config.yaml").read_text())
    cfg.update(SMALL)
    (tmp_path / "config.yaml").write_text(yaml.safe_dump(cfg))
    return tmp_path


# -- config --------------------------------------------------------------------


class TestConfig:
    def test_seed_derivation(self):
        assert derive_seed(10, "split") == 10
        assert derive_seed(2**32 - 1, "validation") == 0
        assert len(set(ROLE_OFFSETS.values())) == len(ROLE_OFFSETS)
        cfg = RunConfig(seed=7)
        assert cfg.blend_config().forest_seed == 7 + ROLE_OFFSETS["forest"]
        assert cfg.train_spec().seed == 7 + ROLE_OFFSETS["net"]

    def test_three_part_ratio_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(split_ratio=(50, 50, 10))

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            RunConfig.from_dict({"sede": 1})

    def test_bool_must_be_bool(self):
        with pytest.raises(ConfigError):
            RunConfig(stratify="yes")

    def test_dump_load_round_trip(self, tmp_path):
        cfg = RunConfig(net_hidden=(8, 4), forest_features=2, seed=5)
        cfg.dump(tmp_path / "c.yaml")
        back = RunConfig.load(tmp_path / "c.yaml")
        assert back.snapshot() == cfg.snapshot()
        assert back.base_dir == str(tmp_path)

    def test_missing_paths(self, tmp_path):
        cfg = RunConfig(schema="synthetic", data="nope.csv", base_dir=str(tmp_path))
        with pytest.raises(ConfigError, match="data file"):
            cfg.check_paths()
        with pytest.raises(ConfigError):
            RunConfig(schema="no_such_schema", base_dir=str(tmp_path)).check_paths()


# -- pipeline and persistence ------------------------------------------------------


class TestPipeline:
    def test_reports_cover_every_model(self, blobs):
        res = run_training(RunConfig(**SMALL), blobs)
        names = [r.model for r in res.reports]
        assert names == ["svm", "naive_bayes", "decision_tree", "forest", "ann", "final"]
        for r in res.reports:
            m = metrics(r.confusion)
            assert (r.accuracy, r.precision, r.recall, r.f1) == (m.accuracy, m.precision, m.recall, m.f1)
        final = res.reports[-1]
        assert final.provenance["chosen"] == res.model.final.chosen

    def test_test_rows_never_seen_in_training(self, blobs):
        res = run_training(RunConfig(**SMALL), blobs)
        assert not set(res.outer_plan.train_indices) & set(res.outer_plan.test_indices)
        assert res.test.n_samples == len(res.outer_plan.test_indices)

    def test_raw_net_input(self, blobs):
        res = run_training(RunConfig(net_input="raw", **SMALL), blobs)
        assert res.model.final.net.n_features == blobs.n_features
        assert res.reports[4].accuracy > 0.95

    def test_bundle_round_trip_bit_exact(self, blobs):
        res = run_training(RunConfig(**SMALL), blobs)
        bundle = ModelBundle(res.schema, RunConfig(**SMALL).snapshot(), res.model)
        back = ModelBundle.from_json(bundle.to_json())
        X = np.random.default_rng(0).normal(0, 3, (1000, blobs.n_features))
        for name, p in res.model.all_predictions(X).items():
            np.testing.assert_array_equal(back.model.all_predictions(X)[name], p)
        probs, back_probs = res.model.candidate_probabilities(X), back.model.candidate_probabilities(X)
        for name in probs:
            np.testing.assert_array_equal(back_probs[name], probs[name])
        assert back.digest == bundle.digest

    def test_tampered_bundle(self, blobs, tmp_path):
        res = run_training(RunConfig(**SMALL), blobs)
        text = ModelBundle(res.schema, {}, res.model).to_json()
        data = json.loads(text)
        data["chosen"] = "ann" if data["chosen"] == "forest" else "forest"
        with pytest.raises(BundleError, match="digest"):
            ModelBundle.from_json(json.dumps(data))
        data = json.loads(text)
        data["version"] = 99
        with pytest.raises(BundleError, match="version"):
            ModelBundle.from_json(json.dumps(data))
        with pytest.raises(BundleError):
            ModelBundle.load(tmp_path / "missing.json")

    def test_crossval_shape_and_bounds(self):
        d = make_blobs(500, 4, separation=1.0, seed=2)
        out = run_crossval(RunConfig(folds=3, **SMALL), d)
        accs = [r["accuracy"] for r in out["folds"]]
        assert len(accs) == 3
        assert min(accs) <= out["summary"]["accuracy"] <= max(accs)

    def test_crossval_small_fold_hint(self):
        d = make_blobs(30, 2, minority_fraction=0.1, seed=0)
        with pytest.raises(BlendSplitError, match="fewer folds"):
            run_crossval(RunConfig(folds=3, **SMALL), d)


# -- reports ---------------------------------------------------------------------


class TestReport:
    def test_json_round_trip(self, blobs):
        res = run_training(RunConfig(**SMALL), blobs)
        runs = [RunReports("a", "synthetic", res.model.final.chosen, res.reports),
                RunReports("b", "synthetic", res.model.final.chosen, res.reports)]
        table = build_table(runs)
        assert len(table.comparison) == 2
        assert ComparisonTable.from_json(table.to_json()) == table
        text = render(table, "table")
        assert f"Final ({res.model.final.chosen})" in text
        assert f"[final: {res.model.final.chosen}]" in text

    def test_csv_counts_match_metrics(self, blobs):
        res = run_training(RunConfig(**SMALL), blobs)
        rows = list(csv.DictReader(render(build_table([RunReports("a", "s", "forest", res.reports)]), "csv")
                                   .splitlines()))
        assert len(rows) == 6
        for r in rows:
            tp, tn, fp, fn = (int(r[k]) for k in ("tp", "tn", "fp", "fn"))
            assert float(r["accuracy"]) == (tp + tn) / (tp + tn + fp + fn)


# -- command line ------------------------------------------------------------------


class TestCli:
    def test_train_writes_artifacts(self, demo_dir):
        run = demo_dir / "run"
        assert {p.name for p in run.iterdir()} >= {"bundle.json", "reports.json", "test.csv"}
        reports = RunReports.load(run / "reports.json")
        final = next(r for r in reports.reports if r.model == "final")
        assert final.accuracy >= 0.98

    def test_evaluate_replays_stored_metrics(self, demo_dir, tmp_path, capsys):
        run = demo_dir / "run"
        assert main(["evaluate", "--bundle", str(run / "bundle.json"), "--data", str(run / "test.csv"),
                     "--out", str(tmp_path), "--format", "json"]) == 0
        stored = RunReports.load(run / "reports.json").reports
        replay = RunReports.load(tmp_path / "reports.json").reports
        for a, b in zip(stored, replay):
            assert a.model == b.model
            assert a.confusion.counts.tolist() == b.confusion.counts.tolist()
            assert (a.accuracy, a.precision, a.recall, a.f1) == (b.accuracy, b.precision, b.recall, b.f1)
        first = json.loads(capsys.readouterr().out)["groups"][0]["first"]
        assert [r["model"] for r in first] == ["svm", "naive_bayes", "decision_tree"]
        assert all(set(r) >= {"accuracy", "precision", "recall", "f1"} for r in first)

    def test_evaluate_extra_column(self, demo_dir, tmp_path, capsys):
        src = (demo_dir / "run" / "test.csv").read_text().splitlines()
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join([src[0] + ",extra"] + [s + ",1" for s in src[1:]]) + "\n")
        assert main(["evaluate", "--bundle", str(demo_dir / "run" / "bundle.json"), "--data", str(bad)]) == 2
        assert "extra" in capsys.readouterr().err

    def test_predict(self, demo_dir, tmp_path):
        bundle = str(demo_dir / "run" / "bundle.json")
        data = demo_dir / "run" / "test.csv"
        out = tmp_path / "pred.csv"
        assert main(["predict", "--bundle", bundle, "--data", str(data), "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        n = len(data.read_text().splitlines()) - 1
        assert len(rows) == n
        assert {"prediction", "forest_p0", "forest_p1", "ann_p0", "ann_p1"} <= set(rows[0])

    def test_predict_memorised_attack_row(self, demo_dir, tmp_path):
        d = load_csv(demo_dir / "data.csv", load_csv.__globals__["load_schema"](demo_dir / "schema.yaml"))
        attack = int(np.flatnonzero(d.labels == 1)[0])
        lines = (demo_dir / "data.csv").read_text().splitlines()
        header = lines[0].rsplit(",", 1)[0]
        row = lines[attack + 1].rsplit(",", 1)[0]
        one = tmp_path / "one.csv"
        one.write_text(f"{header}\n{row}\n")
        out = tmp_path / "p.csv"
        assert main(["predict", "--bundle", str(demo_dir / "run" / "bundle.json"), "--data", str(one),
                     "--out", str(out)]) == 0
        assert next(csv.DictReader(out.open()))["prediction"] == "1"

    def test_predict_empty(self, demo_dir, tmp_path):
        empty = tmp_path / "e.csv"
        empty.write_text((demo_dir / "data.csv").read_text().splitlines()[0] + "\n")
        out = tmp_path / "p.csv"
        assert main(["predict", "--bundle", str(demo_dir / "run" / "bundle.json"), "--data", str(empty),
                     "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 1

    def test_identical_runs_identical_bundles(self, synth_dir, tmp_path):
        cfg = str(synth_dir / "config.yaml")
        assert main(["train", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["train", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "bundle.json").read_bytes() == (tmp_path / "b" / "bundle.json").read_bytes()
        assert main(["train", "--config", cfg, "--seed", "9", "--out", str(tmp_path / "c")]) == 0
        assert (tmp_path / "c" / "bundle.json").read_bytes() != (tmp_path / "a" / "bundle.json").read_bytes()

    def test_bad_ratio_fails_before_work(self, synth_dir, tmp_path, capsys):
        cfg = yaml.safe_load((synth_dir / "config.yaml").read_text())
        cfg["split_ratio"] = [50, 50, 10]
        path = write_config(synth_dir / "bad.yaml", **cfg)
        assert main(["train", "--config", str(path), "--out", str(tmp_path / "x")]) == 1
        assert not (tmp_path / "x").exists()
        assert "bad.yaml" in capsys.readouterr().err

    def test_usage_errors(self, capsys):
        assert main([]) == 1
        assert main(["train"]) == 1
        assert main(["report", "x", "--format", "xml"]) == 1

    def test_data_error_names_stage(self, synth_dir, capsys):
        with (synth_dir / "data.csv").open("a") as fh:
            fh.write("1,2,3,oops,5,6,0\n")
        assert main(["train", "--config", str(synth_dir / "config.yaml")]) == 2
        err = capsys.readouterr().err
        assert "stage 'load'" in err and "oops" in err

    def test_training_error_exit_code(self, synth_dir, capsys):
        # two attack rows: the blend split leaves a portion without any attack row
        lines = (synth_dir / "data.csv").read_text().splitlines()
        normal = [l for l in lines[1:] if l.endswith(",0")]
        attack = [l for l in lines[1:] if l.endswith(",1")]
        (synth_dir / "data.csv").write_text("\n".join([lines[0], *normal[:200], *attack[:3]]) + "\n")
        assert main(["train", "--config", str(synth_dir / "config.yaml")]) == 3
        assert "stage 'blend'" in capsys.readouterr().err

    def test_crossval(self, synth_dir, tmp_path, capsys):
        cfg = str(synth_dir / "config.yaml")
        assert main(["crossval", "--config", cfg, "--format", "json", "--sweep-ratios", "--out", str(tmp_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out["folds"]) == 5
        assert [r["run"] for r in out["ratio_sweep"]] == ["60:40", "70:30", "80:20"]
        assert json.loads((tmp_path / "crossval.json").read_text()) == out
        assert main(["crossval", "--config", cfg, "--format", "csv"]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 1 + 5 + 1

    def test_report_two_runs(self, demo_dir, tmp_path, capsys):
        for name in ("r1", "r2"):
            shutil.copytree(demo_dir / "run", tmp_path / name)
        assert main(["report", str(tmp_path), "--format", "json"]) == 0
        table = ComparisonTable.from_json(capsys.readouterr().out)
        assert [c["run"] for c in table.comparison] == ["r1", "r2"]
        assert table == build_table(collect(tmp_path))
        assert main(["report", str(tmp_path), "--format", "table", "--output", str(tmp_path / "t.txt")]) == 0
        assert "Final (" in (tmp_path / "t.txt").read_text()

    def test_report_nothing_found(self, tmp_path):
        assert main(["report", str(tmp_path)]) == 2

    def test_gen_synth_defaults_to_imbalanced(self, tmp_path):
        assert main(["gen-synth", "--out", str(tmp_path), "--n", "1000"]) == 0
        cfg = RunConfig.load(tmp_path / "config.yaml")
        d = load_csv(tmp_path / "data.csv", cfg.load_schema())
        assert int(d.labels.sum()) == 60
