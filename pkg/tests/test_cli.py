"""End-to-end checks of the command-line pipeline."""
import csv
import json

import pytest
import yaml

from semshift.cli import main

CONFIG = {
    "seed": 7,
    "periods": [
        {"name": "p1", "start": "2020-01-01", "end": "2020-07-01"},
        {"name": "p2", "start": "2020-07-01", "end": "2021-01-01"},
    ],
    "corpus": {"min_count": 1, "min_posts": 1},
    "embed": {"dim": 16, "epochs": 3, "negatives": 3},
    "shift": {"k": 10, "cf_nb": 3, "cf_shift": 3},
    "select": {"frequency_floor": 3},
    "model": {"folds": 3},
    "monitor": {"min_posts": 1},
    "harness": {
        "outer_repeats": 1,
        "inner_repeats": 1,
        "min_posts": 1,
        "train_windows": ["p1"],
        "test_windows": ["p2"],
        "pre_period": "p1",
        "during_period": "p2",
    },
    "synth": {
        "vocab_size": 150,
        "n_topics": 4,
        "users_per_class": 12,
        "posts_per_user": 8,
        "post_length": 20,
        "shift_fraction": 0.1,
        "signal_count": 15,
        "signal_boost": 4.0,
    },
}


def run_cli(*args) -> int:
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Config plus synth corpus, period artifacts, and one embedding."""
    root = tmp_path_factory.mktemp("cliwork")
    cfg = root / "cfg.yaml"
    cfg.write_text(yaml.safe_dump(CONFIG))
    base = ["--config", cfg, "--output-dir", root]
    assert run_cli(*base, "synth") == 0
    assert run_cli(*base, "ingest", "--posts", root / "corpus.jsonl") == 0
    assert run_cli(*base, "embed", "--posts", root / "corpus.jsonl", "--period", "p1") == 0
    return root


def cfg_args(workdir, out=None):
    return ["--config", workdir / "cfg.yaml", "--output-dir", out or workdir]


def last_json_line(capsys) -> dict:
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    return json.loads(lines[-1])


def test_synth_writes_corpus_and_manifest(workdir):
    lines = (workdir / "corpus.jsonl").read_text().splitlines()
    assert len(lines) == 2 * 2 * 12 * 8
    post = json.loads(lines[0])
    assert set(post) == {"user_id", "timestamp", "text", "label"}
    manifest = json.loads((workdir / "manifest.json").read_text())
    assert len(manifest["shifted_terms"]) == 15


def test_summary_line_is_machine_readable(workdir, capsys, tmp_path):
    assert run_cli(*cfg_args(workdir, tmp_path), "selftest") == 0
    summary = last_json_line(capsys)
    assert summary["command"] == "selftest"
    assert summary["ok"] is True
    assert summary["checks"]["shift.k"] is True


def test_ingest_artifacts_exist(workdir):
    for name in [
        "vocab.csv",
        "counts_p1.csv",
        "counts_p2.csv",
        "dtm_p1.triplets",
        "dtm_p2.triplets",
    ]:
        assert (workdir / name).stat().st_size > 0


def test_shift_identical_spaces_scores_one(workdir, tmp_path, capsys):
    emb = workdir / "embedding_p1.bin"
    assert run_cli(*cfg_args(workdir, tmp_path), "shift", "--source", emb, "--target", emb) == 0
    summary = last_json_line(capsys)
    assert summary["mean_score"] == 1.0
    with open(tmp_path / "stability.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert rows
    assert all(float(r["S"]) == 1.0 for r in rows)


def test_config_failure_exits_nonzero_without_outputs(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"shift": {"kk": 3}}))
    out = tmp_path / "fresh"
    code = run_cli("--config", cfg, "--output-dir", out, "selftest")
    assert code == 2
    assert not out.exists()
    assert "unknown keys" in capsys.readouterr().err


def test_select_missing_inputs_exit_two(workdir, tmp_path, capsys):
    code = run_cli(
        *cfg_args(workdir, tmp_path),
        "select",
        "--method",
        "overlap",
        "--source-counts",
        workdir / "counts_p1.csv",
        "--target-counts",
        workdir / "counts_p2.csv",
    )
    assert code == 2
    assert "--stability" in capsys.readouterr().err
    assert not (tmp_path / "selections_overlap.json").exists()


def test_select_train_evaluate_flow(workdir, tmp_path, capsys):
    out = cfg_args(workdir, tmp_path)
    assert run_cli(*out, "select", "--method", "cumulative", "--source-counts", workdir / "counts_p1.csv") == 0
    assert run_cli(
        *out,
        "train",
        "--dtm",
        workdir / "dtm_p1.triplets",
        "--vocab",
        workdir / "vocab.csv",
        "--selection",
        tmp_path / "selections_cumulative.json",
        "--p",
        50,
    ) == 0
    train_summary = last_json_line(capsys)
    assert train_summary["terms"] == 75
    assert run_cli(
        *out,
        "evaluate",
        "--model",
        tmp_path / "model.bin",
        "--dtm",
        workdir / "dtm_p1.triplets",
        "--vocab",
        workdir / "vocab.csv",
    ) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert 0.0 <= metrics["f1"] <= 1.0
    assert metrics["users"] == 24


def test_train_unknown_percentile_errors(workdir, tmp_path, capsys):
    out = cfg_args(workdir, tmp_path)
    assert run_cli(*out, "select", "--method", "cumulative", "--source-counts", workdir / "counts_p1.csv") == 0
    code = run_cli(
        *out,
        "train",
        "--dtm",
        workdir / "dtm_p1.triplets",
        "--vocab",
        workdir / "vocab.csv",
        "--selection",
        tmp_path / "selections_cumulative.json",
        "--p",
        55,
    )
    assert code == 2
    assert "no selection at p=55" in capsys.readouterr().err


def test_prevalence_with_keyword_series(workdir, tmp_path, capsys):
    out = cfg_args(workdir, tmp_path)
    assert run_cli(*out, "select", "--method", "cumulative", "--source-counts", workdir / "counts_p1.csv") == 0
    assert run_cli(
        *out,
        "train",
        "--dtm",
        workdir / "dtm_p1.triplets",
        "--vocab",
        workdir / "vocab.csv",
        "--selection",
        tmp_path / "selections_cumulative.json",
        "--p",
        100,
    ) == 0
    assert run_cli(
        *out,
        "prevalence",
        "--posts",
        workdir / "corpus.jsonl",
        "--model",
        tmp_path / "model.bin",
        "--pre",
        "p1",
        "--during",
        "p2",
        "--keywords",
        "t00001,t00002",
    ) == 0
    summary = last_json_line(capsys)
    assert {"pre", "during", "change_pp", "flagged"} <= set(summary)
    with open(tmp_path / "prevalence.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert [r["period"] for r in rows] == ["p1", "p2"]
    with open(tmp_path / "keyword_series.csv", newline="") as handle:
        series_rows = list(csv.DictReader(handle))
    assert {r["term"] for r in series_rows} == {"t00001", "t00002"}


def test_synth_rerun_is_byte_identical(workdir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(*cfg_args(workdir, a), "synth") == 0
    assert run_cli(*cfg_args(workdir, b), "synth") == 0
    assert (a / "corpus.jsonl").read_bytes() == (b / "corpus.jsonl").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_seed_flag_overrides_config(workdir, tmp_path):
    assert run_cli(*cfg_args(workdir, tmp_path), "synth", "--seed", 99) == 0
    assert (tmp_path / "corpus.jsonl").read_bytes() != (workdir / "corpus.jsonl").read_bytes()


def test_missing_posts_file_exits_two(workdir, tmp_path, capsys):
    code = run_cli(*cfg_args(workdir, tmp_path), "ingest", "--posts", tmp_path / "nope.jsonl")
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_period_exits_two(workdir, tmp_path, capsys):
    code = run_cli(
        *cfg_args(workdir, tmp_path),
        "embed",
        "--posts",
        workdir / "corpus.jsonl",
        "--period",
        "p9",
    )
    assert code == 2
    assert "p9" in capsys.readouterr().err


def test_generalization_and_practical_commands(workdir, tmp_path, capsys):
    out = cfg_args(workdir, tmp_path)
    assert run_cli(*out, "generalization", "--posts", workdir / "corpus.jsonl", "--dataset", "demo") == 0
    gen_summary = last_json_line(capsys)
    assert gen_summary["records"] == 8 * 10
    with open(tmp_path / "generalization_grid.csv", newline="") as handle:
        grid = list(csv.DictReader(handle))
    assert len(grid) == 8 * 10

    unlabeled = tmp_path / "unlabeled.jsonl"
    with open(workdir / "corpus.jsonl") as src, open(unlabeled, "w") as dst:
        for line in src:
            record = json.loads(line)
            record.pop("label", None)
            dst.write(json.dumps(record, sort_keys=True) + "\n")
    assert run_cli(
        *out,
        "practical",
        "--labeled",
        workdir / "corpus.jsonl",
        "--unlabeled",
        unlabeled,
        "--dataset",
        "demo",
    ) == 0
    practical_summary = last_json_line(capsys)
    assert "divergence" in practical_summary
    payload = json.loads((tmp_path / "practical_curves.json").read_text())
    assert set(payload) == {"curves", "dataset", "divergence"}


def test_selftest_reports_drift_with_nonzero_exit(tmp_path, capsys, monkeypatch):
    import semshift.config as config_module

    monkeypatch.setitem(config_module.EXPECTED_DEFAULTS, "shift.k", 499)
    code = run_cli("--output-dir", tmp_path, "selftest")
    assert code == 1
    summary = last_json_line(capsys)
    assert summary["ok"] is False
    assert summary["checks"]["shift.k"] is False
