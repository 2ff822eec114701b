"""Tests for the generalization and practical experiment protocols."""
import csv
import json

import numpy as np
import pytest

from semshift.corpus.posts import Post, PostStore
from semshift.corpus.slicing import Period
from semshift.embed.cbow import CbowParams
from semshift.harness import (
    ExperimentPlan,
    RunRecord,
    _balanced_sample,
    run_generalization,
    run_practical,
    vocabulary_hash,
)
from semshift.synthlab import SynthSpec, generate

FAST_EMBED = CbowParams(dim=16, epochs=3, negatives=3, seed=1)


def _spec(seed=13, **overrides):
    params = dict(
        vocab_size=120,
        n_topics=4,
        users_per_class=15,
        posts_per_user=6,
        post_length=15,
        topics_per_doc=2,
        shift_fraction=0.1,
        signal_count=12,
        signal_boost=4.0,
        seed=seed,
    )
    params.update(overrides)
    return SynthSpec(**params)


def _corpus(spec):
    result = generate(spec)
    store = PostStore([Post(**p) for p in result.posts])
    bounds = result.manifest["periods"]
    p1 = Period("p1", bounds["p1"]["start"], bounds["p1"]["end"])
    p2 = Period("p2", bounds["p2"]["start"], bounds["p2"]["end"])
    return store, p1, p2, result.manifest


def _plan(p1, p2, **overrides):
    params = dict(
        dataset="synthetic",
        train_windows=(p1,),
        test_windows=(p2,),
        outer_repeats=1,
        inner_repeats=1,
        min_posts=1,
        seed=5,
        embed=FAST_EMBED,
        k=10,
        cf_nb=3,
        cf_shift=3,
        frequency_floor=3,
        vocab_min_count=1,
        folds=3,
    )
    params.update(overrides)
    return ExperimentPlan(**params)


class TestPlanValidation:
    def _periods(self):
        return Period("a", 0, 10), Period("b", 10, 20)

    def test_repeats_positive(self):
        a, b = self._periods()
        with pytest.raises(ValueError, match="repeats"):
            ExperimentPlan("d", (a,), (b,), outer_repeats=0)

    def test_test_window_must_follow_training(self):
        a, b = self._periods()
        with pytest.raises(ValueError, match="after training"):
            ExperimentPlan("d", (b,), (a,))

    def test_overlapping_windows_rejected(self):
        a = Period("a", 0, 15)
        b = Period("b", 10, 20)
        with pytest.raises(ValueError, match="overlap"):
            ExperimentPlan("d", (a,), (b,))

    def test_unknown_method_rejected(self):
        a, b = self._periods()
        with pytest.raises(ValueError, match="unknown selection methods"):
            ExperimentPlan("d", (a,), (b,), methods=("overlap", "mystery"))

    def test_floor_must_cover_cf_shift(self):
        a, b = self._periods()
        with pytest.raises(ValueError, match="frequency_floor"):
            ExperimentPlan("d", (a,), (b,), frequency_floor=10, cf_shift=50)

    def test_full_scale(self):
        a, b = self._periods()
        plan = ExperimentPlan("d", (a,), (b,)).at_full_scale()
        assert plan.outer_repeats == 100
        assert plan.inner_repeats == 10

    def test_desk_scale_defaults(self):
        a, b = self._periods()
        plan = ExperimentPlan("d", (a,), (b,))
        assert plan.outer_repeats == 10
        assert plan.inner_repeats == 3


class TestRunRecord:
    def test_f1_bounds(self):
        with pytest.raises(ValueError, match="f1_test"):
            RunRecord("overlap", 50, "p1", "p2", 0, 0, 1.2, 0.5, 1.0, "ab")

    def test_hash_stable(self):
        assert vocabulary_hash(["b", "a"]) == vocabulary_hash(("b", "a"))
        assert vocabulary_hash(["a", "b"]) != vocabulary_hash(["b", "a"])


def test_balanced_sample_exact_counts():
    rng = np.random.default_rng(0)
    by_class = {0: [f"n{i}" for i in range(8)], 1: [f"p{i}" for i in range(5)]}
    picked = _balanced_sample(rng, by_class, 4)
    assert len(picked) == 8
    assert sum(u.startswith("n") for u in picked) == 4
    assert sum(u.startswith("p") for u in picked) == 4
    assert len(set(picked)) == 8


@pytest.fixture(scope="module")
def generalization_run():
    store, p1, p2, _ = _corpus(_spec())
    plan = _plan(p1, p2)
    return run_generalization(store, plan), plan


class TestGeneralization:
    @pytest.fixture
    def run(self, generalization_run):
        return generalization_run

    def test_one_record_per_cell(self, run):
        result, plan = run
        assert len(result.records) == len(plan.methods) * len(plan.percentiles)
        cells = {(r.method, r.p, r.test_window) for r in result.records}
        assert len(cells) == len(result.records)

    def test_f1_sane_and_metadata_filled(self, run):
        result, plan = run
        for r in result.records:
            assert 0.0 <= r.f1_test <= 1.0
            assert 0.0 <= r.f1_dev <= 1.0
            assert r.chosen_c in plan.c_grid
            assert len(r.vocab_hash) == 16
            assert r.train_span == "p1"
            assert r.test_window == "p2"

    def test_signal_learnable(self, run):
        result, _ = run
        mean, _, n = result.cell("intersection", 100, "p2")
        assert n == 1
        assert mean > 0.6

    def test_cell_and_best_p(self, run):
        result, plan = run
        best = result.best_p("overlap", "p2")
        assert best in plan.percentiles
        best_mean, _, _ = result.cell("overlap", best, "p2")
        for p in plan.percentiles:
            mean, _, _ = result.cell("overlap", p, "p2")
            assert mean <= best_mean

    def test_csv_outputs(self, run, tmp_path):
        result, plan = run
        grid = tmp_path / "grid.csv"
        summary = tmp_path / "summary.csv"
        result.to_csv(grid)
        result.summary_csv(summary)
        with open(grid, encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0][:5] == ["dataset", "train_span", "test_window", "method", "p"]
        assert len(rows) == 1 + len(plan.methods) * len(plan.percentiles)
        with open(summary, encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == 1 + len(plan.methods)

    def test_missing_cell_raises(self, run):
        result, _ = run
        with pytest.raises(KeyError):
            result.cell("overlap", 50, "nowhere")


def test_generalization_deterministic_rerun():
    store, p1, p2, _ = _corpus(_spec(seed=21))
    plan = _plan(p1, p2, methods=("cumulative", "overlap"), percentiles=(50, 100))
    first = run_generalization(store, plan)
    second = run_generalization(store, plan)
    assert first.records == second.records


def test_generalization_multiple_inner_repeats():
    store, p1, p2, _ = _corpus(_spec(seed=3))
    plan = _plan(p1, p2, inner_repeats=2, methods=("random",), percentiles=(50,))
    result = run_generalization(store, plan)
    assert len(result.records) == 2
    _, _, n = result.cell("random", 50, "p2")
    assert n == 2


def test_generalization_binding_constraint_named():
    # labeled users exist only in the positive class of the test window
    store, p1, p2, _ = _corpus(_spec(seed=8))
    posts = [
        p
        for u in store.users()
        for p in store.posts(u)
        if not (u.startswith("p2c0"))
    ]
    broken = PostStore(posts)
    plan = _plan(p1, p2, methods=("intersection",), percentiles=(100,))
    with pytest.raises(ValueError, match="p2"):
        run_generalization(broken, plan)


def test_generalization_requires_windows():
    store, p1, p2, _ = _corpus(_spec(seed=8))
    plan = ExperimentPlan("d", seed=1, min_posts=1)
    with pytest.raises(ValueError, match="window"):
        run_generalization(store, plan)


@pytest.fixture(scope="module")
def practical_run():
    store, p1, p2, _ = _corpus(_spec(seed=17, drift_boost=2.0, overlap=0.5))
    labeled_posts = [
        p for u in store.users() for p in store.posts(u) if u.startswith("p1")
    ]
    labeled = PostStore(labeled_posts)
    unlabeled = PostStore(
        [
            Post(p.user_id, p.timestamp, p.text, None)
            for u in store.users()
            for p in store.posts(u)
        ]
    )
    plan = _plan(p1, p2)
    result = run_practical(labeled, unlabeled, p1, p2, plan)
    return result, plan


class TestPractical:
    @pytest.fixture
    def run(self, practical_run):
        return practical_run

    def test_one_record_per_cell(self, run):
        result, plan = run
        assert len(result.records) == len(plan.methods) * len(plan.percentiles)

    def test_record_contents(self, run):
        result, _ = run
        for r in result.records:
            assert 0.0 <= r.f1_within <= 1.0
            assert 0.0 <= r.prevalence_pre <= 1.0
            assert 0.0 <= r.prevalence_during <= 1.0
            assert r.change_pp == pytest.approx(
                100 * (r.prevalence_during - r.prevalence_pre)
            )

    def test_curves_and_divergence(self, run):
        result, plan = run
        curve = result.curve("overlap")
        assert [pt["p"] for pt in curve] == list(plan.percentiles)
        report = result.divergence_report(sensitivity_pp=1.0)
        assert set(report) >= {"divergence_detected", "f1_spread", "change_gap_pp"}

    def test_outputs(self, run, tmp_path):
        result, plan = run
        csv_path = tmp_path / "practical.csv"
        json_path = tmp_path / "curves.json"
        result.to_csv(csv_path)
        result.curves_json(json_path)
        with open(csv_path, encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == 1 + len(plan.methods) * len(plan.percentiles)
        payload = json.loads(json_path.read_text())
        assert set(payload["curves"]) == set(plan.methods)
        assert "divergence" in payload


def test_practical_missing_period_coverage():
    store, p1, p2, _ = _corpus(_spec(seed=17))
    p1_posts = [
        p for u in store.users() for p in store.posts(u) if u.startswith("p1")
    ]
    labeled = PostStore(p1_posts)
    unlabeled = PostStore([Post(p.user_id, p.timestamp, p.text, None) for p in p1_posts])
    plan = _plan(p1, p2)
    with pytest.raises(ValueError, match="no posts in period"):
        run_practical(labeled, unlabeled, p1, p2, plan)
