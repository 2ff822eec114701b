"""The eight selection methods and their algebraic guarantees."""
import numpy as np
import pytest
import scipy.sparse as sp

from semshift.corpus import DocumentTermMatrix, Vocabulary
from semshift.model import ClassifierModel, TfidfTransform
from semshift.select import (
    PERCENTILES,
    SelectionScore,
    chi2_statistics,
    rank_normalize,
    score_chi2,
    score_coefficient,
    score_cumulative,
    score_frequency,
    score_intersection,
    score_overlap,
    score_random,
    score_weighted,
    select_cumulative,
    select_intersection,
    selections_from_json,
    selections_to_json,
    sweep,
    take_top,
)
from semshift.shift import StabilityRecord, StabilityTable


def test_cumulative_strict_gate():
    counts = {"a": 51, "b": 50, "c": 500, "d": 10}
    assert select_cumulative(counts) == {"a", "c"}
    assert select_cumulative({}) == set()


def test_intersection_requires_both_periods():
    src = {"a": 60, "b": 60, "c": 60}
    tgt = {"a": 40, "b": 61, "d": 100}
    assert select_intersection(src, tgt) == {"b"}
    rng = np.random.default_rng(0)
    src = {f"t{i}": int(rng.integers(0, 120)) for i in range(200)}
    tgt = {f"t{i}": int(rng.integers(0, 120)) for i in range(200)}
    assert select_intersection(src, tgt) <= select_cumulative(src)


def test_chi2_hand_cases():
    # balanced classes, term count s entirely in class 1 -> statistic = s
    vocab = Vocabulary(["only1", "even", "zero"], [100, 100, 100])
    counts = np.array(
        [[4, 3, 0], [8, 2, 0], [0, 3, 0], [0, 2, 0]], dtype=np.int64
    )
    dtm = DocumentTermMatrix(
        ["u1", "u2", "u3", "u4"], vocab, sp.csr_matrix(counts), [1, 1, 0, 0]
    )
    stats = chi2_statistics(dtm)
    s = 12.0  # total count of "only1", all in class 1
    assert stats[0] == pytest.approx(s)
    assert stats[1] == pytest.approx(0.0)  # identical class-wise counts
    assert stats[2] == pytest.approx(0.0)  # zero total count
    assert np.all(stats >= 0)


def test_random_scores_seeded():
    base = [f"w{i}" for i in range(100)]
    s1 = score_random(base, seed=7)
    s2 = score_random(base, seed=7)
    s3 = score_random(base, seed=8)
    assert s1.scores == s2.scores
    order1 = sorted(base, key=lambda t: s1.scores[t])
    order3 = sorted(base, key=lambda t: s3.scores[t])
    assert order1 != order3


def test_rank_normalize_and_weighted_top():
    scores = {"a": 0.2, "b": 0.9, "c": 0.5}
    norm = rank_normalize(scores)
    assert norm == {"a": 0.0, "c": 0.5, "b": 1.0}
    coef = SelectionScore("coefficient", {"a": 2.0, "b": 9.0, "c": 5.0}, {})
    over = SelectionScore("overlap", {"a": 0.1, "b": 0.8, "c": 0.3}, {})
    weighted = score_weighted(coef, over)
    assert weighted.scores["b"] == pytest.approx(1.0)  # top by both inputs
    assert weighted.scores["a"] == pytest.approx(0.0)


def test_weighted_requires_matching_coverage():
    coef = SelectionScore("coefficient", {"a": 1.0}, {})
    over = SelectionScore("overlap", {"b": 0.5}, {})
    with pytest.raises(ValueError):
        score_weighted(coef, over)


def test_take_top_sizes_and_ordering():
    base = [f"t{i}" for i in range(10)]
    score = SelectionScore("frequency", {t: float(i) for i, t in enumerate(base)}, {})
    top1 = take_top(score, 10, base)
    assert top1.terms == ("t9",)
    full = take_top(score, 100, base)
    assert set(full.terms) == set(base)
    with pytest.raises(ValueError):
        take_top(score, 15, base)  # off-grid percentile
    with pytest.raises(ValueError):
        take_top(score, 10, base + ["missing"])


def test_take_top_tie_break_lexicographic():
    base = ["b", "a", "c", "d"]
    score = SelectionScore("frequency", {t: 1.0 for t in base}, {})
    assert take_top(score, 50, base).terms == ("a", "b")


def _stability_stub(scores):
    records = [
        StabilityRecord(t, s, 100, 100, 5, (), ()) for t, s in scores.items()
    ]
    return StabilityTable(("P", "Q"), records, k=5, cf_nb=1, cf_shift=1)


def test_overlap_passthrough_argmax():
    table = _stability_stub({"a": 0.2, "b": 0.9, "c": 0.4})
    score = score_overlap(table, ["a", "b", "c"])
    assert max(score.scores, key=score.scores.get) == "b"
    assert score.scores == {"a": 0.2, "b": 0.9, "c": 0.4}
    with pytest.raises(ValueError):
        score_overlap(table, ["a", "zz"])


def _coef_model(weights):
    terms = tuple(sorted(weights))
    w = np.array([weights[t] for t in terms])
    return ClassifierModel(
        terms=terms,
        tfidf=TfidfTransform(terms, np.ones(len(terms))),
        w=w,
        b=0.0,
        c=1.0,
    )


def test_coefficient_scores_absolute_weights():
    model = _coef_model({"a": -3.0, "b": 1.0, "c": 2.0})
    score = score_coefficient(model, ["a", "b", "c"])
    assert score.scores == {"a": 3.0, "b": 1.0, "c": 2.0}
    with pytest.raises(ValueError):
        score_coefficient(model, ["nope"])


def test_missing_prerequisites_name_the_method():
    with pytest.raises(ValueError, match="frequency"):
        score_frequency({"a": 5}, ["a", "b"])
    vocab = Vocabulary(["a"], [10])
    dtm = DocumentTermMatrix(["u"], vocab, sp.csr_matrix(np.array([[1]])))
    with pytest.raises(ValueError, match="chi2"):
        score_chi2(dtm, ["a"])  # unlabeled


def test_sweep_nested_and_subset_chain():
    rng = np.random.default_rng(42)
    for trial in range(10):
        src = {f"t{i}": int(rng.integers(0, 200)) for i in range(150)}
        tgt = {f"t{i}": int(rng.integers(0, 200)) for i in range(150)}
        cumulative = select_cumulative(src)
        intersection = select_intersection(src, tgt)
        if not intersection:
            continue
        score = score_random(sorted(intersection), seed=trial)
        selections = sweep(score, sorted(intersection))
        previous = set()
        for p in PERCENTILES:
            current = set(selections[p].terms)
            assert previous <= current  # nested in p
            assert current <= intersection <= cumulative
            previous = current
        assert set(selections[100].terms) == intersection


def test_cumulative_and_intersection_scores():
    src = {"a": 100, "b": 60, "c": 51, "d": 10}
    tgt = {"a": 52, "b": 70, "c": 40, "d": 500}
    cum = score_cumulative(src)
    assert set(cum.scores) == {"a", "b", "c"}
    assert take_top(cum, 10, sorted(cum.scores)).terms == ("a",)
    inter = score_intersection(src, tgt)
    assert set(inter.scores) == {"a", "b"}
    # ranked by the weaker period: min(a)=52, min(b)=60
    assert take_top(inter, 50, sorted(inter.scores)).terms == ("b",)


def test_selection_json_roundtrip(tmp_path):
    base = [f"t{i}" for i in range(7)]
    score = SelectionScore("frequency", {t: float(i) for i, t in enumerate(base)}, {})
    selections = [take_top(score, p, base) for p in (10, 50, 100)]
    path = tmp_path / "selections.json"
    selections_to_json(selections, path)
    loaded = selections_from_json(path)
    assert [s.to_dict() for s in loaded] == [s.to_dict() for s in selections]


def test_scores_csv_export(tmp_path):
    score = SelectionScore("frequency", {"b": 2.0, "a": 1.0}, {})
    path = tmp_path / "scores.csv"
    score.to_csv(path)
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "term,score"
    assert lines[1].startswith("a,")
