"""Collocation learning and merge application."""
import pytest

from semshift.corpus import PhraseModel, apply_phrases, learn_phrases, phrase_score


def test_score_matches_hand_computation():
    # corpus of 200 tokens; pair seen 15 times, parts 20 and 30 times
    assert phrase_score(15, 20, 30, 200, 5) == pytest.approx(10.0 / 3.0)
    # (12 - 5) * 400 / (14 * 20) = 10.0
    assert phrase_score(12, 14, 20, 400, 5) == pytest.approx(10.0)


def test_score_rejects_nonpositive_counts():
    with pytest.raises(ValueError):
        phrase_score(5, 0, 3, 100, 5)
    with pytest.raises(ValueError):
        phrase_score(5, 3, 3, 0, 5)


def _repeat_corpus():
    # 40 docs x 12 tokens, T = 480. Target pairs appear 40 times:
    # score = (40 - 5) * 480 / (40 * 40) = 10.5 > 10. Unique filler keeps
    # every other adjacent pair below min_count.
    streams = []
    for i in range(40):
        streams.append(
            ["new", "york", f"u{i}", "big", "apple"] + [f"v{i}{j}" for j in range(7)]
        )
    return streams


def test_learned_merges_and_application():
    streams = _repeat_corpus()
    model = learn_phrases(streams, min_count=5, threshold=10.0, passes=1)
    assert ("new", "york") in model.merges
    assert ("big", "apple") in model.merges
    merged = apply_phrases("i saw new york yesterday".split(), model)
    assert merged == ["i", "saw", "new_york", "yesterday"]


def test_strict_gates():
    # pair count exactly at min_count scores zero: (c - min_count) = 0
    streams = [["a", "b", "c", "d"]] * 5 + [["x", "y"]] * 40
    model = learn_phrases(streams, min_count=5, threshold=0.0, passes=1)
    assert ("a", "b") not in model.merges  # score 0 is not > 0
    # below min_count never merges no matter the score
    streams = [["p", "q"]] * 4 + [["r"]] * 100
    model = learn_phrases(streams, min_count=5, threshold=0.0, passes=1)
    assert ("p", "q") not in model.merges


def test_two_passes_build_trigrams():
    streams = [["new", "york", "times"] for _ in range(30)]
    streams += [["new", "york", "cold"] for _ in range(30)]
    model = learn_phrases(streams, min_count=5, threshold=1.0, passes=2)
    out = apply_phrases(["new", "york", "times"], model)
    assert out == ["new_york_times"]


def test_greedy_leftmost_non_overlapping():
    model = PhraseModel(
        merges={("a", "b"): 11.0, ("b", "c"): 12.0}, threshold=10.0, passes=1
    )
    assert apply_phrases(["a", "b", "c"], model) == ["a_b", "c"]


def test_empty_corpus_gives_empty_model():
    model = learn_phrases([], min_count=5, threshold=10.0)
    assert len(model) == 0
    assert apply_phrases(["a", "b"], model) == ["a", "b"]


def test_model_validates_scores():
    with pytest.raises(ValueError):
        PhraseModel(merges={("a", "b"): 10.0}, threshold=10.0)


def test_apply_is_idempotent_on_merged_output():
    streams = _repeat_corpus()
    model = learn_phrases(streams, min_count=5, threshold=10.0, passes=2)
    for raw in streams:
        once = apply_phrases(raw, model)
        assert apply_phrases(once, model) == once
