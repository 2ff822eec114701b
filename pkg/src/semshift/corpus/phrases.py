"""Collocation detection: learn frequent bigrams and merge them into single tokens.

A candidate pair ``(a, b)`` is merged when it clears both gates::

    count(ab) >= min_count
    score(a, b) = (count(ab) - min_count) * T / (count(a) * count(b)) > threshold

where ``T`` is the total token count of the pass. Merges join with ``_``;
running two passes promotes bigrams of merged tokens into trigrams.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence


@dataclass(frozen=True)
class PhraseModel:
    """Learned merge table plus the settings it was learned under."""

    merges: Mapping[tuple[str, str], float]
    min_count: int = 5
    threshold: float = 10.0
    passes: int = 2

    def __post_init__(self) -> None:
        if self.min_count < 1:
            raise ValueError(f"min_count must be >= 1, got {self.min_count}")
        if self.passes < 1:
            raise ValueError(f"passes must be >= 1, got {self.passes}")
        bad = {p: s for p, s in self.merges.items() if not s > self.threshold}
        if bad:
            raise ValueError(f"merge scores at or below threshold: {bad}")

    def __len__(self) -> int:
        return len(self.merges)


def phrase_score(
    pair_count: int, count_a: int, count_b: int, total: int, min_count: int
) -> float:
    """Association score of a bigram; higher means more collocation-like."""
    if count_a <= 0 or count_b <= 0 or total <= 0:
        raise ValueError("counts and total must be positive")
    return (pair_count - min_count) * total / (count_a * count_b)


def _merge_pass(tokens: Sequence[str], merges: Mapping[tuple[str, str], float]) -> list[str]:
    # Greedy leftmost scan; a merged token is not re-paired within the pass.
    out: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        if i + 1 < n and (tokens[i], tokens[i + 1]) in merges:
            out.append(tokens[i] + "_" + tokens[i + 1])
            i += 2
        else:
            out.append(tokens[i])
            i += 1
    return out


def learn_phrases(
    streams: Sequence[Sequence[str]],
    min_count: int = 5,
    threshold: float = 10.0,
    passes: int = 2,
) -> PhraseModel:
    """Learn a merge table from token streams.

    Each pass counts unigrams and adjacent bigrams over the streams (with
    merges from earlier passes already applied), then admits every pair
    clearing both gates. ``streams`` must be re-iterable across passes.
    """
    merges: dict[tuple[str, str], float] = {}
    for _ in range(passes):
        unigrams: Counter[str] = Counter()
        bigrams: Counter[tuple[str, str]] = Counter()
        total = 0
        for raw in streams:
            tokens = _merge_pass(raw, merges) if merges else list(raw)
            total += len(tokens)
            unigrams.update(tokens)
            bigrams.update(zip(tokens, tokens[1:]))
        for pair, c_ab in bigrams.items():
            if c_ab < min_count or pair in merges:
                continue
            score = phrase_score(c_ab, unigrams[pair[0]], unigrams[pair[1]], total, min_count)
            if score > threshold:
                merges[pair] = score
    return PhraseModel(merges=merges, min_count=min_count, threshold=threshold, passes=passes)


def apply_phrases(tokens: Sequence[str], model: PhraseModel) -> list[str]:
    """Rewrite ``tokens`` with the model's merges, one sweep per learned pass."""
    out = list(tokens)
    for _ in range(model.passes):
        out = _merge_pass(out, model.merges)
    return out


def save_phrases(model: PhraseModel, path: str | Path) -> None:
    payload = {
        "min_count": model.min_count,
        "threshold": model.threshold,
        "passes": model.passes,
        "merges": sorted([a, b, score] for (a, b), score in model.merges.items()),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_phrases(path: str | Path) -> PhraseModel:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    return PhraseModel(
        merges={(a, b): float(score) for a, b, score in payload["merges"]},
        min_count=int(payload["min_count"]),
        threshold=float(payload["threshold"]),
        passes=int(payload["passes"]),
    )
