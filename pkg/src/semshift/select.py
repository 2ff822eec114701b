"""Vocabulary selection: eight scoring methods plus the percentile sweep.

Two frequency-gated base sets anchor everything: the source-period set
(count > floor in the source) and the intersection set (count > floor in
both periods). Score-driven methods rank the intersection set and the
sweep takes the top p percent, so every swept vocabulary is nested in the
intersection set, which is nested in the source set.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus.slicing import DocumentTermMatrix
from .model import ClassifierModel
from .shift import StabilityTable

FREQUENCY_FLOOR = 50
PERCENTILES = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
METHODS = (
    "cumulative",
    "intersection",
    "frequency",
    "random",
    "chi2",
    "coefficient",
    "overlap",
    "weighted",
)


@dataclass(frozen=True)
class SelectionScore:
    """Per-term ranking scores for one method, with input provenance."""

    method: str
    scores: Mapping[str, float]
    provenance: Mapping[str, str]

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        bad = {t: s for t, s in self.scores.items() if not math.isfinite(s)}
        if bad:
            raise ValueError(f"{self.method}: non-finite scores for {sorted(bad)[:5]}")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["term", "score"])
            for term in sorted(self.scores):
                writer.writerow([term, f"{self.scores[term]:.12g}"])


@dataclass(frozen=True)
class SelectedVocabulary:
    """Ordered outcome of taking the top p percent of a scored base set."""

    method: str
    p: int
    terms: tuple[str, ...]
    base_size: int

    def __post_init__(self) -> None:
        if self.p not in PERCENTILES:
            raise ValueError(f"p must be one of {PERCENTILES}, got {self.p}")
        expected = math.ceil(self.p / 100 * self.base_size)
        if len(self.terms) != expected:
            raise ValueError(
                f"{self.method} p={self.p}: {len(self.terms)} terms, expected {expected}"
            )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "p": self.p,
            "terms": list(self.terms),
            "base_size": self.base_size,
        }


def select_cumulative(source_counts: Mapping[str, int], floor: int = FREQUENCY_FLOOR) -> set[str]:
    """Terms strictly above the frequency floor in the source period."""
    return {t for t, c in source_counts.items() if c > floor}


def select_intersection(
    source_counts: Mapping[str, int],
    target_counts: Mapping[str, int],
    floor: int = FREQUENCY_FLOOR,
) -> set[str]:
    """Terms strictly above the floor in both periods."""
    return {
        t
        for t, c in source_counts.items()
        if c > floor and target_counts.get(t, 0) > floor
    }


def score_cumulative(
    source_counts: Mapping[str, int], floor: int = FREQUENCY_FLOOR
) -> SelectionScore:
    base = select_cumulative(source_counts, floor)
    return SelectionScore(
        "cumulative",
        {t: float(source_counts[t]) for t in base},
        {"inputs": "source counts", "floor": str(floor)},
    )


def score_intersection(
    source_counts: Mapping[str, int],
    target_counts: Mapping[str, int],
    floor: int = FREQUENCY_FLOOR,
) -> SelectionScore:
    """Intersection terms ranked by their weaker-period frequency."""
    base = select_intersection(source_counts, target_counts, floor)
    return SelectionScore(
        "intersection",
        {t: float(min(source_counts[t], target_counts[t])) for t in base},
        {"inputs": "source+target counts", "floor": str(floor)},
    )


def score_frequency(
    source_counts: Mapping[str, int], base: Sequence[str]
) -> SelectionScore:
    missing = [t for t in base if t not in source_counts]
    if missing:
        raise ValueError(f"frequency: no source count for {missing[:5]}")
    return SelectionScore(
        "frequency",
        {t: float(source_counts[t]) for t in base},
        {"inputs": "source counts"},
    )


def score_random(base: Sequence[str], seed: int) -> SelectionScore:
    rng = np.random.default_rng(seed)
    ordered = sorted(base)
    draws = rng.random(len(ordered))
    return SelectionScore(
        "random",
        dict(zip(ordered, draws.tolist())),
        {"inputs": "seed", "seed": str(seed)},
    )


def chi2_statistics(dtm: DocumentTermMatrix) -> np.ndarray:
    """Count-based chi-squared per column of a labeled matrix.

    Observed: per-class summed counts of the term. Expected: the class's
    share of rows times the term's total count. Terms with zero total
    count score 0.
    """
    if dtm.labels is None:
        raise ValueError("chi2 requires a labeled matrix")
    y = np.asarray(dtm.labels)
    counts = sp.csr_matrix(dtm.counts, dtype=np.float64)
    n = counts.shape[0]
    stats = np.zeros(counts.shape[1])
    total = np.asarray(counts.sum(axis=0)).ravel()
    for cls in (0, 1):
        rows = np.flatnonzero(y == cls)
        observed = np.asarray(counts[rows].sum(axis=0)).ravel()
        expected = (len(rows) / n) * total
        nonzero = expected > 0
        stats[nonzero] += (observed[nonzero] - expected[nonzero]) ** 2 / expected[nonzero]
    return stats


def score_chi2(dtm: DocumentTermMatrix, base: Sequence[str]) -> SelectionScore:
    missing = [t for t in base if t not in dtm.vocab]
    if missing:
        raise ValueError(f"chi2: matrix lacks terms {missing[:5]}")
    stats = chi2_statistics(dtm)
    return SelectionScore(
        "chi2",
        {t: float(stats[dtm.vocab.index(t)]) for t in base},
        {"inputs": "labeled source matrix"},
    )


def score_coefficient(model: ClassifierModel, base: Sequence[str]) -> SelectionScore:
    """Absolute weight of each base term in a model trained on the full base."""
    index = {t: i for i, t in enumerate(model.terms)}
    missing = [t for t in base if t not in index]
    if missing:
        raise ValueError(f"coefficient: model lacks terms {missing[:5]}")
    return SelectionScore(
        "coefficient",
        {t: float(abs(model.w[index[t]])) for t in base},
        {"inputs": "intersection-vocabulary model", "C": str(model.c)},
    )


def score_overlap(table: StabilityTable, base: Sequence[str]) -> SelectionScore:
    missing = [t for t in base if t not in table]
    if missing:
        raise ValueError(f"overlap: stability table lacks terms {missing[:5]}")
    return SelectionScore(
        "overlap",
        {t: table.score(t) for t in base},
        {"inputs": "stability table", "k": str(table.k)},
    )


def rank_normalize(scores: Mapping[str, float]) -> dict[str, float]:
    """Map scores to [0, 1] by ascending ordinal rank, ties by term order.

    The best-scoring term gets 1.0; a single-element input also maps to 1.0.
    """
    ordered = sorted(scores, key=lambda t: (scores[t], t))
    n = len(ordered)
    if n == 1:
        return {ordered[0]: 1.0}
    return {t: i / (n - 1) for i, t in enumerate(ordered)}


def score_weighted(
    coefficient: SelectionScore, overlap: SelectionScore
) -> SelectionScore:
    """Equal-weight blend of rank-normalized coefficient and overlap scores."""
    if coefficient.method != "coefficient" or overlap.method != "overlap":
        raise ValueError("weighted requires coefficient and overlap score inputs")
    if set(coefficient.scores) != set(overlap.scores):
        raise ValueError("weighted: coefficient and overlap cover different terms")
    rank_c = rank_normalize(coefficient.scores)
    rank_o = rank_normalize(overlap.scores)
    return SelectionScore(
        "weighted",
        {t: 0.5 * rank_c[t] + 0.5 * rank_o[t] for t in rank_c},
        {"inputs": "coefficient+overlap ranks"},
    )


def take_top(score: SelectionScore, p: int, base: Sequence[str]) -> SelectedVocabulary:
    """Top ceil(p% of |base|) terms by (score descending, term ascending)."""
    base_set = sorted(set(base))
    missing = [t for t in base_set if t not in score.scores]
    if missing:
        raise ValueError(f"{score.method}: scores missing for {missing[:5]}")
    ordered = sorted(base_set, key=lambda t: (-score.scores[t], t))
    n = math.ceil(p / 100 * len(base_set))
    return SelectedVocabulary(score.method, p, tuple(ordered[:n]), len(base_set))


def sweep(
    score: SelectionScore,
    base: Sequence[str],
    percentiles: Sequence[int] = PERCENTILES,
) -> dict[int, SelectedVocabulary]:
    return {p: take_top(score, p, base) for p in percentiles}


def selections_to_json(
    selections: Sequence[SelectedVocabulary], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump([s.to_dict() for s in selections], handle, indent=2, sort_keys=True)
        handle.write("\n")


def selections_from_json(path: str | Path) -> list[SelectedVocabulary]:
    with open(path, encoding="utf-8") as handle:
        raw = json.load(handle)
    return [
        SelectedVocabulary(
            method=record["method"],
            p=int(record["p"]),
            terms=tuple(record["terms"]),
            base_size=int(record["base_size"]),
        )
        for record in raw
    ]
