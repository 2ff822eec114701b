"""Prevalence estimation, prevalence change, and keyword time series.

Prevalence here is the fraction of eligible users whose predicted
positive-class probability strictly exceeds 0.5. Eligibility (minimum
posts per period) is enforced upstream when the per-period matrix is
built; this module works on already-gated matrices.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus.phrases import PhraseModel, apply_phrases
from .corpus.posts import PostStore
from .corpus.slicing import DocumentTermMatrix
from .corpus.tokenize import tokenize
from .model import ClassifierModel

# minimum posts per period for a user to enter prevalence estimates,
# keyed by platform profile
MIN_POSTS_PROFILES = {"twitter": 200, "reddit": 100}


@dataclass(frozen=True)
class PrevalenceEstimate:
    period: str
    eligible: int
    positive: int

    def __post_init__(self) -> None:
        if self.eligible < 1:
            raise ValueError("no eligible users in the period")
        if not 0 <= self.positive <= self.eligible:
            raise ValueError(
                f"positive count {self.positive} outside [0, {self.eligible}]"
            )

    @property
    def prevalence(self) -> float:
        return self.positive / self.eligible


@dataclass(frozen=True)
class PrevalenceChange:
    """Absolute change in percentage points; relative change in percent.

    ``relative_pct`` is None (and ``flagged`` True) when the pre-period
    prevalence is zero and the ratio is undefined.
    """

    absolute_pp: float
    relative_pct: float | None
    flagged: bool = False


def estimate_prevalence(
    model: ClassifierModel, dtm: DocumentTermMatrix, period: str
) -> PrevalenceEstimate:
    """Score every row of the (already gated) period matrix."""
    if len(dtm.users) == 0:
        raise ValueError(f"period {period!r}: zero eligible users")
    probs = model.predict_proba(dtm)
    positive = int(np.sum(probs > 0.5))
    return PrevalenceEstimate(period=period, eligible=len(dtm.users), positive=positive)


def prevalence_change(
    pre: PrevalenceEstimate, during: PrevalenceEstimate
) -> PrevalenceChange:
    delta = during.prevalence - pre.prevalence
    if pre.prevalence > 0:
        return PrevalenceChange(
            absolute_pp=100.0 * delta,
            relative_pct=100.0 * delta / pre.prevalence,
        )
    return PrevalenceChange(absolute_pp=100.0 * delta, relative_pct=None, flagged=True)


@dataclass(frozen=True)
class KeywordSeries:
    """Per-month fraction of posts containing a term; None marks empty months."""

    term: str
    buckets: tuple[str, ...]
    proportions: tuple[float | None, ...]

    def __post_init__(self) -> None:
        if len(self.buckets) != len(self.proportions):
            raise ValueError("buckets and proportions must align")
        for p in self.proportions:
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError(f"proportion {p} outside [0, 1]")


def _month_bucket(timestamp: float) -> str:
    stamp = datetime.fromtimestamp(timestamp, tz=timezone.utc)
    return f"{stamp.year:04d}-{stamp.month:02d}"


def _month_range(first: str, last: str) -> list[str]:
    y, m = (int(x) for x in first.split("-"))
    end_y, end_m = (int(x) for x in last.split("-"))
    out = []
    while (y, m) <= (end_y, end_m):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m > 12:
            m, y = 1, y + 1
    return out


def keyword_series(
    store: PostStore,
    terms: Sequence[str],
    phrases: PhraseModel | None = None,
) -> list[KeywordSeries]:
    """Monthly containment proportions for each term over the whole store.

    Buckets run contiguously from the first to the last posted month;
    months without posts carry None rather than zero.
    """
    if len(store) == 0:
        raise ValueError("empty post store")
    totals: dict[str, int] = defaultdict(int)
    hits: dict[str, dict[str, int]] = {t: defaultdict(int) for t in terms}
    for post in store.all_posts():
        bucket = _month_bucket(post.timestamp)
        tokens = tokenize(post.text)
        if phrases is not None:
            tokens = apply_phrases(tokens, phrases)
        token_set = set(tokens)
        totals[bucket] += 1
        for term in terms:
            if term in token_set:
                hits[term][bucket] += 1
    months = _month_range(min(totals), max(totals))
    series = []
    for term in terms:
        proportions = tuple(
            (hits[term][m] / totals[m]) if totals.get(m) else None for m in months
        )
        series.append(KeywordSeries(term=term, buckets=tuple(months), proportions=proportions))
    return series


def series_to_csv(series: Sequence[KeywordSeries], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["term", "bucket", "proportion"])
        for s in series:
            for bucket, prop in zip(s.buckets, s.proportions):
                writer.writerow([s.term, bucket, "" if prop is None else f"{prop:.10g}"])


def pmi_class_scores(dtm: DocumentTermMatrix) -> np.ndarray:
    """ln(P(term | positive class) / P(term)) per column, add-one smoothed.

    Positive scores mark terms over-represented among positive users; the
    usual picker for indicative keyword panels.
    """
    if dtm.labels is None:
        raise ValueError("class PMI requires a labeled matrix")
    counts = dtm.counts
    y = np.asarray(dtm.labels)
    pos_rows = np.flatnonzero(y == 1)
    if pos_rows.size == 0:
        raise ValueError("no positive-class rows")
    v = counts.shape[1]
    total_all = float(counts.sum())
    total_pos = float(counts[pos_rows].sum())
    c_all = np.asarray(counts.sum(axis=0)).ravel()
    c_pos = np.asarray(counts[pos_rows].sum(axis=0)).ravel()
    p_term = (c_all + 1.0) / (total_all + v)
    p_term_pos = (c_pos + 1.0) / (total_pos + v)
    return np.log(p_term_pos / p_term)


def flag_divergence(
    f1_by_config: Mapping[str, float],
    change_by_config: Mapping[str, float],
    reference: str,
    comparison: str,
    sensitivity_pp: float = 5.0,
    f1_tolerance: float = 0.01,
) -> dict:
    """Report whether near-identical classifiers disagree on prevalence change.

    ``f1_by_config`` and ``change_by_config`` map vocabulary-configuration
    names to within-span F1 and absolute prevalence change (percentage
    points). The divergence flag fires when every F1 sits within
    ``f1_tolerance`` of the reference yet the reference and comparison
    changes differ by at least ``sensitivity_pp``.
    """
    for name in (reference, comparison):
        if name not in f1_by_config or name not in change_by_config:
            raise KeyError(f"configuration {name!r} missing from inputs")
    f1_spread = max(f1_by_config.values()) - min(f1_by_config.values())
    gap = abs(change_by_config[reference] - change_by_config[comparison])
    return {
        "reference": reference,
        "comparison": comparison,
        "f1_spread": f1_spread,
        "f1_tolerance": f1_tolerance,
        "change_gap_pp": gap,
        "sensitivity_pp": sensitivity_pp,
        "indistinguishable_f1": bool(f1_spread < f1_tolerance),
        "divergent_estimates": bool(gap >= sensitivity_pp),
        "divergence_detected": bool(f1_spread < f1_tolerance and gap >= sensitivity_pp),
    }


def prevalence_to_csv(
    rows: Sequence[Mapping[str, object]], path: str | Path
) -> None:
    """Write per-(method, p, period) prevalence rows."""
    fields = ["method", "p", "period", "eligible", "positive", "prevalence"]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([row[f] for f in fields])
