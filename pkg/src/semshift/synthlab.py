"""Synthetic two-period corpora with planted semantic shift and class signal.

The generator draws unigram documents from topic mixtures. Each term
belongs to one topic; a chosen fraction of terms swaps topic between
period 1 and period 2, which changes their co-occurrence neighborhoods
(the planted semantic shift). A chosen signal set is over-sampled in
positive-class users' posts; the overlap knob controls how many signal
terms are also shifted. Shifted signal terms lose their class
association in period 2 (the new dominant usage is class-neutral), which
is the mechanism that makes vocabulary choice matter downstream.

Everything is deterministic given the spec's seed, down to output bytes.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import stats

from .shift import DEFAULT_K, StabilityRecord, StabilityTable

# period start times (UTC): 2020-01-01 and 2020-07-01
PERIOD_STARTS = (1577836800, 1593561600)

# per-term sampling-weight bounds; the narrow band keeps frequency
# rankings non-degenerate while guaranteeing every term in the default
# spec clears a 50-count eligibility floor in both periods
WEIGHT_RANGE = (0.9, 1.1)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a generated two-period corpus.

    Attributes
    ----------
    vocab_size, n_topics : int
        Number of terms and number of topics they are spread over
        (round-robin assignment in period 1).
    users_per_class : int
        Users per class per period; each period gets fresh user ids.
    posts_per_user, post_length : int
        Posts per user and tokens per post.
    topics_per_doc : int
        Distinct topics mixed per post.
    shift_fraction : float
        Fraction of the vocabulary whose topic is swapped in period 2.
    signal_count : int
        Number of terms over-sampled for positive-class users.
    signal_boost : float
        Sampling-weight multiplier for signal terms in positive posts.
    overlap : float
        Fraction of signal terms that are also shifted. Shifted signal
        terms keep the boost in period 1 but lose it in period 2.
    drift_boost : float
        Period-2 popularity multiplier for shifted terms (a surge of the
        new usage); 1.0 disables it.
    seed : int
        Root seed; (spec, seed) fully determines the output bytes.
    """

    vocab_size: int = 10_000
    n_topics: int = 20
    users_per_class: int = 100
    posts_per_user: int = 80
    post_length: int = 75
    topics_per_doc: int = 2
    shift_fraction: float = 0.05
    signal_count: int = 200
    signal_boost: float = 3.0
    overlap: float = 0.0
    drift_boost: float = 1.0
    seed: int = 1

    def __post_init__(self) -> None:
        for name in (
            "vocab_size",
            "n_topics",
            "users_per_class",
            "posts_per_user",
            "post_length",
            "topics_per_doc",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.topics_per_doc > self.n_topics:
            raise ValueError("topics_per_doc cannot exceed n_topics")
        for name in ("shift_fraction", "overlap"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.signal_count <= self.vocab_size:
            raise ValueError("signal_count must lie in [0, vocab_size]")
        for name in ("signal_boost", "drift_boost"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        n_shift = self.shift_count
        n_both = self.overlap_count
        if n_both > n_shift:
            raise ValueError(
                f"overlap places {n_both} signal terms in the shift set but "
                f"shift_fraction only allows {n_shift} shifted terms"
            )
        if n_shift - n_both > self.vocab_size - self.signal_count:
            raise ValueError("not enough non-signal terms to fill the shift set")
        if n_shift > 0 and self.n_topics < 2:
            raise ValueError("shifting terms requires at least 2 topics")

    @property
    def shift_count(self) -> int:
        return int(round(self.shift_fraction * self.vocab_size))

    @property
    def overlap_count(self) -> int:
        return int(round(self.overlap * self.signal_count))


@dataclass(frozen=True)
class SynthResult:
    """Generated posts (ingest-ready dicts) plus the ground-truth manifest."""

    posts: tuple[dict, ...]
    manifest: dict


def _term_names(vocab_size: int) -> np.ndarray:
    width = max(5, len(str(vocab_size - 1)))
    return np.array([f"t{i:0{width}d}" for i in range(vocab_size)])


def _topic_tables(
    assignment: np.ndarray,
    weights_neg: np.ndarray,
    weights_pos: np.ndarray,
    n_topics: int,
) -> tuple[list[np.ndarray], dict[int, list[np.ndarray]]]:
    """Per-topic member indices and per-class sampling CDFs."""
    members = [np.flatnonzero(assignment == t) for t in range(n_topics)]
    cdfs: dict[int, list[np.ndarray]] = {0: [], 1: []}
    for label, weights in ((0, weights_neg), (1, weights_pos)):
        for t in range(n_topics):
            w = weights[members[t]]
            cdf = np.cumsum(w)
            cdf /= cdf[-1]
            cdf[-1] = 1.0
            cdfs[label].append(cdf)
    return members, cdfs


def generate(spec: SynthSpec) -> SynthResult:
    """Draw the two-period corpus and its ground-truth manifest.

    Returns
    -------
    SynthResult
        ``posts`` hold dicts with the keys the ingest schema expects
        (user_id, timestamp, text, label); ``manifest`` records the
        planted shift set, signal set, user labels, topic assignments,
        and period boundaries.
    """
    rng = np.random.default_rng(spec.seed)
    v, n_topics = spec.vocab_size, spec.n_topics
    terms = _term_names(v)
    topic_p1 = np.arange(v) % n_topics
    weights = rng.uniform(*WEIGHT_RANGE, size=v)

    signal_idx = np.sort(rng.choice(v, size=spec.signal_count, replace=False))
    n_shift, n_both = spec.shift_count, spec.overlap_count
    shifted_signal = np.sort(rng.choice(signal_idx, size=n_both, replace=False))
    non_signal = np.setdiff1d(np.arange(v), signal_idx)
    shifted_other = np.sort(
        rng.choice(non_signal, size=n_shift - n_both, replace=False)
    )
    shift_idx = np.sort(np.concatenate([shifted_signal, shifted_other])).astype(np.int64)

    topic_p2 = topic_p1.copy()
    if n_shift:
        jumps = rng.integers(1, n_topics, size=n_shift)
        topic_p2[shift_idx] = (topic_p1[shift_idx] + jumps) % n_topics

    is_signal = np.zeros(v, dtype=bool)
    is_signal[signal_idx] = True
    is_shifted = np.zeros(v, dtype=bool)
    is_shifted[shift_idx] = True

    posts: list[dict] = []
    user_labels: dict[str, int] = {}
    period_bounds: dict[str, dict[str, int]] = {}
    tpd, length = spec.topics_per_doc, spec.post_length
    for period in (1, 2):
        assignment = topic_p1 if period == 1 else topic_p2
        base_w = weights.copy()
        boosted = is_signal.copy()
        if period == 2:
            base_w[shift_idx] *= spec.drift_boost
            boosted &= ~is_shifted
        pos_w = base_w * np.where(boosted, spec.signal_boost, 1.0)
        members, cdfs = _topic_tables(assignment, base_w, pos_w, n_topics)

        start = PERIOD_STARTS[period - 1]
        counter = 0
        for label in (0, 1):
            for u in range(spec.users_per_class):
                uid = f"p{period}c{label}u{u:04d}"
                user_labels[uid] = label
                for _ in range(spec.posts_per_user):
                    doc_topics = rng.choice(n_topics, size=tpd, replace=False)
                    picks = rng.integers(0, tpd, size=length)
                    counts = np.bincount(picks, minlength=tpd)
                    parts = []
                    for slot in range(tpd):
                        c = counts[slot]
                        if c == 0:
                            continue
                        topic = int(doc_topics[slot])
                        pos = np.searchsorted(
                            cdfs[label][topic], rng.random(c), side="right"
                        )
                        np.clip(pos, 0, len(members[topic]) - 1, out=pos)
                        parts.append(members[topic][pos])
                    token_idx = np.concatenate(parts)
                    rng.shuffle(token_idx)
                    posts.append(
                        {
                            "user_id": uid,
                            "timestamp": start + counter,
                            "text": " ".join(terms[token_idx]),
                            "label": label,
                        }
                    )
                    counter += 1
        period_bounds[f"p{period}"] = {"start": start, "end": start + counter}

    manifest = {
        "spec": asdict(spec),
        "vocabulary": terms.tolist(),
        "shifted_terms": terms[shift_idx].tolist(),
        "signal_terms": terms[signal_idx].tolist(),
        "user_labels": user_labels,
        "periods": period_bounds,
        "topics_p1": topic_p1.tolist(),
        "topics_p2": topic_p2.tolist(),
    }
    return SynthResult(posts=tuple(posts), manifest=manifest)


def write_result(
    result: SynthResult, corpus_path: str | Path, manifest_path: str | Path
) -> None:
    """Write the line-delimited JSON corpus and the manifest file."""
    with open(corpus_path, "w", encoding="utf-8", newline="\n") as handle:
        for post in result.posts:
            handle.write(json.dumps(post, sort_keys=True, separators=(",", ":")))
            handle.write("\n")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(json.dumps(result.manifest, sort_keys=True, indent=2))
        handle.write("\n")


def load_manifest(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def expected_marginals(spec: SynthSpec, manifest: Mapping, period: int) -> np.ndarray:
    """Analytic per-term occurrence probabilities for one period.

    Topics enter documents symmetrically, so a token lands in any given
    topic with probability 1/n_topics and then picks a member term by
    its (class-conditional) weight. Classes are balanced, so the overall
    marginal is the mean of the two class-conditional marginals.
    """
    v = spec.vocab_size
    rng = np.random.default_rng(spec.seed)
    weights = rng.uniform(*WEIGHT_RANGE, size=v)
    terms = _term_names(v)
    order = {t: i for i, t in enumerate(terms)}
    is_signal = np.zeros(v, dtype=bool)
    is_signal[[order[t] for t in manifest["signal_terms"]]] = True
    is_shifted = np.zeros(v, dtype=bool)
    is_shifted[[order[t] for t in manifest["shifted_terms"]]] = True
    assignment = np.asarray(manifest["topics_p1" if period == 1 else "topics_p2"])

    base_w = weights.copy()
    boosted = is_signal.copy()
    if period == 2:
        base_w[is_shifted] *= spec.drift_boost
        boosted &= ~is_shifted
    pos_w = base_w * np.where(boosted, spec.signal_boost, 1.0)

    marginal = np.zeros(v)
    for class_w, share in ((base_w, 0.5), (pos_w, 0.5)):
        for t in range(spec.n_topics):
            m = assignment == t
            topic_total = class_w[m].sum()
            marginal[m] += share * class_w[m] / (topic_total * spec.n_topics)
    return marginal


def evaluate_detector(manifest: Mapping, table: StabilityTable) -> float:
    """Ranking AUC of (1 - S) as a detector of planted shift.

    Every manifest vocabulary term must appear in the table; a coverage
    gap raises with the missing terms listed.
    """
    vocabulary = list(manifest["vocabulary"])
    shifted = set(manifest["shifted_terms"])
    missing = [t for t in vocabulary if t not in table]
    if missing:
        shown = ", ".join(missing[:20])
        more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
        raise ValueError(
            f"stability table missing {len(missing)} manifest terms: {shown}{more}"
        )
    scores = np.array([1.0 - table.score(t) for t in vocabulary])
    labels = np.array([t in shifted for t in vocabulary])
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("detector AUC needs both shifted and stable terms")
    ranks = stats.rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def manifest_table(manifest: Mapping, k: int = DEFAULT_K) -> StabilityTable:
    """Ground-truth stability table: shifted terms 0.0, stable terms 1.0.

    Useful for exercising selection and prevalence machinery against the
    planted truth without training embeddings.
    """
    shifted = set(manifest["shifted_terms"])
    records = [
        StabilityRecord(
            term=t,
            score=0.0 if t in shifted else 1.0,
            freq_p=1,
            freq_q=1,
            k_effective=k,
            neighbors_p=(),
            neighbors_q=(),
        )
        for t in manifest["vocabulary"]
    ]
    return StabilityTable(("p1", "p2"), records, k=k, cf_nb=0, cf_shift=0)
