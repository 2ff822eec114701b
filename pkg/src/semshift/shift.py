"""Semantic stability between two embedding spaces.

For a term ``w`` present with enough support in both spaces, stability is
the fraction of its top-k nearest neighbors shared between the spaces::

    S(w) = |nb_P(w) ∩ nb_Q(w)| / k

Low S means the term's dominant contexts moved between the periods.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .embed.neighbors import METRICS, nearest_neighbors
from .embed.space import EmbeddingSpace

DEFAULT_K = 500
DEFAULT_CF_NB = 50
DEFAULT_CF_SHIFT = 50

CSV_HEADER = ["term", "S", "freq_P", "freq_Q"]


@dataclass(frozen=True)
class StabilityRecord:
    term: str
    score: float
    freq_p: int
    freq_q: int
    k_effective: int
    neighbors_p: tuple[str, ...]
    neighbors_q: tuple[str, ...]


class StabilityTable:
    """Per-term stability records, sorted ascending by score (most shifted first)."""

    def __init__(
        self,
        pair: tuple[str, str],
        records: Sequence[StabilityRecord],
        k: int,
        cf_nb: int,
        cf_shift: int,
        metric: str = "cosine",
    ):
        self.pair = pair
        self.records = tuple(
            sorted(records, key=lambda r: (r.score, r.term))
        )
        self.k = k
        self.cf_nb = cf_nb
        self.cf_shift = cf_shift
        self.metric = metric
        self._by_term = {r.term: r for r in self.records}
        if len(self._by_term) != len(self.records):
            raise ValueError("duplicate terms in stability table")
        for r in self.records:
            if not 0.0 <= r.score <= 1.0:
                raise ValueError(f"{r.term}: score {r.score} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, term: str) -> bool:
        return term in self._by_term

    @property
    def terms(self) -> tuple[str, ...]:
        return tuple(r.term for r in self.records)

    def record(self, term: str) -> StabilityRecord:
        return self._by_term[term]

    def score(self, term: str) -> float:
        return self._by_term[term].score

    def scores(self) -> dict[str, float]:
        return {r.term: r.score for r in self.records}

    def truncated(self, term: str) -> bool:
        return self._by_term[term].k_effective < self.k

    def truncated_terms(self) -> tuple[str, ...]:
        return tuple(r.term for r in self.records if r.k_effective < self.k)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_HEADER)
            for r in self.records:
                writer.writerow([r.term, f"{r.score:.10g}", r.freq_p, r.freq_q])

    @classmethod
    def from_csv(
        cls, path: str | Path, pair: tuple[str, str] = ("P", "Q"), k: int = DEFAULT_K
    ) -> "StabilityTable":
        """Rehydrate scores from CSV; neighbor lists are not stored there."""
        records = []
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise ValueError(f"{path}: expected header {CSV_HEADER}, got {header}")
            for row in reader:
                records.append(
                    StabilityRecord(
                        term=row[0],
                        score=float(row[1]),
                        freq_p=int(row[2]),
                        freq_q=int(row[3]),
                        k_effective=k,
                        neighbors_p=(),
                        neighbors_q=(),
                    )
                )
        return cls(pair, records, k=k, cf_nb=0, cf_shift=0)


def _eligible_queries(
    space_p: EmbeddingSpace, space_q: EmbeddingSpace, cf_shift: int
) -> list[str]:
    return sorted(
        t
        for t in space_p.vocab.terms
        if space_p.vocab.freq(t) >= cf_shift
        and t in space_q.vocab
        and space_q.vocab.freq(t) >= cf_shift
    )


def _pool(space: EmbeddingSpace, cf_nb: int) -> list[str]:
    return [t for t in space.vocab.terms if space.vocab.freq(t) >= cf_nb]


def stability_table(
    space_p: EmbeddingSpace,
    space_q: EmbeddingSpace,
    k: int = DEFAULT_K,
    cf_nb: int = DEFAULT_CF_NB,
    cf_shift: int = DEFAULT_CF_SHIFT,
    metric: str = "cosine",
    pair: tuple[str, str] = ("P", "Q"),
) -> StabilityTable:
    """Stability for every term with frequency >= cf_shift in both spaces.

    Neighbor pools are per-space terms with frequency >= cf_nb. When a pool
    cannot supply k neighbors, the record is scored over
    min(k, pool_P, pool_Q) and flagged via its ``k_effective``.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    queries = _eligible_queries(space_p, space_q, cf_shift)
    if not queries:
        raise ValueError(
            f"no terms reach frequency {cf_shift} in both spaces; lower cf_shift"
        )
    pool_p = _pool(space_p, cf_nb)
    pool_q = _pool(space_q, cf_nb)
    table_p = nearest_neighbors(space_p, queries, k, pool_terms=pool_p, metric=metric)
    table_q = nearest_neighbors(space_q, queries, k, pool_terms=pool_q, metric=metric)

    records = []
    for term in queries:
        nb_p = table_p.neighbors(term)
        nb_q = table_q.neighbors(term)
        k_eff = min(len(nb_p), len(nb_q))
        if k_eff == 0:
            raise ValueError(
                f"term {term!r}: empty neighbor pool under cf_nb={cf_nb}"
            )
        nb_p = nb_p[:k_eff]
        nb_q = nb_q[:k_eff]
        shared = len(set(nb_p) & set(nb_q))
        records.append(
            StabilityRecord(
                term=term,
                score=shared / k_eff,
                freq_p=space_p.vocab.freq(term),
                freq_q=space_q.vocab.freq(term),
                k_effective=k_eff,
                neighbors_p=tuple(nb_p),
                neighbors_q=tuple(nb_q),
            )
        )
    return StabilityTable(pair, records, k=k, cf_nb=cf_nb, cf_shift=cf_shift, metric=metric)


def stability(
    space_p: EmbeddingSpace,
    space_q: EmbeddingSpace,
    term: str,
    k: int = DEFAULT_K,
    cf_nb: int = DEFAULT_CF_NB,
    cf_shift: int = DEFAULT_CF_SHIFT,
    metric: str = "cosine",
) -> float:
    """Stability of one term; errors name the side that fails eligibility."""
    for side, space in (("first", space_p), ("second", space_q)):
        if term not in space.vocab:
            raise KeyError(f"term {term!r} missing from the {side} space")
        if space.vocab.freq(term) < cf_shift:
            raise ValueError(
                f"term {term!r} has frequency {space.vocab.freq(term)} < "
                f"cf_shift {cf_shift} in the {side} space"
            )
    nb_p, _ = _single_neighborhood(space_p, term, k, cf_nb, metric)
    nb_q, _ = _single_neighborhood(space_q, term, k, cf_nb, metric)
    k_eff = min(len(nb_p), len(nb_q))
    if k_eff == 0:
        raise ValueError(f"term {term!r}: empty neighbor pool under cf_nb={cf_nb}")
    return len(set(nb_p[:k_eff]) & set(nb_q[:k_eff])) / k_eff


def _single_neighborhood(space, term, k, cf_nb, metric):
    pool = _pool(space, cf_nb)
    table = nearest_neighbors(space, [term], k, pool_terms=pool, metric=metric)
    return table.neighbors(term), table.truncated(term)


def neighbor_diff(
    space_p: EmbeddingSpace,
    space_q: EmbeddingSpace,
    term: str,
    top_m: int = 15,
    cf_nb: int = DEFAULT_CF_NB,
    cf_shift: int = DEFAULT_CF_SHIFT,
    metric: str = "cosine",
) -> dict:
    """Contrast the top_m nearest terms of ``term`` across the two spaces.

    Returns the terms unique to each space and the shared ones, each list
    ordered by proximity in its own space.
    """
    for side, space in (("first", space_p), ("second", space_q)):
        if term not in space.vocab:
            raise KeyError(f"term {term!r} missing from the {side} space")
        if space.vocab.freq(term) < cf_shift:
            raise ValueError(
                f"term {term!r} has frequency {space.vocab.freq(term)} < "
                f"cf_shift {cf_shift} in the {side} space"
            )
    nb_p, _ = _single_neighborhood(space_p, term, top_m, cf_nb, metric)
    nb_q, _ = _single_neighborhood(space_q, term, top_m, cf_nb, metric)
    set_p, set_q = set(nb_p), set(nb_q)
    return {
        "term": term,
        "top_m": top_m,
        "p_only": [t for t in nb_p if t not in set_q],
        "q_only": [t for t in nb_q if t not in set_p],
        "shared": [t for t in nb_p if t in set_q],
    }


def diffs_to_json(diffs: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(list(diffs), handle, indent=2, sort_keys=True)
        handle.write("\n")
