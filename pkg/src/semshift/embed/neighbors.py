"""Exact nearest-neighbor queries over an embedding space.

Brute force with blocked matrix products; no approximation. Ordering is
fully deterministic: ascending distance, ties broken by lexicographic term
order. The query term itself is excluded from its own neighbor list.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .space import EmbeddingSpace

_BLOCK = 512

METRICS = ("cosine", "euclidean")


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v), in [0, 2]. Zero-norm inputs signal an untrained term."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine distance undefined for a zero-norm vector")
    return float(1.0 - (u @ v) / (nu * nv))


def neighborhood(
    space: EmbeddingSpace,
    term: str,
    k: int = 500,
    cf_nb: int = 50,
    min_freq: int = 50,
    metric: str = "cosine",
) -> tuple[list[str], bool]:
    """Ordered top-k neighbor terms of ``term`` and a small-pool flag.

    Candidates are vocabulary terms with frequency >= ``cf_nb``, excluding
    the query. If fewer than ``k`` candidates exist, the whole pool is
    returned with the flag set. The query itself must meet ``min_freq``.
    """
    vocab = space.vocab
    if term not in vocab:
        raise KeyError(f"term {term!r} not in vocabulary")
    if vocab.freq(term) < min_freq:
        raise ValueError(
            f"term {term!r} has frequency {vocab.freq(term)} < floor {min_freq}"
        )
    pool = [t for t in vocab.terms if vocab.freq(t) >= cf_nb and t != term]
    if not pool:
        raise ValueError(f"no candidates with frequency >= {cf_nb}")
    table = nearest_neighbors(space, [term], k, pool_terms=pool, metric=metric)
    return table.neighbors(term), table.truncated(term)


def _pool_matrix(space: EmbeddingSpace, pool_idx: np.ndarray, metric: str) -> np.ndarray:
    if metric == "cosine":
        return space.normalized()[pool_idx]
    return space.vectors.astype(np.float64)[pool_idx]


def _query_matrix(space: EmbeddingSpace, query_idx: np.ndarray, metric: str) -> np.ndarray:
    if metric == "cosine":
        return space.normalized()[query_idx]
    return space.vectors.astype(np.float64)[query_idx]


def _distances(queries: np.ndarray, pool: np.ndarray, metric: str) -> np.ndarray:
    if metric == "cosine":
        return 1.0 - queries @ pool.T
    sq_q = np.sum(queries**2, axis=1)[:, None]
    sq_p = np.sum(pool**2, axis=1)[None, :]
    d2 = sq_q + sq_p - 2.0 * (queries @ pool.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def _top_k_row(dist: np.ndarray, rank: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k smallest distances, ties resolved by ``rank``."""
    n = dist.shape[0]
    if k >= n:
        return np.lexsort((rank, dist))
    part = np.argpartition(dist, k - 1)[:k]
    boundary = dist[part].max()
    candidates = np.flatnonzero(dist <= boundary)
    order = np.lexsort((rank[candidates], dist[candidates]))
    return candidates[order[:k]]


@dataclass(frozen=True)
class NeighborTable:
    """Top-k neighbor lists for a set of query terms.

    ``neighbor_idx[i]`` holds vocabulary indices of the i-th query's
    neighbors, nearest first; rows may be shorter than ``k`` when the
    candidate pool is small (``truncated`` marks those queries).
    """

    query_terms: tuple[str, ...]
    neighbor_idx: tuple[np.ndarray, ...]
    distances: tuple[np.ndarray, ...]
    terms: tuple[str, ...]
    k: int
    metric: str

    def __post_init__(self) -> None:
        if len(self.neighbor_idx) != len(self.query_terms):
            raise ValueError("one neighbor row per query required")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")

    def row(self, term: str) -> np.ndarray:
        return self.neighbor_idx[self.query_terms.index(term)]

    def neighbors(self, term: str) -> list[str]:
        return [self.terms[i] for i in self.row(term)]

    def neighbor_set(self, term: str) -> set[str]:
        return {self.terms[i] for i in self.row(term)}

    def truncated(self, term: str) -> bool:
        return len(self.row(term)) < self.k


def nearest_neighbors(
    space: EmbeddingSpace,
    query_terms: Sequence[str],
    k: int,
    pool_terms: Sequence[str] | None = None,
    metric: str = "cosine",
) -> NeighborTable:
    """Exact top-k neighbors of each query among ``pool_terms``.

    The pool defaults to the whole vocabulary. Queries must be in the
    vocabulary; they need not be in the pool, but when they are they do
    not appear in their own lists.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    vocab = space.vocab
    if pool_terms is None:
        pool_idx = np.arange(len(vocab), dtype=np.int64)
    else:
        pool_idx = np.array(sorted(vocab.index(t) for t in set(pool_terms)), dtype=np.int64)
    if pool_idx.size == 0:
        raise ValueError("empty candidate pool")
    query_idx = np.array([vocab.index(t) for t in query_terms], dtype=np.int64)

    # lexicographic rank of each pool term, precomputed once
    pool_term_arr = np.array([vocab.terms[i] for i in pool_idx])
    rank = np.empty(pool_idx.size, dtype=np.int64)
    rank[np.argsort(pool_term_arr)] = np.arange(pool_idx.size)

    pool_pos = {int(v): p for p, v in enumerate(pool_idx)}
    pool_mat = _pool_matrix(space, pool_idx, metric)
    query_mat = _query_matrix(space, query_idx, metric)

    neighbor_idx: list[np.ndarray] = []
    distances: list[np.ndarray] = []
    for start in range(0, query_idx.size, _BLOCK):
        stop = min(start + _BLOCK, query_idx.size)
        block = _distances(query_mat[start:stop], pool_mat, metric)
        for r in range(stop - start):
            dist = block[r]
            self_pos = pool_pos.get(int(query_idx[start + r]), -1)
            if self_pos >= 0:
                dist = dist.copy()
                dist[self_pos] = np.inf
            top = _top_k_row(dist, rank, k)
            if self_pos >= 0 and top.size > pool_idx.size - 1:
                top = top[: pool_idx.size - 1]
            neighbor_idx.append(pool_idx[top].astype(np.int64))
            distances.append(dist[top])
    return NeighborTable(
        query_terms=tuple(query_terms),
        neighbor_idx=tuple(neighbor_idx),
        distances=tuple(distances),
        terms=vocab.terms,
        k=k,
        metric=metric,
    )
