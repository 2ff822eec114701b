"""Time slicing and per-user aggregation into document-term matrices."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .phrases import PhraseModel, apply_phrases
from .posts import PostStore
from .tokenize import tokenize
from .vocab import Vocabulary

Tokenizer = Callable[[str], list[str]]


@dataclass(frozen=True)
class Period:
    """Half-open time window [start, end) in UTC epoch seconds."""

    name: str
    start: float
    end: float

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("period name must be non-empty")
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError("period bounds must be finite")
        if not self.start < self.end:
            raise ValueError(f"period {self.name!r}: start must precede end")

    def contains(self, timestamp: float) -> bool:
        return self.start <= timestamp < self.end

    @classmethod
    def from_dates(cls, name: str, start: str, end: str) -> "Period":
        """Build from ISO dates; naive inputs are taken as UTC."""
        return cls(name, _parse_date(start), _parse_date(end))


def _parse_date(value: str) -> float:
    parsed = datetime.fromisoformat(value)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.timestamp()


def check_disjoint(periods: Sequence[Period]) -> None:
    names = [p.name for p in periods]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate period names: {names}")
    ordered = sorted(periods, key=lambda p: p.start)
    for left, right in zip(ordered, ordered[1:]):
        if right.start < left.end:
            raise ValueError(f"periods {left.name!r} and {right.name!r} overlap")


class TimeSlicedCorpus:
    """Per-period, per-user token streams with post counts."""

    def __init__(
        self,
        periods: Sequence[Period],
        streams: Mapping[str, Mapping[str, tuple[str, ...]]],
        post_counts: Mapping[str, Mapping[str, int]],
    ):
        check_disjoint(periods)
        if set(streams) != {p.name for p in periods} or set(post_counts) != set(streams):
            raise ValueError("streams and post_counts must cover exactly the periods")
        self.periods = tuple(periods)
        self._streams = {
            name: dict(sorted(users.items())) for name, users in streams.items()
        }
        self._post_counts = {name: dict(counts) for name, counts in post_counts.items()}

    def period(self, name: str) -> Period:
        for p in self.periods:
            if p.name == name:
                return p
        raise KeyError(name)

    def users(self, period: str) -> tuple[str, ...]:
        return tuple(self._streams[period])

    def stream(self, period: str, user_id: str) -> tuple[str, ...]:
        return self._streams[period][user_id]

    def post_count(self, period: str, user_id: str) -> int:
        return self._post_counts[period].get(user_id, 0)

    def streams(self, period: str) -> Iterable[tuple[str, ...]]:
        """All user streams of a period, in sorted user order."""
        return self._streams[period].values()

    def term_counts(self, period: str) -> Counter[str]:
        counts: Counter[str] = Counter()
        for stream in self._streams[period].values():
            counts.update(stream)
        return counts

    def token_total(self, period: str) -> int:
        return sum(len(s) for s in self._streams[period].values())


def _resolve_phraser(
    phrasers: PhraseModel | Mapping[str, PhraseModel] | None, period: str
) -> PhraseModel | None:
    if phrasers is None or isinstance(phrasers, PhraseModel):
        return phrasers
    return phrasers.get(period)


def slice_corpus(
    store: PostStore,
    periods: Sequence[Period],
    tokenizer: Tokenizer = tokenize,
    phrasers: PhraseModel | Mapping[str, PhraseModel] | None = None,
) -> TimeSlicedCorpus:
    """Assign posts to periods and concatenate each user's tokens in time order.

    ``phrasers`` may be a single model applied everywhere or a per-period
    mapping; periods absent from the mapping stay unphrased.
    """
    check_disjoint(periods)
    streams: dict[str, dict[str, tuple[str, ...]]] = {p.name: {} for p in periods}
    post_counts: dict[str, dict[str, int]] = {p.name: {} for p in periods}
    for user in store.users():
        posts = store.posts(user)
        for period in periods:
            phraser = _resolve_phraser(phrasers, period.name)
            tokens: list[str] = []
            n_posts = 0
            for post in posts:
                if not period.contains(post.timestamp):
                    continue
                post_tokens = tokenizer(post.text)
                if phraser is not None:
                    post_tokens = apply_phrases(post_tokens, phraser)
                tokens.extend(post_tokens)
                n_posts += 1
            if n_posts:
                streams[period.name][user] = tuple(tokens)
                post_counts[period.name][user] = n_posts
    return TimeSlicedCorpus(periods, streams, post_counts)


def learn_period_phrasers(
    store: PostStore,
    periods: Sequence[Period],
    tokenizer: Tokenizer = tokenize,
    min_count: int = 5,
    threshold: float = 10.0,
    passes: int = 2,
) -> dict[str, PhraseModel]:
    """Learn one collocation model per period from that period's posts."""
    from .phrases import learn_phrases

    check_disjoint(periods)
    models: dict[str, PhraseModel] = {}
    for period in periods:
        docs = [
            tokenizer(post.text)
            for post in store.all_posts()
            if period.contains(post.timestamp)
        ]
        models[period.name] = learn_phrases(
            docs, min_count=min_count, threshold=threshold, passes=passes
        )
    return models


def build_vocabulary(
    sliced: TimeSlicedCorpus,
    periods: Sequence[str] | None = None,
    min_count: int = 1,
    max_size: int | None = None,
) -> Vocabulary:
    """Vocabulary over the summed term counts of the given periods (default all)."""
    names = [p.name for p in sliced.periods] if periods is None else list(periods)
    counts: Counter[str] = Counter()
    for name in names:
        counts.update(sliced.term_counts(name))
    return Vocabulary.from_counts(counts, min_count=min_count, max_size=max_size)


class DocumentTermMatrix:
    """Users x terms count matrix with aligned optional labels."""

    def __init__(
        self,
        users: Sequence[str],
        vocab: Vocabulary,
        counts: sp.spmatrix,
        labels: Sequence[int] | None = None,
    ):
        self.users = tuple(users)
        if len(set(self.users)) != len(self.users):
            raise ValueError("duplicate users")
        self.vocab = vocab
        self.counts = sp.csr_matrix(counts, dtype=np.int64)
        if self.counts.shape != (len(self.users), len(vocab)):
            raise ValueError(
                f"counts shape {self.counts.shape} != "
                f"({len(self.users)}, {len(vocab)})"
            )
        if self.counts.nnz and self.counts.data.min() < 0:
            raise ValueError("counts must be non-negative")
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        if self.labels is not None and len(self.labels) != len(self.users):
            raise ValueError(f"{len(self.labels)} labels for {len(self.users)} users")

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def subset_columns(self, terms: Sequence[str]) -> "DocumentTermMatrix":
        """Restrict to ``terms`` (each must be in the vocabulary)."""
        sub = self.vocab.subset(terms)
        cols = [self.vocab.index(t) for t in sub.terms]
        return DocumentTermMatrix(self.users, sub, self.counts[:, cols], self.labels)

    def subset_rows(self, indices: Sequence[int]) -> "DocumentTermMatrix":
        idx = list(indices)
        labels = None if self.labels is None else self.labels[idx]
        return DocumentTermMatrix(
            [self.users[i] for i in idx], self.vocab, self.counts[idx], labels
        )

    def save_triplets(self, path: str | Path) -> None:
        """Write the documented sparse text format.

        Line 1: ``semshift-dtm 1 <rows> <cols> <nnz>``. Then one line per
        row: ``<user_id>\\t<label or ->``. Then ``<nnz>`` lines
        ``row,col,count`` in row-major order. Column order matches the
        vocabulary CSV saved alongside.
        """
        coo = self.counts.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(f"semshift-dtm 1 {len(self.users)} {len(self.vocab)} {coo.nnz}\n")
            for i, user in enumerate(self.users):
                label = "-" if self.labels is None else str(int(self.labels[i]))
                handle.write(f"{user}\t{label}\n")
            for k in order:
                handle.write(f"{coo.row[k]},{coo.col[k]},{coo.data[k]}\n")

    @classmethod
    def load_triplets(cls, path: str | Path, vocab: Vocabulary) -> "DocumentTermMatrix":
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().split()
            if len(header) != 5 or header[:2] != ["semshift-dtm", "1"]:
                raise ValueError(f"{path}: bad header {header}")
            n_rows, n_cols, nnz = (int(x) for x in header[2:])
            if n_cols != len(vocab):
                raise ValueError(f"{path}: {n_cols} columns but vocabulary has {len(vocab)}")
            users, labels = [], []
            for _ in range(n_rows):
                user, _, label = handle.readline().rstrip("\n").partition("\t")
                users.append(user)
                labels.append(None if label == "-" else int(label))
            rows, cols, data = [], [], []
            for _ in range(nnz):
                r, c, v = handle.readline().split(",")
                rows.append(int(r))
                cols.append(int(c))
                data.append(int(v))
        has_labels = any(l is not None for l in labels)
        if has_labels and any(l is None for l in labels):
            raise ValueError(f"{path}: mixed labelled and unlabelled rows")
        matrix = sp.coo_matrix(
            (data, (rows, cols)), shape=(n_rows, n_cols), dtype=np.int64
        )
        return cls(users, vocab, matrix, labels if has_labels else None)


def aggregate_users(
    sliced: TimeSlicedCorpus,
    period: str,
    vocab: Vocabulary,
    min_posts: int = 1,
    labels: Mapping[str, int] | None = None,
) -> DocumentTermMatrix:
    """Per-user term counts for one period, keeping users with enough posts.

    When ``labels`` is given, only labelled users are kept and the matrix
    carries their labels.
    """
    users = [
        u
        for u in sliced.users(period)
        if sliced.post_count(period, u) >= min_posts
        and (labels is None or u in labels)
    ]
    rows: list[int] = []
    cols: list[int] = []
    data: list[int] = []
    for i, user in enumerate(users):
        seen: Counter[int] = Counter()
        for token in sliced.stream(period, user):
            j = vocab.get(token)
            if j >= 0:
                seen[j] += 1
        for j in sorted(seen):
            rows.append(i)
            cols.append(j)
            data.append(seen[j])
    matrix = sp.coo_matrix(
        (data, (rows, cols)), shape=(len(users), len(vocab)), dtype=np.int64
    )
    row_labels = None if labels is None else [labels[u] for u in users]
    return DocumentTermMatrix(users, vocab, matrix, row_labels)
