"""Post records, ingestion from line-delimited JSON, and post-level filters."""
from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .tokenize import tokenize
from .phrases import PhraseModel, apply_phrases

logger = logging.getLogger(__name__)

# Canonical record fields; a schema maps each to the field name in the file.
DEFAULT_SCHEMA = {
    "user_id": "user_id",
    "timestamp": "timestamp",
    "text": "text",
    "label": "label",
}

_MAX_LINE_WARNINGS = 5


@dataclass(frozen=True)
class Post:
    """One authored message: author, UTC epoch timestamp, raw text."""

    user_id: str
    timestamp: float
    text: str
    label: int | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        if not math.isfinite(self.timestamp):
            raise ValueError(f"timestamp must be finite, got {self.timestamp}")
        if not self.text.strip():
            raise ValueError("text must be non-empty")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


class PostStore:
    """Immutable collection of posts, grouped by user and time-sorted."""

    def __init__(self, posts: Iterable[Post], skipped: int = 0):
        grouped: dict[str, list[Post]] = defaultdict(list)
        for post in posts:
            grouped[post.user_id].append(post)
        self._by_user: dict[str, tuple[Post, ...]] = {
            user: tuple(sorted(grouped[user], key=lambda p: p.timestamp))
            for user in sorted(grouped)
        }
        self._total = sum(len(v) for v in self._by_user.values())
        self.skipped = skipped

    def __len__(self) -> int:
        return self._total

    def users(self) -> tuple[str, ...]:
        return tuple(self._by_user)

    def posts(self, user_id: str) -> tuple[Post, ...]:
        return self._by_user[user_id]

    def all_posts(self) -> Iterable[Post]:
        for user in self._by_user:
            yield from self._by_user[user]

    def user_labels(self) -> dict[str, int]:
        """Per-user label; posts of one user must not disagree."""
        labels: dict[str, int] = {}
        for user, posts in self._by_user.items():
            seen = {p.label for p in posts if p.label is not None}
            if len(seen) > 1:
                raise ValueError(f"user {user!r} has conflicting labels {sorted(seen)}")
            if seen:
                labels[user] = seen.pop()
        return labels


def _coerce_timestamp(value: object) -> float:
    if isinstance(value, bool):
        raise ValueError(f"bad timestamp: {value!r}")
    if isinstance(value, (int, float)):
        ts = float(value)
    elif isinstance(value, str):
        try:
            ts = float(value)
        except ValueError:
            parsed = datetime.fromisoformat(value)
            if parsed.tzinfo is None:
                parsed = parsed.replace(tzinfo=timezone.utc)
            ts = parsed.timestamp()
    else:
        raise ValueError(f"bad timestamp: {value!r}")
    if not math.isfinite(ts):
        raise ValueError(f"bad timestamp: {value!r}")
    return ts


def _coerce_label(value: object) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, float)) and value in (0, 1):
        return int(value)
    if isinstance(value, str) and value in ("0", "1"):
        return int(value)
    raise ValueError(f"bad label: {value!r}")


def ingest_posts(path: str | Path, schema: Mapping[str, str] | None = None) -> PostStore:
    """Read line-delimited JSON posts from ``path``.

    ``schema`` maps canonical field names (``user_id``, ``timestamp``,
    ``text``, ``label``) to the file's field names; omitted entries fall
    back to :data:`DEFAULT_SCHEMA`. Malformed lines are skipped with a
    warning (capped, then summarised). An unreadable file raises.
    """
    fields = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(DEFAULT_SCHEMA)
        if unknown:
            raise ValueError(f"unknown schema keys: {sorted(unknown)}")
        fields.update(schema)

    posts: list[Post] = []
    skipped = 0
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("record is not an object")
                text = record[fields["text"]]
                if not isinstance(text, str):
                    raise ValueError("text is not a string")
                post = Post(
                    user_id=str(record[fields["user_id"]]),
                    timestamp=_coerce_timestamp(record[fields["timestamp"]]),
                    text=text,
                    label=_coerce_label(record.get(fields["label"])),
                )
            except (ValueError, KeyError, json.JSONDecodeError) as exc:
                skipped += 1
                if skipped <= _MAX_LINE_WARNINGS:
                    logger.warning("%s:%d skipped: %s", path, lineno, exc)
                else:
                    logger.debug("%s:%d skipped: %s", path, lineno, exc)
                continue
            posts.append(post)
    if skipped > _MAX_LINE_WARNINGS:
        logger.warning("%s: skipped %d malformed lines in total", path, skipped)
    return PostStore(posts, skipped=skipped)


class PostFilter(Protocol):
    """Predicate over posts; matching posts are removed."""

    name: str

    def matches(self, post: Post) -> bool: ...


@dataclass(frozen=True)
class TermBlocklist:
    """Drop posts whose token stream contains any blocked term."""

    terms: frozenset[str]
    phrases: PhraseModel | None = None
    name: str = "term_blocklist"

    def matches(self, post: Post) -> bool:
        tokens = tokenize(post.text)
        if self.phrases is not None:
            tokens = apply_phrases(tokens, self.phrases)
        return any(tok in self.terms for tok in tokens)


@dataclass(frozen=True)
class MetaBlocklist:
    """Drop posts whose metadata field takes a blocked value."""

    meta_field: str
    values: frozenset[str]
    name: str = "meta_blocklist"

    def matches(self, post: Post) -> bool:
        return post.meta.get(self.meta_field) in self.values


@dataclass(frozen=True)
class PredicateFilter:
    """Drop posts matching an arbitrary predicate."""

    predicate: Callable[[Post], bool]
    name: str = "predicate"

    def matches(self, post: Post) -> bool:
        return self.predicate(post)


def filter_posts(
    store: PostStore, filters: Sequence[PostFilter]
) -> tuple[PostStore, dict[str, int]]:
    """Apply ``filters`` in order; return the surviving store and drop counts."""
    dropped = {f.name: 0 for f in filters}
    kept: list[Post] = []
    for post in store.all_posts():
        for f in filters:
            if f.matches(post):
                dropped[f.name] += 1
                break
        else:
            kept.append(post)
    return PostStore(kept, skipped=store.skipped), dropped
