"""Term vocabulary: ordered term <-> index bijection with corpus frequencies."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class Vocabulary:
    """Immutable ordered term list with per-term corpus frequencies.

    Terms are ordered by (frequency descending, term ascending), which also
    fixes which terms survive a ``max_size`` truncation.
    """

    def __init__(self, terms: Sequence[str], freqs: Sequence[int]):
        if len(terms) != len(freqs):
            raise ValueError(f"{len(terms)} terms but {len(freqs)} frequencies")
        self.terms: tuple[str, ...] = tuple(terms)
        self.freqs: np.ndarray = np.asarray(freqs, dtype=np.int64)
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("duplicate terms in vocabulary")
        if np.any(self.freqs < 1):
            raise ValueError("frequencies must be >= 1")
        self._index = {term: i for i, term in enumerate(self.terms)}

    @classmethod
    def from_counts(
        cls,
        counts: Mapping[str, int],
        min_count: int = 1,
        max_size: int | None = None,
    ) -> "Vocabulary":
        items = [(t, c) for t, c in counts.items() if c >= min_count]
        items.sort(key=lambda tc: (-tc[1], tc[0]))
        if max_size is not None:
            items = items[:max_size]
        return cls([t for t, _ in items], [c for _, c in items])

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self._index

    def __iter__(self) -> Iterable[str]:
        return iter(self.terms)

    def index(self, term: str) -> int:
        return self._index[term]

    def get(self, term: str, default: int = -1) -> int:
        return self._index.get(term, default)

    def freq(self, term: str) -> int:
        return int(self.freqs[self._index[term]])

    def subset(self, terms: Iterable[str]) -> "Vocabulary":
        """Restriction to ``terms`` (all must be present), keeping this order."""
        keep = sorted({t for t in terms}, key=self.index)
        return Vocabulary(keep, [self.freq(t) for t in keep])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["term", "frequency"])
            for term, freq in zip(self.terms, self.freqs):
                writer.writerow([term, int(freq)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != ["term", "frequency"]:
                raise ValueError(f"{path}: expected header term,frequency, got {header}")
            terms, freqs = [], []
            for row in reader:
                if len(row) != 2:
                    raise ValueError(f"{path}: malformed row {row}")
                terms.append(row[0])
                freqs.append(int(row[1]))
        return cls(terms, freqs)
