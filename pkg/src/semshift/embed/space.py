"""Embedding space container and its binary / text serialization.

Binary layout (little-endian): 13-byte magic ``SEMSHIFT-EMB\\x00``, u32
version, u32 vocab size, u32 dimension, then per term a u16 UTF-8 byte
length + bytes + u64 frequency, then the float32 vector block row-major in
vocabulary order.

Text layout: first line ``<vocab size> <dim>``, then one ``term v1 .. vd``
line per term. Frequencies travel in a companion vocabulary CSV.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..corpus.vocab import Vocabulary

MAGIC = b"SEMSHIFT-EMB\x00"
VERSION = 1


class EmbeddingSpace:
    """Per-term dense vectors aligned with a vocabulary."""

    def __init__(
        self,
        vocab: Vocabulary,
        vectors: np.ndarray,
        out_vectors: np.ndarray | None = None,
        config=None,
        train_losses: np.ndarray | None = None,
    ):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[0] != len(vocab):
            raise ValueError(
                f"vectors shape {vectors.shape} does not match vocabulary size {len(vocab)}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vectors must be finite")
        self.vocab = vocab
        self.vectors = vectors
        self.out_vectors = out_vectors
        self.config = config
        self.train_losses = train_losses
        self._normalized: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, term: str) -> bool:
        return term in self.vocab

    def vector(self, term: str) -> np.ndarray:
        return self.vectors[self.vocab.index(term)]

    def normalized(self) -> np.ndarray:
        """Unit-norm float64 copy of the vectors; zero rows stay zero."""
        if self._normalized is None:
            dense = self.vectors.astype(np.float64)
            norms = np.linalg.norm(dense, axis=1, keepdims=True)
            norms[norms == 0.0] = 1.0
            self._normalized = dense / norms
        return self._normalized


def save_binary(space: EmbeddingSpace, path: str | Path) -> None:
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<III", VERSION, len(space), space.dim))
        for term, freq in zip(space.vocab.terms, space.vocab.freqs):
            raw = term.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"term too long to serialize: {term[:50]}...")
            handle.write(struct.pack("<H", len(raw)))
            handle.write(raw)
            handle.write(struct.pack("<Q", int(freq)))
        handle.write(np.ascontiguousarray(space.vectors, dtype="<f4").tobytes())


def load_binary(path: str | Path) -> EmbeddingSpace:
    with open(path, "rb") as handle:
        magic = handle.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not an embedding file (magic {magic!r})")
        version, size, dim = struct.unpack("<III", handle.read(12))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        terms, freqs = [], []
        for _ in range(size):
            (length,) = struct.unpack("<H", handle.read(2))
            terms.append(handle.read(length).decode("utf-8"))
            (freq,) = struct.unpack("<Q", handle.read(8))
            freqs.append(freq)
        block = handle.read(size * dim * 4)
        if len(block) != size * dim * 4:
            raise ValueError(f"{path}: truncated vector block")
        vectors = np.frombuffer(block, dtype="<f4").reshape(size, dim)
    return EmbeddingSpace(Vocabulary(terms, freqs), vectors.copy())


def save_text(space: EmbeddingSpace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(space)} {space.dim}\n")
        for i, term in enumerate(space.vocab.terms):
            values = " ".join(f"{x:.7g}" for x in space.vectors[i])
            handle.write(f"{term} {values}\n")


def load_text(path: str | Path, vocab_csv: str | Path | None = None) -> EmbeddingSpace:
    """Read the text format; ``vocab_csv`` restores true frequencies.

    Without the companion CSV every frequency defaults to 1.
    """
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad header {header}")
        size, dim = int(header[0]), int(header[1])
        terms: list[str] = []
        vectors = np.empty((size, dim), dtype=np.float32)
        for i in range(size):
            parts = handle.readline().rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"{path}: row {i} has {len(parts) - 1} values, wanted {dim}")
            terms.append(parts[0])
            vectors[i] = [float(x) for x in parts[1:]]
    if vocab_csv is not None:
        vocab = Vocabulary.from_csv(vocab_csv)
        if vocab.terms != tuple(terms):
            raise ValueError(f"{vocab_csv}: terms do not match {path}")
    else:
        vocab = Vocabulary(terms, [1] * len(terms))
    return EmbeddingSpace(vocab, vectors)
