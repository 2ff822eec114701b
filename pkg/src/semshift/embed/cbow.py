"""CBOW embedding training over per-user token streams."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from ..corpus.vocab import Vocabulary
from .space import EmbeddingSpace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CbowParams:
    """Training hyperparameters.

    ``subsample`` of 0 disables frequent-word downsampling; when enabled
    the conventional setting is 1e-3. ``workers`` above 1 switches to the
    racy parallel kernel, giving up bit-reproducibility.
    """

    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 20
    lr: float = 0.025
    lr_min: float = 0.0001
    subsample: float = 0.0
    seed: int = 1
    workers: int = 1

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.negatives < 0:
            raise ValueError(f"negatives must be >= 0, got {self.negatives}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 < self.lr_min <= self.lr:
            raise ValueError(f"need 0 < lr_min <= lr, got {self.lr_min}, {self.lr}")
        if self.subsample < 0:
            raise ValueError(f"subsample must be >= 0, got {self.subsample}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def with_seed(self, seed: int) -> "CbowParams":
        return replace(self, seed=seed)


def encode_streams(
    streams: Iterable[Sequence[str]], vocab: Vocabulary
) -> tuple[np.ndarray, np.ndarray]:
    """Map token streams to index arrays, dropping out-of-vocabulary tokens.

    Returns (tokens, offsets): document ``d`` spans
    ``tokens[offsets[d]:offsets[d + 1]]``. Empty documents are dropped.
    """
    chunks: list[np.ndarray] = []
    offsets = [0]
    total = 0
    for stream in streams:
        idx = [vocab.get(t) for t in stream]
        arr = np.array([i for i in idx if i >= 0], dtype=np.int32)
        if arr.size == 0:
            continue
        chunks.append(arr)
        total += arr.size
        offsets.append(total)
    if not chunks:
        return np.empty(0, dtype=np.int32), np.array([0], dtype=np.int64)
    return np.concatenate(chunks), np.array(offsets, dtype=np.int64)


def _negative_cdf(freqs: np.ndarray) -> np.ndarray:
    weights = freqs.astype(np.float64) ** 0.75
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return cdf


def _keep_probabilities(freqs: np.ndarray, subsample: float) -> np.ndarray:
    if subsample <= 0:
        return np.ones(freqs.shape[0], dtype=np.float64)
    rel = freqs.astype(np.float64) / freqs.sum()
    keep = np.sqrt(subsample / rel) + subsample / rel
    return np.minimum(keep, 1.0)


def train_embeddings(
    streams: Iterable[Sequence[str]],
    vocab: Vocabulary,
    params: CbowParams = CbowParams(),
) -> EmbeddingSpace:
    """Train a CBOW space for ``vocab`` on the given token streams.

    Each stream is one document; context windows never cross documents.
    With ``workers == 1`` the result is bit-reproducible for a seed.
    """
    from . import _kernels

    if len(vocab) == 0:
        raise ValueError("cannot train on an empty vocabulary")
    tokens, offsets = encode_streams(streams, vocab)
    if tokens.size == 0:
        raise ValueError("no in-vocabulary tokens in the corpus")

    unseen = len(vocab) - np.unique(tokens).size
    if unseen:
        logger.warning("%d vocabulary terms never occur; their vectors stay at init", unseen)

    rng = np.random.default_rng(params.seed)
    bound = 0.5 / params.dim
    vec_in = rng.uniform(-bound, bound, size=(len(vocab), params.dim)).astype(np.float32)
    vec_out = np.zeros((len(vocab), params.dim), dtype=np.float32)
    if params.epochs == 0:
        return EmbeddingSpace(
            vocab, vec_in, vec_out, config=params,
            train_losses=np.empty(0, dtype=np.float64),
        )
    neg_cdf = _negative_cdf(vocab.freqs)
    keep_prob = _keep_probabilities(vocab.freqs, params.subsample)
    losses = np.zeros(params.epochs, dtype=np.float64)
    centers = np.zeros(params.epochs, dtype=np.int64)

    started = time.perf_counter()
    if params.workers == 1:
        _kernels.train_serial(
            tokens, offsets, vec_in, vec_out, neg_cdf, keep_prob,
            params.window, params.negatives, params.epochs,
            params.lr, params.lr_min, params.seed, params.subsample > 0,
            losses, centers,
        )
    else:
        import numba

        workers = min(params.workers, numba.config.NUMBA_NUM_THREADS)
        if workers < params.workers:
            logger.warning(
                "requested %d workers but only %d threads available",
                params.workers, workers,
            )
        numba.set_num_threads(workers)
        _kernels.train_parallel(
            tokens, offsets, vec_in, vec_out, neg_cdf, keep_prob,
            params.window, params.negatives, params.epochs,
            params.lr, params.lr_min, params.seed, params.subsample > 0,
            losses, centers,
        )
    logger.info(
        "trained %d-dim space on %d tokens / %d docs in %.1fs",
        params.dim, tokens.size, offsets.size - 1, time.perf_counter() - started,
    )
    mean_losses = losses / np.maximum(centers, 1)
    return EmbeddingSpace(vocab, vec_in, vec_out, config=params, train_losses=mean_losses)
