"""TF-IDF weighting and L2-regularized logistic regression.

The classifier minimizes

    f(w, b) = 0.5 * ||w||^2 + C * sum_i log(1 + exp(-y_i (w.x_i + b)))

with y in {-1, +1} and an unregularized bias, via the L-BFGS routine in
:mod:`semshift.optim`. Regularization strength C is picked by stratified
cross-validated F1.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .corpus.slicing import DocumentTermMatrix
from .optim import minimize_lbfgs

logger = logging.getLogger(__name__)

C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_FOLDS = 10

_MODEL_MAGIC = b"SMDL"
_MODEL_VERSION = 1


class TfidfTransform:
    """Smoothed idf weights plus L2 row normalization."""

    def __init__(self, terms: Sequence[str], idf: np.ndarray):
        self.terms = tuple(terms)
        self.idf = np.asarray(idf, dtype=np.float64)
        if self.idf.shape != (len(self.terms),):
            raise ValueError(f"idf shape {self.idf.shape} != {len(self.terms)} terms")
        if np.any(self.idf <= 0):
            raise ValueError("idf components must be positive")

    @classmethod
    def fit(cls, counts: sp.spmatrix, terms: Sequence[str]) -> "TfidfTransform":
        """idf(t) = ln((1+N)/(1+df(t))) + 1 over the training rows."""
        counts = sp.csr_matrix(counts)
        if counts.shape[0] < 1:
            raise ValueError("need at least one training row")
        df = np.asarray((counts > 0).sum(axis=0)).ravel()
        n = counts.shape[0]
        idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
        return cls(terms, idf)

    def transform(self, counts: sp.spmatrix) -> sp.csr_matrix:
        """Scale counts by idf, then normalize each nonzero row to unit length."""
        counts = sp.csr_matrix(counts, dtype=np.float64)
        if counts.shape[1] != len(self.terms):
            raise ValueError(
                f"matrix has {counts.shape[1]} columns, transform expects {len(self.terms)}"
            )
        x = counts.multiply(self.idf[None, :]).tocsr()
        norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
        zero_rows = int(np.sum(norms == 0))
        if zero_rows:
            logger.warning("%d all-zero rows pass through the transform unscaled", zero_rows)
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        return sp.diags(scale) @ x


def logistic_objective(
    theta: np.ndarray, x: sp.spmatrix | np.ndarray, y: np.ndarray, c: float
) -> tuple[float, np.ndarray]:
    """Value and gradient of f(w, b) at theta = [w, b]; y must be in {-1, +1}."""
    w = theta[:-1]
    b = theta[-1]
    z = np.asarray(x @ w).ravel() + b
    yz = y * z
    loss = 0.5 * float(w @ w) + c * float(np.sum(np.logaddexp(0.0, -yz)))
    s = expit(-yz)  # d/d(yz) log(1+exp(-yz)) = -sigma(-yz)
    coeff = -c * y * s
    grad_w = w + np.asarray(x.T @ coeff).ravel()
    grad_b = float(np.sum(coeff))
    return loss, np.concatenate([grad_w, [grad_b]])


def train_logreg(
    x: sp.spmatrix | np.ndarray,
    y: np.ndarray,
    c: float = 1.0,
    gtol: float = 1e-6,
    max_iter: int = 1000,
    theta0: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Fit weights and bias; labels may be {0,1} or {-1,+1}."""
    y = _to_pm1(y)
    if np.unique(y).size < 2:
        raise ValueError("training labels contain a single class")
    n_features = x.shape[1]
    if theta0 is None:
        theta0 = np.zeros(n_features + 1)
    result = minimize_lbfgs(
        lambda t: logistic_objective(t, x, y, c),
        theta0,
        memory=10,
        gtol=gtol,
        max_iter=max_iter,
    )
    return result.x[:-1], float(result.x[-1])


def _to_pm1(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    values = set(np.unique(y).tolist())
    if values <= {0, 1}:
        return np.where(y > 0, 1.0, -1.0)
    if values <= {-1, 1}:
        return y.astype(np.float64)
    raise ValueError(f"labels must be binary, got values {sorted(values)}")


def predict_proba(w: np.ndarray, b: float, x: sp.spmatrix | np.ndarray) -> np.ndarray:
    return expit(np.asarray(x @ w).ravel() + b)


def f1_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """F1 of the positive class; degenerate zero-denominator cases give 0."""
    y_true = np.asarray(y_true) > 0
    y_pred = np.asarray(y_pred) > 0
    tp = int(np.sum(y_true & y_pred))
    fp = int(np.sum(~y_true & y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    if 2 * tp + fp + fn == 0:
        logger.warning("degenerate F1: no true or predicted positives; scoring 0")
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def stratified_folds(
    y: np.ndarray, folds: int, seed: int = 0
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic stratified k-fold assignment; may shrink fold count.

    When the rarer class has fewer members than ``folds``, the fold count
    drops to that size with a warning so every fold sees both classes.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    classes = np.unique(y)
    min_class = min(int(np.sum(y == c)) for c in classes)
    if min_class < 2:
        raise ValueError("need at least two samples in every class")
    if min_class < folds:
        logger.warning("reducing folds from %d to %d (smallest class)", folds, min_class)
        folds = min_class
    assignment = np.empty(len(y), dtype=np.int64)
    for c in classes:
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        assignment[idx] = np.arange(len(idx)) % folds
    return [
        (np.flatnonzero(assignment != f), np.flatnonzero(assignment == f))
        for f in range(folds)
    ]


def select_c_cv(
    x: sp.spmatrix | np.ndarray,
    y: np.ndarray,
    grid: Sequence[float] = C_GRID,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
) -> tuple[float, dict[float, float]]:
    """Mean held-out F1 per grid point; best C, ties to the smaller value."""
    if not grid:
        raise ValueError("empty C grid")
    y = np.asarray(y)
    splits = stratified_folds(y, folds, seed)
    table: dict[float, float] = {}
    for c in sorted(grid):
        scores = []
        for train_idx, test_idx in splits:
            w, b = train_logreg(x[train_idx], y[train_idx], c)
            preds = predict_proba(w, b, x[test_idx]) > 0.5
            scores.append(f1_score(y[test_idx] > 0, preds))
        table[c] = float(np.mean(scores))
    best = max(sorted(table), key=lambda c: table[c])
    # max() keeps the first maximum, i.e. the smallest C on ties
    return best, table


@dataclass
class ClassifierModel:
    """A trained vocabulary-restricted classifier with its preprocessing."""

    terms: tuple[str, ...]
    tfidf: TfidfTransform
    w: np.ndarray
    b: float
    c: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.w) != len(self.terms):
            raise ValueError(f"{len(self.w)} weights for {len(self.terms)} terms")
        if self.c <= 0:
            raise ValueError(f"C must be positive, got {self.c}")

    def _align(self, dtm: DocumentTermMatrix) -> sp.csr_matrix:
        cols = [dtm.vocab.get(t) for t in self.terms]
        missing = [t for t, j in zip(self.terms, cols) if j < 0]
        if missing:
            raise ValueError(f"matrix lacks model terms, e.g. {missing[:5]}")
        return sp.csr_matrix(dtm.counts[:, cols])

    def predict_proba(self, data: DocumentTermMatrix | sp.spmatrix | np.ndarray) -> np.ndarray:
        if isinstance(data, DocumentTermMatrix):
            counts = self._align(data)
        else:
            counts = data
        x = self.tfidf.transform(counts)
        return predict_proba(self.w, self.b, x)

    def predict(self, data) -> np.ndarray:
        return (self.predict_proba(data) > 0.5).astype(np.int64)

    def save(self, path: str | Path) -> None:
        header = json.dumps(
            {
                "terms": list(self.terms),
                "C": self.c,
                "metadata": self.metadata,
                "n_features": len(self.terms),
            },
            sort_keys=True,
        ).encode("utf-8")
        with open(path, "wb") as handle:
            handle.write(_MODEL_MAGIC)
            handle.write(struct.pack("<II", _MODEL_VERSION, len(header)))
            handle.write(header)
            block = np.concatenate([self.tfidf.idf, self.w, [self.b]])
            handle.write(block.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierModel":
        with open(path, "rb") as handle:
            magic = handle.read(4)
            if magic != _MODEL_MAGIC:
                raise ValueError(f"{path}: not a model file")
            version, header_len = struct.unpack("<II", handle.read(8))
            if version != _MODEL_VERSION:
                raise ValueError(f"{path}: unsupported version {version}")
            header = json.loads(handle.read(header_len).decode("utf-8"))
            m = header["n_features"]
            block = np.frombuffer(handle.read((2 * m + 1) * 8), dtype="<f8")
            if block.size != 2 * m + 1:
                raise ValueError(f"{path}: truncated weight block")
        terms = tuple(header["terms"])
        return cls(
            terms=terms,
            tfidf=TfidfTransform(terms, block[:m].copy()),
            w=block[m : 2 * m].copy(),
            b=float(block[2 * m]),
            c=float(header["C"]),
            metadata=header.get("metadata", {}),
        )


def train_classifier(
    dtm: DocumentTermMatrix,
    terms: Sequence[str],
    c: float | None = None,
    grid: Sequence[float] = C_GRID,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    metadata: Mapping | None = None,
) -> ClassifierModel:
    """Fit a classifier on the labeled matrix restricted to ``terms``.

    With ``c`` unset, the strength is cross-validated on the training rows
    first; the final model retrains on all rows at the winning C.
    """
    if dtm.labels is None:
        raise ValueError("training requires a labeled matrix")
    sub = dtm.subset_columns(list(terms))
    tfidf = TfidfTransform.fit(sub.counts, sub.vocab.terms)
    x = tfidf.transform(sub.counts)
    y = dtm.labels
    cv_table: dict[float, float] = {}
    if c is None:
        c, cv_table = select_c_cv(x, y, grid=grid, folds=folds, seed=seed)
    w, b = train_logreg(x, y, c)
    meta = dict(metadata or {})
    meta.update(
        {
            "folds": folds,
            "cv_f1": {str(k): v for k, v in cv_table.items()},
            "train_rows": int(x.shape[0]),
            "seed": seed,
        }
    )
    return ClassifierModel(
        terms=sub.vocab.terms, tfidf=tfidf, w=w, b=b, c=float(c), metadata=meta
    )
