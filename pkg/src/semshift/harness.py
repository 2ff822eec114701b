"""Experiment protocols: temporal generalization and practical effects.

Two orchestrations over a labeled (and, for the practical protocol, an
additional unlabeled) post store:

``run_generalization``
    Stage 1 splits users 80/20, trains source-span and test-window
    embeddings on the 80% side, and freezes term counts. Stage 2 draws
    class-balanced user resamples with equal counts per training window,
    trains one classifier per (method, percentile), and scores it on
    balanced future-window users from the held-out 20%.

``run_practical``
    Trains several embedding models on 80% user subsets of the labeled
    corpus plus three on post samples of the unlabeled corpus (full
    span, pre, during), then for every (method, percentile) reports
    within-span F1 next to the prevalence change the same model reads
    off the unlabeled periods.

Both are pure functions of (data, plan, seed): rerunning a plan yields
identical record tables.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .corpus.posts import PostStore
from .corpus.slicing import (
    DocumentTermMatrix,
    Period,
    aggregate_users,
    check_disjoint,
    slice_corpus,
)
from .corpus.vocab import Vocabulary
from .embed.cbow import CbowParams, train_embeddings
from .model import (
    C_GRID,
    DEFAULT_FOLDS,
    ClassifierModel,
    f1_score,
    train_classifier,
)
from .monitor import estimate_prevalence, flag_divergence, prevalence_change
from .select import (
    METHODS,
    PERCENTILES,
    score_chi2,
    score_coefficient,
    score_cumulative,
    score_frequency,
    score_intersection,
    score_overlap,
    score_random,
    score_weighted,
    select_cumulative,
    select_intersection,
    sweep,
)
from .shift import DEFAULT_CF_NB, DEFAULT_CF_SHIFT, DEFAULT_K, stability_table

logger = logging.getLogger(__name__)

DESK_OUTER = 10
DESK_INNER = 3
FULL_OUTER = 100
FULL_INNER = 10


@dataclass(frozen=True)
class ExperimentPlan:
    """Shared experiment parameters; windows apply to generalization runs.

    Defaults are desk-scale (10 outer x 3 inner repeats); ``full_scale``
    raises them to the full 100 x 10 protocol.
    """

    dataset: str
    train_windows: tuple[Period, ...] = ()
    test_windows: tuple[Period, ...] = ()
    outer_repeats: int = DESK_OUTER
    inner_repeats: int = DESK_INNER
    min_posts: int = 200
    seed: int = 0
    embed: CbowParams = field(default_factory=CbowParams)
    k: int = DEFAULT_K
    cf_nb: int = DEFAULT_CF_NB
    cf_shift: int = DEFAULT_CF_SHIFT
    frequency_floor: int = 50
    vocab_min_count: int = 5
    folds: int = DEFAULT_FOLDS
    c_grid: tuple[float, ...] = C_GRID
    methods: tuple[str, ...] = METHODS
    percentiles: tuple[int, ...] = PERCENTILES
    train_fraction: float = 0.8
    post_sample_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.outer_repeats < 1 or self.inner_repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.min_posts < 1:
            raise ValueError("min_posts must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not 0 < self.post_sample_fraction <= 1:
            raise ValueError("post_sample_fraction must lie in (0, 1]")
        if self.vocab_min_count > self.frequency_floor + 1:
            raise ValueError(
                "vocab_min_count above the frequency floor would drop base terms"
            )
        if self.frequency_floor < self.cf_shift - 1:
            raise ValueError(
                "frequency_floor below cf_shift - 1 leaves overlap scores "
                "undefined for low-frequency base terms"
            )
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown selection methods: {unknown}")
        windows = [*self.train_windows, *self.test_windows]
        if windows:
            check_disjoint(windows)
        if self.train_windows and self.test_windows:
            train_end = max(w.end for w in self.train_windows)
            for w in self.test_windows:
                if w.start < train_end:
                    raise ValueError(
                        f"test window {w.name!r} must start after training ends"
                    )

    def at_full_scale(self) -> "ExperimentPlan":
        return replace(self, outer_repeats=FULL_OUTER, inner_repeats=FULL_INNER)


@dataclass(frozen=True)
class RunRecord:
    """One trained classifier's outcome in the generalization protocol."""

    method: str
    p: int
    train_span: str
    test_window: str
    outer: int
    inner: int
    f1_test: float
    f1_dev: float
    chosen_c: float
    vocab_hash: str

    def __post_init__(self) -> None:
        for name in ("f1_test", "f1_dev"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} {value} outside [0, 1]")


@dataclass(frozen=True)
class PracticalRecord:
    """One trained classifier's within-span F1 and prevalence readings."""

    method: str
    p: int
    outer: int
    inner: int
    f1_within: float
    prevalence_pre: float
    prevalence_during: float
    change_pp: float
    change_rel: float | None
    chosen_c: float
    vocab_hash: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.f1_within <= 1.0:
            raise ValueError(f"f1_within {self.f1_within} outside [0, 1]")


def vocabulary_hash(terms: Sequence[str]) -> str:
    digest = hashlib.sha256("\n".join(terms).encode("utf-8")).hexdigest()
    return digest[:16]


def _rng_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0] % np.iinfo(np.int32).max)


def _matrix_from_entries(
    entries: Sequence[tuple[str, tuple[str, ...], int | None]], vocab: Vocabulary
) -> DocumentTermMatrix:
    """Rows from (row_id, token stream, label) triples over a fixed vocabulary."""
    rows, cols, vals = [], [], []
    labels = []
    ids = []
    labeled = any(label is not None for _, _, label in entries)
    for i, (row_id, stream, label) in enumerate(entries):
        ids.append(row_id)
        labels.append(label)
        counts = Counter(t for t in stream if t in vocab)
        for term, count in counts.items():
            rows.append(i)
            cols.append(vocab.index(term))
            vals.append(count)
    counts_mat = sparse.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (rows, cols)),
        shape=(len(entries), len(vocab)),
    )
    return DocumentTermMatrix(
        users=tuple(ids),
        vocab=vocab,
        counts=counts_mat,
        labels=tuple(labels) if labeled else None,
    )


def _balanced_sample(
    rng: np.random.Generator, by_class: Mapping[int, Sequence[str]], n_per_class: int
) -> list[str]:
    picked: list[str] = []
    for label in (0, 1):
        pool = sorted(by_class.get(label, ()))
        chosen = rng.choice(len(pool), size=n_per_class, replace=False)
        picked.extend(pool[i] for i in sorted(chosen))
    return picked


def _split_users_by_class(
    users: Iterable[str], labels: Mapping[str, int]
) -> dict[int, list[str]]:
    out: dict[int, list[str]] = {0: [], 1: []}
    for user in users:
        label = labels.get(user)
        if label in (0, 1):
            out[label].append(user)
    return out


def _scores_for_methods(
    plan: ExperimentPlan,
    src_counts: Mapping[str, int],
    tgt_counts: Mapping[str, int],
    base: list[str],
    train_dtm: DocumentTermMatrix,
    base_model: ClassifierModel,
    table,
    seed: int,
):
    """Selection scores keyed by method; cumulative carries its own base."""
    floor = plan.frequency_floor
    scored = {}
    for method in plan.methods:
        if method == "cumulative":
            base_c = sorted(select_cumulative(src_counts, floor))
            scored[method] = (score_cumulative(src_counts, floor), base_c)
        elif method == "intersection":
            scored[method] = (score_intersection(src_counts, tgt_counts, floor), base)
        elif method == "frequency":
            scored[method] = (score_frequency(src_counts, base), base)
        elif method == "random":
            scored[method] = (score_random(base, seed), base)
        elif method == "chi2":
            scored[method] = (score_chi2(train_dtm, base), base)
        elif method == "coefficient":
            scored[method] = (score_coefficient(base_model, base), base)
        elif method == "overlap":
            scored[method] = (score_overlap(table, base), base)
        elif method == "weighted":
            coef = score_coefficient(base_model, base)
            over = score_overlap(table, base)
            scored[method] = (score_weighted(coef, over), base)
    return scored


def _train_space(streams, counts, plan: ExperimentPlan, seed: int):
    vocab = Vocabulary.from_counts(counts, min_count=plan.vocab_min_count)
    params = plan.embed.with_seed(seed)
    return train_embeddings(streams, vocab, params)


def _dev_split(
    rng: np.random.Generator, dtm: DocumentTermMatrix
) -> tuple[DocumentTermMatrix, DocumentTermMatrix]:
    """Balanced 80/20 row split of a labeled matrix for dev scoring."""
    y = np.asarray(dtm.labels)
    train_rows, dev_rows = [], []
    for label in (0, 1):
        rows = np.flatnonzero(y == label)
        if len(rows) < 2:
            raise ValueError(
                f"resample yields {len(rows)} rows for class {label}; "
                "need at least 2 for a dev split"
            )
        rows = rows[rng.permutation(len(rows))]
        n_dev = max(1, int(round(0.2 * len(rows))))
        dev_rows.extend(rows[:n_dev])
        train_rows.extend(rows[n_dev:])
    return dtm.subset_rows(sorted(train_rows)), dtm.subset_rows(sorted(dev_rows))


class GeneralizationResult:
    """Record table plus Table-style aggregation for the generalization run."""

    def __init__(self, plan: ExperimentPlan, records: Sequence[RunRecord]):
        self.plan = plan
        self.records = tuple(records)

    def cell(self, method: str, p: int, test_window: str) -> tuple[float, float, int]:
        """Mean and std of test F1 over repeats, plus the repeat count."""
        values = [
            r.f1_test
            for r in self.records
            if r.method == method and r.p == p and r.test_window == test_window
        ]
        if not values:
            raise KeyError(f"no records for ({method}, {p}, {test_window})")
        return float(np.mean(values)), float(np.std(values)), len(values)

    def best_p(self, method: str, test_window: str) -> int:
        """Percentile with the highest mean test F1."""
        best = None
        for p in self.plan.percentiles:
            mean, _, _ = self.cell(method, p, test_window)
            if best is None or mean > best[1]:
                best = (p, mean)
        return best[0]

    def _paired_diffs(
        self, method: str, p: int, test_window: str, reference: str
    ) -> np.ndarray:
        key = lambda r: (r.outer, r.inner)
        mine = {
            key(r): r.f1_test
            for r in self.records
            if r.method == method and r.p == p and r.test_window == test_window
        }
        ref = {
            key(r): r.f1_test
            for r in self.records
            if r.method == reference and r.p == p and r.test_window == test_window
        }
        shared = sorted(set(mine) & set(ref))
        return np.array([mine[k] - ref[k] for k in shared])

    def significant_vs(
        self,
        method: str,
        p: int,
        test_window: str,
        reference: str = "cumulative",
        alpha: float = 0.05,
        n_boot: int = 2000,
    ) -> bool:
        """Two-sided bootstrap test of the paired F1 difference vs a reference."""
        if method == reference or reference not in self.plan.methods:
            return False
        diffs = self._paired_diffs(method, p, test_window, reference)
        if len(diffs) < 2 or np.all(diffs == diffs[0]):
            return bool(len(diffs) > 0 and diffs[0] != 0 and np.all(diffs != 0))
        rng = np.random.default_rng(self.plan.seed)
        idx = rng.integers(0, len(diffs), size=(n_boot, len(diffs)))
        means = diffs[idx].mean(axis=1)
        lo, hi = np.quantile(means, [alpha / 2, 1 - alpha / 2])
        return bool(lo > 0 or hi < 0)

    def to_csv(self, path: str | Path, reference: str = "cumulative") -> None:
        """Full (method, p, window) grid with mean/std F1 and significance."""
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                [
                    "dataset",
                    "train_span",
                    "test_window",
                    "method",
                    "p",
                    "mean_f1",
                    "std_f1",
                    "mean_dev_f1",
                    "n_runs",
                    "significant",
                ]
            )
            train_span = self.records[0].train_span if self.records else ""
            for window in [w.name for w in self.plan.test_windows]:
                for method in self.plan.methods:
                    for p in self.plan.percentiles:
                        mean, std, n = self.cell(method, p, window)
                        dev = float(
                            np.mean(
                                [
                                    r.f1_dev
                                    for r in self.records
                                    if r.method == method
                                    and r.p == p
                                    and r.test_window == window
                                ]
                            )
                        )
                        marker = (
                            "*"
                            if self.significant_vs(method, p, window, reference)
                            else ""
                        )
                        writer.writerow(
                            [
                                self.plan.dataset,
                                train_span,
                                window,
                                method,
                                p,
                                f"{mean:.6f}",
                                f"{std:.6f}",
                                f"{dev:.6f}",
                                n,
                                marker,
                            ]
                        )

    def summary_csv(self, path: str | Path) -> None:
        """One row per (test window, method): mean F1 at the best percentile."""
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["dataset", "train_span", "test_window", "method", "best_p", "mean_f1"]
            )
            train_span = self.records[0].train_span if self.records else ""
            for window in [w.name for w in self.plan.test_windows]:
                for method in self.plan.methods:
                    p = self.best_p(method, window)
                    mean, _, _ = self.cell(method, p, window)
                    writer.writerow(
                        [self.plan.dataset, train_span, window, method, p, f"{mean:.6f}"]
                    )


def run_generalization(store: PostStore, plan: ExperimentPlan) -> GeneralizationResult:
    """Temporal-generalization protocol over the plan's windows.

    Parameters
    ----------
    store : PostStore
        Labeled posts covering the training and test windows.
    plan : ExperimentPlan
        Windows, repeats, thresholds, and model parameters.

    Returns
    -------
    GeneralizationResult
        One RunRecord per (method, percentile, test window, outer, inner).

    Raises
    ------
    ValueError
        When class balance or minimum-post constraints cannot be met;
        the message names the binding window and class.
    """
    if not plan.train_windows or not plan.test_windows:
        raise ValueError("plan needs at least one training and one test window")
    labels = store.user_labels()
    periods = [*plan.train_windows, *plan.test_windows]
    sliced = slice_corpus(store, periods)
    train_span = "+".join(w.name for w in plan.train_windows)

    def eligible(window: str) -> list[str]:
        return [
            u
            for u in sliced.users(window)
            if u in labels and sliced.post_count(window, u) >= plan.min_posts
        ]

    eligible_by_window = {w.name: eligible(w.name) for w in periods}
    all_users = sorted({u for users in eligible_by_window.values() for u in users})
    if not all_users:
        raise ValueError(
            f"no labeled users meet min_posts={plan.min_posts} in any window"
        )

    root = np.random.SeedSequence(plan.seed)
    outer_seeds = root.spawn(plan.outer_repeats)
    records: list[RunRecord] = []
    for outer, outer_ss in enumerate(outer_seeds):
        split_ss, embed_ss, stage2_ss = outer_ss.spawn(3)
        rng = np.random.default_rng(split_ss)
        shuffled = list(all_users)
        rng.shuffle(shuffled)
        n_train = int(round(plan.train_fraction * len(shuffled)))
        train_pool = set(shuffled[:n_train])
        test_pool = set(shuffled[n_train:])
        if train_pool & test_pool:
            raise RuntimeError("user leakage: train/test pools overlap")

        # stage 1: frozen counts and embedding spaces on the 80% side
        src_entries = [
            (f"{w.name}:{u}", sliced.stream(w.name, u), labels[u])
            for w in plan.train_windows
            for u in eligible_by_window[w.name]
            if u in train_pool
        ]
        src_counts: Counter[str] = Counter()
        for _, stream, _ in src_entries:
            src_counts.update(stream)
        embed_seeds = embed_ss.spawn(1 + len(plan.test_windows))
        space_src = _train_space(
            [stream for _, stream, _ in src_entries],
            src_counts,
            plan,
            _rng_seed(embed_seeds[0]),
        )

        per_window: dict[str, dict] = {}
        for w_i, window in enumerate(plan.test_windows):
            tgt_users = [
                u for u in eligible_by_window[window.name] if u in train_pool
            ]
            if not tgt_users:
                raise ValueError(
                    f"test window {window.name!r}: no eligible users in the "
                    "80% pool to train target embeddings"
                )
            tgt_streams = [sliced.stream(window.name, u) for u in tgt_users]
            if any(u in test_pool for u in tgt_users):
                raise RuntimeError("user leakage: held-out user in target streams")
            tgt_counts: Counter[str] = Counter()
            for stream in tgt_streams:
                tgt_counts.update(stream)
            space_tgt = _train_space(
                tgt_streams, tgt_counts, plan, _rng_seed(embed_seeds[1 + w_i])
            )
            table = stability_table(
                space_src,
                space_tgt,
                k=plan.k,
                cf_nb=plan.cf_nb,
                cf_shift=plan.cf_shift,
                pair=(train_span, window.name),
            )
            base = sorted(select_intersection(src_counts, tgt_counts, plan.frequency_floor))
            if not base:
                raise ValueError(
                    f"intersection base empty at floor {plan.frequency_floor} "
                    f"for test window {window.name!r}"
                )
            test_by_class = _split_users_by_class(
                (u for u in eligible_by_window[window.name] if u in test_pool), labels
            )
            n_test = min(len(test_by_class[0]), len(test_by_class[1]))
            if n_test == 0:
                short = 0 if len(test_by_class[0]) == 0 else 1
                raise ValueError(
                    f"test window {window.name!r} class {short}: no eligible "
                    f"users in the held-out pool (min_posts={plan.min_posts})"
                )
            per_window[window.name] = {
                "table": table,
                "tgt_counts": tgt_counts,
                "base": base,
                "test_by_class": test_by_class,
                "n_test": n_test,
            }

        train_by_class_per_window = {}
        n_train_per_class = None
        binding = None
        for w in plan.train_windows:
            by_class = _split_users_by_class(
                (u for u in eligible_by_window[w.name] if u in train_pool), labels
            )
            train_by_class_per_window[w.name] = by_class
            for label in (0, 1):
                n = len(by_class[label])
                if n_train_per_class is None or n < n_train_per_class:
                    n_train_per_class = n
                    binding = (w.name, label)
        if not n_train_per_class:
            raise ValueError(
                f"training window {binding[0]!r} class {binding[1]}: no eligible "
                f"users in the 80% pool (min_posts={plan.min_posts})"
            )

        vocab_src = Vocabulary.from_counts(src_counts, min_count=plan.vocab_min_count)
        inner_seeds = stage2_ss.spawn(plan.inner_repeats)
        for inner, inner_ss in enumerate(inner_seeds):
            inner_rng = np.random.default_rng(inner_ss)
            entries = []
            for w in plan.train_windows:
                sampled = _balanced_sample(
                    inner_rng, train_by_class_per_window[w.name], n_train_per_class
                )
                entries.extend(
                    (f"{w.name}:{u}", sliced.stream(w.name, u), labels[u])
                    for u in sampled
                )
            train_dtm = _matrix_from_entries(entries, vocab_src)
            fit_dtm, dev_dtm = _dev_split(inner_rng, train_dtm)

            # one CV on the union of intersection bases fixes C and provides
            # the coefficient-scoring model for this resample
            union_base = sorted(
                {t for ctx in per_window.values() for t in ctx["base"]}
            )
            base_model = train_classifier(
                fit_dtm,
                union_base,
                grid=plan.c_grid,
                folds=plan.folds,
                seed=_rng_seed(inner_ss.spawn(1)[0]),
            )
            chosen_c = base_model.c

            for window in plan.test_windows:
                ctx = per_window[window.name]
                test_sampled = _balanced_sample(
                    inner_rng, ctx["test_by_class"], ctx["n_test"]
                )
                test_entries = [
                    (f"{window.name}:{u}", sliced.stream(window.name, u), labels[u])
                    for u in test_sampled
                ]
                test_dtm = _matrix_from_entries(test_entries, vocab_src)
                scored = _scores_for_methods(
                    plan,
                    src_counts,
                    ctx["tgt_counts"],
                    ctx["base"],
                    fit_dtm,
                    base_model,
                    ctx["table"],
                    seed=_rng_seed(inner_ss.spawn(2)[1]),
                )
                y_dev = np.asarray(dev_dtm.labels)
                y_test = np.asarray(test_dtm.labels)
                for method, (score, method_base) in scored.items():
                    for p, selection in sweep(
                        score, method_base, plan.percentiles
                    ).items():
                        model = train_classifier(
                            fit_dtm, selection.terms, c=chosen_c
                        )
                        records.append(
                            RunRecord(
                                method=method,
                                p=p,
                                train_span=train_span,
                                test_window=window.name,
                                outer=outer,
                                inner=inner,
                                f1_test=f1_score(y_test, model.predict(test_dtm)),
                                f1_dev=f1_score(y_dev, model.predict(dev_dtm)),
                                chosen_c=chosen_c,
                                vocab_hash=vocabulary_hash(selection.terms),
                            )
                        )
    return GeneralizationResult(plan, records)


class PracticalResult:
    """Record table plus curve bundles for the practical-effects run."""

    def __init__(self, plan: ExperimentPlan, records: Sequence[PracticalRecord]):
        self.plan = plan
        self.records = tuple(records)

    def _values(self, method: str, p: int, attr: str) -> list[float]:
        return [
            getattr(r, attr)
            for r in self.records
            if r.method == method and r.p == p
        ]

    def curve(self, method: str) -> list[dict]:
        points = []
        for p in self.plan.percentiles:
            f1 = self._values(method, p, "f1_within")
            change = self._values(method, p, "change_pp")
            if not f1:
                continue
            rels = [
                r.change_rel
                for r in self.records
                if r.method == method and r.p == p and r.change_rel is not None
            ]
            points.append(
                {
                    "p": p,
                    "f1_within_mean": float(np.mean(f1)),
                    "f1_within_std": float(np.std(f1)),
                    "change_pp_mean": float(np.mean(change)),
                    "change_pp_std": float(np.std(change)),
                    "change_rel_mean": float(np.mean(rels)) if rels else None,
                    "prevalence_pre_mean": float(
                        np.mean(self._values(method, p, "prevalence_pre"))
                    ),
                    "prevalence_during_mean": float(
                        np.mean(self._values(method, p, "prevalence_during"))
                    ),
                    "n_runs": len(f1),
                }
            )
        return points

    def mean_f1(self, method: str, p: int) -> float:
        return float(np.mean(self._values(method, p, "f1_within")))

    def mean_change_pp(self, method: str, p: int) -> float:
        return float(np.mean(self._values(method, p, "change_pp")))

    def divergence_report(
        self,
        reference: tuple[str, int] = ("intersection", 100),
        comparison: tuple[str, int] = ("overlap", 50),
        sensitivity_pp: float = 5.0,
        f1_tolerance: float = 0.01,
    ) -> dict:
        """Flag near-identical F1 with diverging prevalence-change readings."""
        configs = {
            f"{m}@{p}": (m, p) for m, p in (reference, comparison)
        }
        f1 = {name: self.mean_f1(m, p) for name, (m, p) in configs.items()}
        change = {name: self.mean_change_pp(m, p) for name, (m, p) in configs.items()}
        return flag_divergence(
            f1,
            change,
            reference=f"{reference[0]}@{reference[1]}",
            comparison=f"{comparison[0]}@{comparison[1]}",
            sensitivity_pp=sensitivity_pp,
            f1_tolerance=f1_tolerance,
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                [
                    "dataset",
                    "method",
                    "p",
                    "mean_f1_within",
                    "std_f1_within",
                    "mean_change_pp",
                    "std_change_pp",
                    "mean_prevalence_pre",
                    "mean_prevalence_during",
                    "n_runs",
                ]
            )
            for method in self.plan.methods:
                for point in self.curve(method):
                    writer.writerow(
                        [
                            self.plan.dataset,
                            method,
                            point["p"],
                            f"{point['f1_within_mean']:.6f}",
                            f"{point['f1_within_std']:.6f}",
                            f"{point['change_pp_mean']:.6f}",
                            f"{point['change_pp_std']:.6f}",
                            f"{point['prevalence_pre_mean']:.6f}",
                            f"{point['prevalence_during_mean']:.6f}",
                            point["n_runs"],
                        ]
                    )

    def curves_json(self, path: str | Path, divergence: dict | None = None) -> None:
        payload = {
            "dataset": self.plan.dataset,
            "curves": {m: self.curve(m) for m in self.plan.methods},
            "divergence": divergence
            if divergence is not None
            else self.divergence_report(),
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")


def _full_span(store: PostStore, name: str = "span") -> Period:
    stamps = [p.timestamp for p in store.all_posts()]
    return Period(name, min(stamps), max(stamps) + 1.0)


def run_practical(
    labeled: PostStore,
    unlabeled: PostStore,
    pre: Period,
    during: Period,
    plan: ExperimentPlan,
) -> PracticalResult:
    """Practical-effects protocol: F1-vs-vocabulary and prevalence curves.

    Parameters
    ----------
    labeled : PostStore
        Labeled corpus used over its full span (no temporal split).
    unlabeled : PostStore
        Deployment corpus with pre and during periods.
    pre, during : Period
        The two deployment windows; both must contain posts.
    plan : ExperimentPlan
        Repeats, thresholds, and model parameters (windows unused here).

    Raises
    ------
    ValueError
        On missing period coverage in the unlabeled corpus or when the
        labeled corpus cannot satisfy the balanced-resample constraints.
    """
    labels = labeled.user_labels()
    span = _full_span(labeled)
    sliced_lab = slice_corpus(labeled, [span])
    check_disjoint([pre, during])
    sliced_unl = slice_corpus(unlabeled, [pre, during])
    for period in (pre, during):
        if not sliced_unl.users(period.name):
            raise ValueError(
                f"unlabeled corpus has no posts in period {period.name!r}"
            )

    root = np.random.SeedSequence(plan.seed)
    unl_ss, lab_ss = root.spawn(2)

    # one 20% post sample feeds the three unlabeled spaces
    unl_rng = np.random.default_rng(unl_ss)
    all_posts = list(unlabeled.all_posts())
    n_sample = max(1, int(round(plan.post_sample_fraction * len(all_posts))))
    sample_idx = sorted(unl_rng.choice(len(all_posts), size=n_sample, replace=False))
    sampled_store = PostStore([all_posts[i] for i in sample_idx])
    unl_span = _full_span(sampled_store, "unlabeled-span")
    sliced_sample = slice_corpus(sampled_store, [unl_span])
    unl_seeds = unl_ss.spawn(3)
    unl_counts = sliced_sample.term_counts("unlabeled-span")
    space_unl_full = _train_space(
        list(sliced_sample.streams("unlabeled-span")),
        unl_counts,
        plan,
        _rng_seed(unl_seeds[0]),
    )
    sliced_sample_periods = slice_corpus(sampled_store, [pre, during])
    for offset, period in enumerate((pre, during)):
        streams = list(sliced_sample_periods.streams(period.name))
        if streams:
            _train_space(
                streams,
                sliced_sample_periods.term_counts(period.name),
                plan,
                _rng_seed(unl_seeds[1 + offset]),
            )

    # prevalence matrices over the full unlabeled corpus, gated by min_posts
    vocab_unl = Vocabulary.from_counts(
        sliced_unl.term_counts(pre.name) + sliced_unl.term_counts(during.name),
        min_count=1,
    )
    dtm_pre = aggregate_users(sliced_unl, pre.name, vocab_unl, min_posts=plan.min_posts)
    dtm_during = aggregate_users(
        sliced_unl, during.name, vocab_unl, min_posts=plan.min_posts
    )

    by_class_all = _split_users_by_class(sliced_lab.users("span"), labels)
    records: list[PracticalRecord] = []
    outer_seeds = lab_ss.spawn(plan.outer_repeats)
    for outer, outer_ss in enumerate(outer_seeds):
        split_ss, embed_pick, inner_root = outer_ss.spawn(3)
        rng = np.random.default_rng(split_ss)
        labeled_users = sorted(u for u in sliced_lab.users("span") if u in labels)
        rng.shuffle(labeled_users)
        n_train = int(round(plan.train_fraction * len(labeled_users)))
        train_users = set(labeled_users[:n_train])
        eval_users = set(labeled_users[n_train:])
        if train_users & eval_users:
            raise RuntimeError("user leakage: train/eval pools overlap")

        src_streams = [sliced_lab.stream("span", u) for u in sorted(train_users)]
        src_counts: Counter[str] = Counter()
        for stream in src_streams:
            src_counts.update(stream)
        space_lab = _train_space(
            src_streams, src_counts, plan, _rng_seed(embed_pick)
        )
        table = stability_table(
            space_lab,
            space_unl_full,
            k=plan.k,
            cf_nb=plan.cf_nb,
            cf_shift=plan.cf_shift,
            pair=("labeled", "unlabeled"),
        )
        base = sorted(
            select_intersection(src_counts, unl_counts, plan.frequency_floor)
        )
        if not base:
            raise ValueError(
                f"intersection base empty at floor {plan.frequency_floor} "
                "between labeled and unlabeled corpora"
            )
        missing = [t for t in base if t not in vocab_unl]
        if missing:
            raise ValueError(f"unlabeled matrix lacks base terms {missing[:5]}")

        eval_by_class = _split_users_by_class(eval_users, labels)
        n_eval = min(len(eval_by_class[0]), len(eval_by_class[1]))
        if n_eval == 0:
            short = 0 if len(eval_by_class[0]) == 0 else 1
            raise ValueError(
                f"held-out labeled pool has no class-{short} users for "
                "within-span evaluation"
            )
        train_by_class = _split_users_by_class(train_users, labels)
        n_per_class = min(len(train_by_class[0]), len(train_by_class[1]))
        if n_per_class < 2:
            short = 0 if len(train_by_class[0]) < len(train_by_class[1]) else 1
            raise ValueError(
                f"labeled training pool class {short} has {n_per_class} users; "
                "need at least 2"
            )
        vocab_lab = Vocabulary.from_counts(src_counts, min_count=plan.vocab_min_count)

        inner_seeds = inner_root.spawn(plan.inner_repeats)
        for inner, inner_ss in enumerate(inner_seeds):
            inner_rng = np.random.default_rng(inner_ss)
            sampled = _balanced_sample(inner_rng, train_by_class, n_per_class)
            entries = [
                (u, sliced_lab.stream("span", u), labels[u]) for u in sampled
            ]
            train_dtm = _matrix_from_entries(entries, vocab_lab)
            eval_sampled = _balanced_sample(inner_rng, eval_by_class, n_eval)
            eval_entries = [
                (u, sliced_lab.stream("span", u), labels[u]) for u in eval_sampled
            ]
            eval_dtm = _matrix_from_entries(eval_entries, vocab_lab)
            y_eval = np.asarray(eval_dtm.labels)

            base_model = train_classifier(
                train_dtm,
                base,
                grid=plan.c_grid,
                folds=plan.folds,
                seed=_rng_seed(inner_ss.spawn(1)[0]),
            )
            chosen_c = base_model.c
            scored = _scores_for_methods(
                plan,
                src_counts,
                unl_counts,
                base,
                train_dtm,
                base_model,
                table,
                seed=_rng_seed(inner_ss.spawn(2)[1]),
            )
            for method, (score, method_base) in scored.items():
                for p, selection in sweep(score, method_base, plan.percentiles).items():
                    usable = [t for t in selection.terms if t in vocab_unl]
                    if len(usable) < len(selection.terms):
                        dropped = len(selection.terms) - len(usable)
                        logger.warning(
                            "%s p=%d: %d selected terms absent from the "
                            "unlabeled corpus; prevalence uses the rest",
                            method,
                            p,
                            dropped,
                        )
                    model = train_classifier(train_dtm, selection.terms, c=chosen_c)
                    prevalence_model = (
                        model
                        if len(usable) == len(selection.terms)
                        else train_classifier(train_dtm, usable, c=chosen_c)
                    )
                    est_pre = estimate_prevalence(prevalence_model, dtm_pre, pre.name)
                    est_during = estimate_prevalence(
                        prevalence_model, dtm_during, during.name
                    )
                    change = prevalence_change(est_pre, est_during)
                    records.append(
                        PracticalRecord(
                            method=method,
                            p=p,
                            outer=outer,
                            inner=inner,
                            f1_within=f1_score(y_eval, model.predict(eval_dtm)),
                            prevalence_pre=est_pre.prevalence,
                            prevalence_during=est_during.prevalence,
                            change_pp=change.absolute_pp,
                            change_rel=change.relative_pct,
                            chosen_c=chosen_c,
                            vocab_hash=vocabulary_hash(selection.terms),
                        )
                    )
    return PracticalResult(plan, records)
