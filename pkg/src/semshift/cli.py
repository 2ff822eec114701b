"""Command-line pipeline: each subcommand reads files, writes files.

Stages communicate only through their artifacts (counts CSVs, DTM
triplet files, embedding binaries, stability CSVs, selection JSON,
model binaries), so any stage can be rerun or inspected in isolation.
Every invocation ends with one machine-readable JSON summary line on
stdout; errors go to stderr and exit nonzero. The configuration file is
parsed and validated before anything is written.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from dataclasses import asdict, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .config import RunConfig, audit_defaults, load_config, save_config
from .corpus import (
    DocumentTermMatrix,
    Vocabulary,
    aggregate_users,
    build_vocabulary,
    check_disjoint,
    ingest_posts,
    learn_phrases,
    load_phrases,
    save_phrases,
    slice_corpus,
    tokenize,
)
from .embed import load_binary, save_binary, train_embeddings
from .harness import ExperimentPlan, run_generalization, run_practical
from .model import ClassifierModel, f1_score, train_classifier
from .monitor import (
    estimate_prevalence,
    keyword_series,
    prevalence_change,
    prevalence_to_csv,
    series_to_csv,
)
from .report import (
    render_generalization_curves,
    render_keyword_series,
    render_practical_curves,
    render_stability_histogram,
)
from .select import (
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
    selections_from_json,
    selections_to_json,
    sweep,
)
from .shift import StabilityTable, diffs_to_json, neighbor_diff, stability_table
from .synthlab import SynthSpec, generate, write_result

COUNTS_HEADER = ["term", "count"]


def _write_counts(counts: Mapping[str, int], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(COUNTS_HEADER)
        for term in sorted(counts):
            writer.writerow([term, counts[term]])


def _read_counts(path: str | Path) -> dict[str, int]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != COUNTS_HEADER:
            raise ValueError(f"{path}: expected header {','.join(COUNTS_HEADER)}")
        return {term: int(count) for term, count in reader}


def _split_terms(raw: str) -> list[str]:
    terms = [t.strip() for t in raw.split(",") if t.strip()]
    if not terms:
        raise ValueError("empty term list")
    return terms


def _periods(cfg: RunConfig):
    if not cfg.periods:
        raise ValueError("config must define at least one period")
    periods = [p.to_period() for p in cfg.periods]
    check_disjoint(periods)
    return periods


def _effective_workers(cfg: RunConfig) -> int:
    return 1 if cfg.deterministic else cfg.workers


def _plan_from_config(cfg: RunConfig, dataset: str) -> ExperimentPlan:
    h = cfg.harness
    plan = ExperimentPlan(
        dataset=dataset,
        train_windows=tuple(cfg.period(n) for n in h.train_windows),
        test_windows=tuple(cfg.period(n) for n in h.test_windows),
        outer_repeats=h.outer_repeats,
        inner_repeats=h.inner_repeats,
        min_posts=h.min_posts,
        seed=cfg.seed,
        embed=cfg.embed.params(seed=cfg.seed, workers=_effective_workers(cfg)),
        k=cfg.shift.k,
        cf_nb=cfg.shift.cf_nb,
        cf_shift=cfg.shift.cf_shift,
        frequency_floor=cfg.select.frequency_floor,
        vocab_min_count=cfg.corpus.min_count,
        folds=cfg.model.folds,
        c_grid=cfg.model.c_grid,
        percentiles=cfg.select.percentiles,
        train_fraction=h.train_fraction,
        post_sample_fraction=h.post_sample_fraction,
    )
    return plan.at_full_scale() if h.full_scale else plan


def cmd_ingest(args, cfg: RunConfig, out: Path) -> dict:
    store = ingest_posts(args.posts, schema=cfg.corpus.schema)
    periods = _periods(cfg)
    phrasers = load_phrases(args.phrases) if args.phrases else None
    sliced = slice_corpus(store, periods, phrasers=phrasers)
    vocab = build_vocabulary(
        sliced, min_count=cfg.corpus.min_count, max_size=cfg.corpus.max_vocab
    )
    vocab.to_csv(out / "vocab.csv")
    labels = store.user_labels() or None
    outputs = ["vocab.csv"]
    period_stats = {}
    for period in periods:
        _write_counts(sliced.term_counts(period.name), out / f"counts_{period.name}.csv")
        dtm = aggregate_users(
            sliced, period.name, vocab, min_posts=cfg.corpus.min_posts, labels=labels
        )
        dtm.save_triplets(out / f"dtm_{period.name}.triplets")
        outputs += [f"counts_{period.name}.csv", f"dtm_{period.name}.triplets"]
        period_stats[period.name] = {
            "users": len(dtm.users),
            "tokens": sliced.token_total(period.name),
        }
    return {
        "command": "ingest",
        "posts": sum(1 for _ in store.all_posts()),
        "users": len(store.users()),
        "vocab_size": len(vocab),
        "periods": period_stats,
        "outputs": outputs,
    }


def cmd_phrases(args, cfg: RunConfig, out: Path) -> dict:
    store = ingest_posts(args.posts, schema=cfg.corpus.schema)
    if args.period:
        period = cfg.period(args.period)
        sliced = slice_corpus(store, [period])
        streams = list(sliced.streams(period.name))
    else:
        streams = [tokenize(post.text) for post in store.all_posts()]
    model = learn_phrases(
        streams,
        min_count=cfg.phrases.min_count,
        threshold=cfg.phrases.threshold,
        passes=cfg.phrases.passes,
    )
    save_phrases(model, out / "phrases.json")
    return {
        "command": "phrases",
        "streams": len(streams),
        "merges": len(model.merges),
        "outputs": ["phrases.json"],
    }


def cmd_embed(args, cfg: RunConfig, out: Path) -> dict:
    store = ingest_posts(args.posts, schema=cfg.corpus.schema)
    period = cfg.period(args.period)
    phrasers = load_phrases(args.phrases) if args.phrases else None
    sliced = slice_corpus(store, [period], phrasers=phrasers)
    streams = list(sliced.streams(period.name))
    vocab = Vocabulary.from_counts(
        sliced.term_counts(period.name),
        min_count=cfg.corpus.min_count,
        max_size=cfg.corpus.max_vocab,
    )
    params = cfg.embed.params(seed=cfg.seed, workers=_effective_workers(cfg))
    space = train_embeddings(streams, vocab, params)
    emb_name = f"embedding_{period.name}.bin"
    vocab_name = f"vocab_{period.name}.csv"
    save_binary(space, out / emb_name)
    vocab.to_csv(out / vocab_name)
    return {
        "command": "embed",
        "period": period.name,
        "streams": len(streams),
        "vocab_size": len(vocab),
        "dim": space.dim,
        "outputs": [emb_name, vocab_name],
    }


def cmd_shift(args, cfg: RunConfig, out: Path) -> dict:
    space_p = load_binary(args.source)
    space_q = load_binary(args.target)
    pair = (Path(args.source).stem, Path(args.target).stem)
    table = stability_table(
        space_p,
        space_q,
        k=cfg.shift.k,
        cf_nb=cfg.shift.cf_nb,
        cf_shift=cfg.shift.cf_shift,
        metric=cfg.shift.metric,
        pair=pair,
    )
    table.to_csv(out / "stability.csv")
    outputs = ["stability.csv"]
    if args.diff_terms:
        diffs = [
            neighbor_diff(
                space_p,
                space_q,
                term,
                top_m=args.top_m,
                cf_nb=cfg.shift.cf_nb,
                cf_shift=cfg.shift.cf_shift,
                metric=cfg.shift.metric,
            )
            for term in _split_terms(args.diff_terms)
        ]
        diffs_to_json(diffs, out / "neighbor_diffs.json")
        outputs.append("neighbor_diffs.json")
    scores = table.scores()
    return {
        "command": "shift",
        "pair": list(pair),
        "terms": len(table.records),
        "truncated": len(table.truncated_terms()),
        "mean_score": sum(scores.values()) / len(scores) if scores else None,
        "outputs": outputs,
    }


SELECT_INPUTS = {
    "cumulative": ("source_counts",),
    "intersection": ("source_counts", "target_counts"),
    "frequency": ("source_counts", "target_counts"),
    "random": ("source_counts", "target_counts"),
    "chi2": ("source_counts", "target_counts", "dtm", "vocab"),
    "coefficient": ("source_counts", "target_counts", "model"),
    "overlap": ("source_counts", "target_counts", "stability"),
    "weighted": ("source_counts", "target_counts", "model", "stability"),
}


def cmd_select(args, cfg: RunConfig, out: Path) -> dict:
    method = args.method
    missing = [
        "--" + name.replace("_", "-")
        for name in SELECT_INPUTS[method]
        if getattr(args, name) is None
    ]
    if missing:
        raise ValueError(f"method {method!r} requires {', '.join(missing)}")
    floor = cfg.select.frequency_floor
    source = _read_counts(args.source_counts)
    if method == "cumulative":
        base = sorted(select_cumulative(source, floor))
        score = score_cumulative(source, floor)
    else:
        target = _read_counts(args.target_counts)
        base = sorted(select_intersection(source, target, floor))
        if method == "intersection":
            score = score_intersection(source, target, floor)
        elif method == "frequency":
            score = score_frequency(source, base)
        elif method == "random":
            score = score_random(base, seed=cfg.seed)
        elif method == "chi2":
            vocab = Vocabulary.from_csv(args.vocab)
            dtm = DocumentTermMatrix.load_triplets(args.dtm, vocab)
            score = score_chi2(dtm, base)
        elif method == "coefficient":
            model = ClassifierModel.load(args.model)
            score = score_coefficient(model, base)
        elif method == "overlap":
            table = StabilityTable.from_csv(args.stability, k=cfg.shift.k)
            score = score_overlap(table, base)
        else:
            model = ClassifierModel.load(args.model)
            table = StabilityTable.from_csv(args.stability, k=cfg.shift.k)
            score = score_weighted(
                score_coefficient(model, base), score_overlap(table, base)
            )
    if not base:
        raise ValueError("selection base is empty at the configured frequency floor")
    selections = sweep(score, base, cfg.select.percentiles)
    sel_name = f"selections_{method}.json"
    score_name = f"scores_{method}.csv"
    selections_to_json([selections[p] for p in sorted(selections)], out / sel_name)
    score.to_csv(out / score_name)
    return {
        "command": "select",
        "method": method,
        "base_size": len(base),
        "percentiles": sorted(selections),
        "outputs": [sel_name, score_name],
    }


def cmd_train(args, cfg: RunConfig, out: Path) -> dict:
    vocab = Vocabulary.from_csv(args.vocab)
    dtm = DocumentTermMatrix.load_triplets(args.dtm, vocab)
    selections = selections_from_json(args.selection)
    chosen = [s for s in selections if s.p == args.p]
    if not chosen:
        available = sorted(s.p for s in selections)
        raise ValueError(f"no selection at p={args.p}; file has {available}")
    selection = chosen[0]
    model = train_classifier(
        dtm,
        selection.terms,
        grid=cfg.model.c_grid,
        folds=cfg.model.folds,
        seed=cfg.seed,
        metadata={"method": selection.method, "p": selection.p},
    )
    model.save(out / "model.bin")
    return {
        "command": "train",
        "method": selection.method,
        "p": selection.p,
        "terms": len(selection.terms),
        "chosen_c": model.c,
        "outputs": ["model.bin"],
    }


def cmd_evaluate(args, cfg: RunConfig, out: Path) -> dict:
    vocab = Vocabulary.from_csv(args.vocab)
    dtm = DocumentTermMatrix.load_triplets(args.dtm, vocab)
    if dtm.labels is None:
        raise ValueError("evaluation matrix has no labels")
    model = ClassifierModel.load(args.model)
    y_true = np.asarray(dtm.labels)
    y_pred = model.predict(dtm)
    metrics = {
        "f1": f1_score(y_true, y_pred),
        "accuracy": float((y_true == y_pred).mean()),
        "users": int(y_true.size),
        "positive_true": int(y_true.sum()),
        "positive_predicted": int(y_pred.sum()),
    }
    with open(out / "metrics.json", "w", encoding="utf-8") as handle:
        json.dump(metrics, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return {"command": "evaluate", **metrics, "outputs": ["metrics.json"]}


def cmd_prevalence(args, cfg: RunConfig, out: Path) -> dict:
    store = ingest_posts(args.posts, schema=cfg.corpus.schema)
    model = ClassifierModel.load(args.model)
    pre = cfg.period(args.pre or cfg.harness.pre_period)
    during = cfg.period(args.during or cfg.harness.during_period)
    check_disjoint([pre, during])
    phrasers = load_phrases(args.phrases) if args.phrases else None
    sliced = slice_corpus(store, [pre, during], phrasers=phrasers)
    counts: Counter[str] = Counter()
    counts.update(sliced.term_counts(pre.name))
    counts.update(sliced.term_counts(during.name))
    for term in model.terms:
        counts[term] = max(counts[term], 1)
    vocab = Vocabulary.from_counts(counts, min_count=1)
    meta = model.metadata or {}
    rows = []
    estimates = {}
    for period in (pre, during):
        dtm = aggregate_users(
            sliced, period.name, vocab, min_posts=cfg.monitor.min_posts
        )
        est = estimate_prevalence(model, dtm, period.name)
        estimates[period.name] = est
        rows.append(
            {
                "method": meta.get("method", "model"),
                "p": meta.get("p", 100),
                "period": period.name,
                "eligible": est.eligible,
                "positive": est.positive,
                "prevalence": est.prevalence,
            }
        )
    change = prevalence_change(estimates[pre.name], estimates[during.name])
    prevalence_to_csv(rows, out / "prevalence.csv")
    outputs = ["prevalence.csv"]
    if args.keywords:
        series = keyword_series(store, _split_terms(args.keywords), phrases=phrasers)
        series_to_csv(series, out / "keyword_series.csv")
        outputs.append("keyword_series.csv")
    return {
        "command": "prevalence",
        "pre": {"period": pre.name, "prevalence": estimates[pre.name].prevalence},
        "during": {
            "period": during.name,
            "prevalence": estimates[during.name].prevalence,
        },
        "change_pp": change.absolute_pp,
        "change_rel_pct": change.relative_pct,
        "flagged": change.flagged,
        "outputs": outputs,
    }


def cmd_generalization(args, cfg: RunConfig, out: Path) -> dict:
    if not cfg.harness.train_windows or not cfg.harness.test_windows:
        raise ValueError(
            "config harness.train_windows and harness.test_windows must name periods"
        )
    store = ingest_posts(args.posts, schema=cfg.corpus.schema)
    plan = _plan_from_config(cfg, dataset=args.dataset)
    result = run_generalization(store, plan)
    result.to_csv(out / "generalization_grid.csv")
    result.summary_csv(out / "generalization_summary.csv")
    best = {
        f"{method}:{window.name}": result.best_p(method, window.name)
        for method in plan.methods
        for window in plan.test_windows
    }
    return {
        "command": "generalization",
        "records": len(result.records),
        "best_p": best,
        "outputs": ["generalization_grid.csv", "generalization_summary.csv"],
    }


def cmd_practical(args, cfg: RunConfig, out: Path) -> dict:
    labeled = ingest_posts(args.labeled, schema=cfg.corpus.schema)
    unlabeled = ingest_posts(args.unlabeled, schema=cfg.corpus.schema)
    pre = cfg.period(cfg.harness.pre_period)
    during = cfg.period(cfg.harness.during_period)
    plan = _plan_from_config(cfg, dataset=args.dataset)
    result = run_practical(labeled, unlabeled, pre, during, plan)
    divergence = result.divergence_report()
    result.to_csv(out / "practical_curves.csv")
    result.curves_json(out / "practical_curves.json", divergence=divergence)
    return {
        "command": "practical",
        "records": len(result.records),
        "divergence": divergence,
        "outputs": ["practical_curves.csv", "practical_curves.json"],
    }


def cmd_synth(args, cfg: RunConfig, out: Path) -> dict:
    spec = SynthSpec(**asdict(cfg.synth), seed=cfg.seed)
    result = generate(spec)
    write_result(result, out / "corpus.jsonl", out / "manifest.json")
    return {
        "command": "synth",
        "posts": len(result.posts),
        "vocab_size": spec.vocab_size,
        "shifted_terms": len(result.manifest["shifted_terms"]),
        "signal_terms": len(result.manifest["signal_terms"]),
        "outputs": ["corpus.jsonl", "manifest.json"],
    }


def cmd_selftest(args, cfg: RunConfig, out: Path) -> dict:
    checks = audit_defaults()
    save_config(RunConfig(), out / "defaults.yaml")
    return {
        "command": "selftest",
        "ok": all(checks.values()),
        "checks": checks,
        "outputs": ["defaults.yaml"],
    }


def cmd_report(args, cfg: RunConfig, out: Path) -> dict:
    inputs = [args.stability, args.grid, args.curves, args.series]
    if not any(inputs):
        raise ValueError(
            "report needs at least one of --stability, --grid, --curves, --series"
        )
    written: list[Path] = []
    if args.stability:
        written.append(
            render_stability_histogram(args.stability, out / "stability_hist.png")
        )
    if args.grid:
        written.append(
            render_generalization_curves(args.grid, out / "generalization_f1.png")
        )
    if args.curves:
        written.extend(
            render_practical_curves(
                args.curves, out / "practical_f1.png", out / "prevalence_change.png"
            )
        )
    if args.series:
        written.append(render_keyword_series(args.series, out / "keyword_series.png"))
    return {"command": "report", "outputs": [p.name for p in written]}


def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool = False) -> None:
    """Attach shared flags; subparsers use SUPPRESS so they only override."""
    default = argparse.SUPPRESS if suppress else None
    flag_default = argparse.SUPPRESS if suppress else False
    parser.add_argument("--config", default=default, help="YAML configuration file")
    parser.add_argument(
        "--seed", type=int, default=default, help="override the configured seed"
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=default,
        help="override the configured worker count",
    )
    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=flag_default,
        help="force single-worker, bit-reproducible execution",
    )
    parser.add_argument(
        "--output-dir", default=default, help="directory for emitted files"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semshift",
        description="Semantic-shift scoring, shift-aware feature selection, "
        "and prevalence monitoring for time-sliced corpora.",
    )
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="slice posts into per-period artifacts")
    p.add_argument("--posts", required=True, help="line-delimited JSON posts")
    p.add_argument("--phrases", help="phrase model JSON to apply while tokenizing")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("phrases", help="learn a phrase merge table")
    p.add_argument("--posts", required=True)
    p.add_argument("--period", help="restrict learning to one configured period")
    p.set_defaults(func=cmd_phrases)

    p = sub.add_parser("embed", help="train embeddings for one period")
    p.add_argument("--posts", required=True)
    p.add_argument("--period", required=True, help="configured period name")
    p.add_argument("--phrases", help="phrase model JSON to apply while tokenizing")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("shift", help="score stability between two embedding spaces")
    p.add_argument("--source", required=True, help="earlier embedding binary")
    p.add_argument("--target", required=True, help="later embedding binary")
    p.add_argument("--diff-terms", help="comma-separated terms to diff neighbors for")
    p.add_argument("--top-m", type=int, default=15, help="neighbors per diff side")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("select", help="rank a base vocabulary and sweep percentiles")
    p.add_argument("--method", required=True, choices=sorted(SELECT_INPUTS))
    p.add_argument("--source-counts", help="counts CSV from the training period")
    p.add_argument("--target-counts", help="counts CSV from the deployment period")
    p.add_argument("--stability", help="stability CSV (overlap, weighted)")
    p.add_argument("--dtm", help="labeled DTM triplets (chi2)")
    p.add_argument("--vocab", help="vocabulary CSV matching --dtm")
    p.add_argument("--model", help="trained model binary (coefficient, weighted)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="fit a classifier on selected terms")
    p.add_argument("--dtm", required=True, help="labeled DTM triplets")
    p.add_argument("--vocab", required=True, help="vocabulary CSV matching --dtm")
    p.add_argument("--selection", required=True, help="selection sweep JSON")
    p.add_argument("--p", type=int, required=True, help="percentile to train at")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a labeled DTM")
    p.add_argument("--model", required=True)
    p.add_argument("--dtm", required=True)
    p.add_argument("--vocab", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "prevalence", help="estimate per-period positive-user prevalence"
    )
    p.add_argument("--posts", required=True, help="posts to score (may be unlabeled)")
    p.add_argument("--model", required=True)
    p.add_argument("--pre", help="pre period name (default from config)")
    p.add_argument("--during", help="during period name (default from config)")
    p.add_argument("--keywords", help="comma-separated terms for a monthly series")
    p.add_argument("--phrases", help="phrase model JSON to apply while tokenizing")
    p.set_defaults(func=cmd_prevalence)

    p = sub.add_parser(
        "generalization", help="cross-period generalization experiment"
    )
    p.add_argument("--posts", required=True, help="labeled posts")
    p.add_argument("--dataset", default="corpus", help="dataset tag for outputs")
    p.set_defaults(func=cmd_generalization)

    p = sub.add_parser(
        "practical", help="deployment-effects experiment on unlabeled posts"
    )
    p.add_argument("--labeled", required=True, help="labeled training posts")
    p.add_argument("--unlabeled", required=True, help="unlabeled deployment posts")
    p.add_argument("--dataset", default="corpus", help="dataset tag for outputs")
    p.set_defaults(func=cmd_practical)

    p = sub.add_parser("synth", help="generate a synthetic corpus with a manifest")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("selftest", help="audit shipped defaults")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("report", help="render figures from emitted artifacts")
    p.add_argument("--stability", help="stability CSV")
    p.add_argument("--grid", help="generalization grid CSV")
    p.add_argument("--curves", help="practical curves JSON")
    p.add_argument("--series", help="keyword series CSV")
    p.set_defaults(func=cmd_report)

    for child in sub.choices.values():
        _add_global_flags(child, suppress=True)
    return parser


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.deterministic:
        overrides["deterministic"] = True
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    return replace(cfg, **overrides) if overrides else cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary = args.func(args, cfg, out)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, sort_keys=True))
    return 0 if summary.get("ok", True) else 1


if __name__ == "__main__":
    sys.exit(main())
