"""Render figures from emitted artifacts.

Pipeline stages emit delimited files and JSON bundles; this module turns
those artifacts into PNG figures. It never recomputes results, so a
figure can be regenerated from saved outputs alone.
"""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_stability_histogram(
    table_csv: str | Path, out_png: str | Path, bins: int = 50
) -> Path:
    """Histogram of neighborhood-overlap scores from a stability CSV."""
    scores = []
    with open(table_csv, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or "S" not in reader.fieldnames:
            raise ValueError(f"{table_csv}: expected a stability CSV with an S column")
        for row in reader:
            scores.append(float(row["S"]))
    if not scores:
        raise ValueError(f"{table_csv}: no rows to plot")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.hist(scores, bins=bins, range=(0.0, 1.0), color="#4878a8", edgecolor="white")
    ax.set_xlabel("neighborhood overlap S")
    ax.set_ylabel("terms")
    ax.set_title(f"Stability distribution ({len(scores)} terms)")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def render_generalization_curves(grid_csv: str | Path, out_png: str | Path) -> Path:
    """Mean test F1 against vocabulary percentile, one panel per test window."""
    rows = []
    with open(grid_csv, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        needed = {"test_window", "method", "p", "mean_f1", "std_f1"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise ValueError(f"{grid_csv}: expected a generalization grid CSV")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{grid_csv}: no rows to plot")
    windows = sorted({r["test_window"] for r in rows})
    methods = sorted({r["method"] for r in rows})
    fig, axes = plt.subplots(
        1, len(windows), figsize=(5.5 * len(windows), 4.5), squeeze=False, sharey=True
    )
    for ax, window in zip(axes[0], windows):
        for method in methods:
            points = sorted(
                (int(r["p"]), float(r["mean_f1"]), float(r["std_f1"]))
                for r in rows
                if r["test_window"] == window and r["method"] == method
            )
            if not points:
                continue
            ps, means, stds = zip(*points)
            ax.errorbar(ps, means, yerr=stds, marker="o", capsize=2, label=method)
        ax.set_title(f"test window: {window}")
        ax.set_xlabel("vocabulary percentile p")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("mean test F1")
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def render_practical_curves(
    curves_json: str | Path, f1_png: str | Path, change_png: str | Path
) -> list[Path]:
    """Within-span F1 and prevalence-change curves from a practical-run bundle."""
    with open(curves_json, encoding="utf-8") as handle:
        payload = json.load(handle)
    curves = payload.get("curves")
    if not curves:
        raise ValueError(f"{curves_json}: no curves in bundle")
    specs = [
        ("f1_within_mean", "f1_within_std", "within-span F1", f1_png),
        ("change_pp_mean", "change_pp_std", "prevalence change (pp)", change_png),
    ]
    written = []
    for mean_key, std_key, ylabel, out_png in specs:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for method in sorted(curves):
            points = sorted((pt["p"], pt[mean_key], pt[std_key]) for pt in curves[method])
            if not points:
                continue
            ps, means, stds = zip(*points)
            ax.errorbar(ps, means, yerr=stds, marker="o", capsize=2, label=method)
        if ylabel.startswith("prevalence"):
            ax.axhline(0.0, color="gray", linewidth=0.8)
        ax.set_xlabel("vocabulary percentile p")
        ax.set_ylabel(ylabel)
        ax.set_title(payload.get("dataset", ""))
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out_png, dpi=120)
        plt.close(fig)
        written.append(Path(out_png))
    return written


def render_keyword_series(series_csv: str | Path, out_png: str | Path) -> Path:
    """Monthly usage proportions per term; empty months appear as gaps."""
    by_term: dict[str, list[tuple[str, float]]] = defaultdict(list)
    with open(series_csv, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        needed = {"term", "bucket", "proportion"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise ValueError(f"{series_csv}: expected a keyword series CSV")
        for row in reader:
            value = float(row["proportion"]) if row["proportion"] != "" else math.nan
            by_term[row["term"]].append((row["bucket"], value))
    if not by_term:
        raise ValueError(f"{series_csv}: no rows to plot")
    buckets = sorted({b for points in by_term.values() for b, _ in points})
    index = {b: i for i, b in enumerate(buckets)}
    fig, ax = plt.subplots(figsize=(max(7, 0.6 * len(buckets)), 4.5))
    for term in sorted(by_term):
        xs = [index[b] for b, _ in sorted(by_term[term])]
        ys = [v for _, v in sorted(by_term[term])]
        ax.plot(xs, ys, marker="o", label=term)
    ax.set_xticks(range(len(buckets)))
    ax.set_xticklabels(buckets, rotation=45, ha="right")
    ax.set_ylabel("share of posts using term")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)
