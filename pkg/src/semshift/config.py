"""Structured run configuration with fail-closed YAML parsing.

Every pipeline stage reads its parameters from one ``RunConfig``.
Unknown keys anywhere in the file are rejected rather than ignored, so a
typo cannot silently fall back to a default. ``audit_defaults`` asserts
that the shipped defaults are the documented ones; the ``selftest`` CLI
subcommand runs it.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .corpus.posts import DEFAULT_SCHEMA
from .corpus.slicing import Period
from .embed.cbow import CbowParams
from .model import C_GRID, DEFAULT_FOLDS
from .select import FREQUENCY_FLOOR, PERCENTILES
from .shift import DEFAULT_CF_NB, DEFAULT_CF_SHIFT, DEFAULT_K


@dataclass(frozen=True)
class CorpusConfig:
    min_count: int = 5
    max_vocab: int | None = None
    min_posts: int = 1
    schema: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_SCHEMA))

    def __post_init__(self) -> None:
        bad = sorted(set(self.schema) - set(DEFAULT_SCHEMA))
        if bad:
            raise ValueError(f"corpus.schema: unknown post fields {bad}")


@dataclass(frozen=True)
class PhraseConfig:
    min_count: int = 5
    threshold: float = 10.0
    passes: int = 2


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 20
    lr: float = 0.025
    lr_min: float = 0.0001
    subsample: float = 0.0

    def params(self, seed: int, workers: int = 1) -> CbowParams:
        return CbowParams(
            dim=self.dim,
            window=self.window,
            negatives=self.negatives,
            epochs=self.epochs,
            lr=self.lr,
            lr_min=self.lr_min,
            subsample=self.subsample,
            seed=seed,
            workers=workers,
        )


@dataclass(frozen=True)
class ShiftConfig:
    k: int = DEFAULT_K
    cf_nb: int = DEFAULT_CF_NB
    cf_shift: int = DEFAULT_CF_SHIFT
    metric: str = "cosine"


@dataclass(frozen=True)
class SelectConfig:
    frequency_floor: int = FREQUENCY_FLOOR
    percentiles: tuple[int, ...] = PERCENTILES


@dataclass(frozen=True)
class ModelConfig:
    folds: int = DEFAULT_FOLDS
    c_grid: tuple[float, ...] = C_GRID


@dataclass(frozen=True)
class MonitorConfig:
    min_posts: int = 200


@dataclass(frozen=True)
class HarnessConfig:
    outer_repeats: int = 10
    inner_repeats: int = 3
    full_scale: bool = False
    min_posts: int = 200
    train_windows: tuple[str, ...] = ()
    test_windows: tuple[str, ...] = ()
    pre_period: str = "pre"
    during_period: str = "during"
    post_sample_fraction: float = 0.2
    train_fraction: float = 0.8


@dataclass(frozen=True)
class SynthConfig:
    vocab_size: int = 10_000
    n_topics: int = 20
    users_per_class: int = 100
    posts_per_user: int = 80
    post_length: int = 75
    topics_per_doc: int = 2
    shift_fraction: float = 0.05
    signal_count: int = 200
    signal_boost: float = 3.0
    overlap: float = 0.0
    drift_boost: float = 1.0


@dataclass(frozen=True)
class PeriodConfig:
    name: str
    start: str
    end: str

    def to_period(self) -> Period:
        return Period.from_dates(self.name, self.start, self.end)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    deterministic: bool = False
    output_dir: str = "."
    periods: tuple[PeriodConfig, ...] = ()
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    phrases: PhraseConfig = field(default_factory=PhraseConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    shift: ShiftConfig = field(default_factory=ShiftConfig)
    select: SelectConfig = field(default_factory=SelectConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def period(self, name: str) -> Period:
        for p in self.periods:
            if p.name == name:
                return p.to_period()
        raise KeyError(f"period {name!r} not defined in config")


_TUPLE_FIELDS = {"percentiles", "c_grid", "train_windows", "test_windows", "periods"}


def _build(cls, mapping: Mapping[str, Any], path: str):
    """Construct a config dataclass, rejecting keys it does not declare."""
    if not isinstance(mapping, Mapping):
        raise ValueError(f"{path}: expected a mapping, got {type(mapping).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(mapping) - set(known))
    if unknown:
        raise ValueError(f"{path}: unknown keys {unknown}")
    kwargs: dict[str, Any] = {}
    for name, value in mapping.items():
        spot = f"{path}.{name}" if path else name
        kwargs[name] = _coerce(cls, name, value, spot)
    return cls(**kwargs)


def _coerce(cls, name: str, value: Any, path: str) -> Any:
    if name == "periods":
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"{path}: expected a list of periods")
        return tuple(_build(PeriodConfig, item, f"{path}[{i}]") for i, item in enumerate(value))
    section_types = {
        "corpus": CorpusConfig,
        "phrases": PhraseConfig,
        "embed": EmbedConfig,
        "shift": ShiftConfig,
        "select": SelectConfig,
        "model": ModelConfig,
        "monitor": MonitorConfig,
        "harness": HarnessConfig,
        "synth": SynthConfig,
    }
    if name in section_types:
        return _build(section_types[name], value or {}, path)
    if name in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"{path}: expected a list")
        return tuple(value)
    return value


def parse_config(mapping: Mapping[str, Any] | None) -> RunConfig:
    return _build(RunConfig, mapping or {}, "")


def load_config(path: str | Path) -> RunConfig:
    with open(path, encoding="utf-8") as handle:
        raw = yaml.safe_load(handle)
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise ValueError(f"{path}: config root must be a mapping")
    return parse_config(raw)


def _plain(value: Any) -> Any:
    if is_dataclass(value) and not isinstance(value, type):
        return {k: _plain(v) for k, v in asdict(value).items()}
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def to_mapping(config: RunConfig) -> dict:
    return _plain(config)


def save_config(config: RunConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(to_mapping(config), handle, sort_keys=True)


EXPECTED_DEFAULTS = {
    "shift.k": 500,
    "shift.cf_nb": 50,
    "shift.cf_shift": 50,
    "embed.dim": 100,
    "embed.epochs": 20,
    "phrases.threshold": 10.0,
    "phrases.min_count": 5,
    "corpus.min_count": 5,
    "model.folds": 10,
    "select.frequency_floor": 50,
    "select.percentiles": (10, 20, 30, 40, 50, 60, 70, 80, 90, 100),
    "model.c_grid": (0.01, 0.1, 1.0, 10.0, 100.0),
}


def audit_defaults(config: RunConfig | None = None) -> dict[str, bool]:
    """Compare each documented default against the (default) config.

    Returns {dotted-name: matches}; any False entry means the shipped
    defaults drifted from the documented parameter block.
    """
    config = config if config is not None else RunConfig()
    results = {}
    for dotted, expected in EXPECTED_DEFAULTS.items():
        section, name = dotted.split(".")
        actual = getattr(getattr(config, section), name)
        results[dotted] = actual == expected
    return results
