"""Configuration parsing, round-trip fidelity, and defaults audit."""
import pytest
import yaml

from semshift.config import (
    EXPECTED_DEFAULTS,
    RunConfig,
    audit_defaults,
    load_config,
    parse_config,
    save_config,
    to_mapping,
)


def test_empty_mapping_gives_defaults():
    cfg = parse_config({})
    assert cfg.seed == 0
    assert cfg.workers == 1
    assert cfg.deterministic is False
    assert cfg.shift.k == 500
    assert cfg.embed.dim == 100


def test_documented_defaults():
    cfg = RunConfig()
    assert cfg.shift.k == 500
    assert cfg.shift.cf_nb == 50
    assert cfg.shift.cf_shift == 50
    assert cfg.embed.dim == 100
    assert cfg.embed.epochs == 20
    assert cfg.embed.window == 5
    assert cfg.embed.negatives == 5
    assert cfg.phrases.threshold == 10.0
    assert cfg.phrases.min_count == 5
    assert cfg.corpus.min_count == 5
    assert cfg.model.folds == 10
    assert cfg.model.c_grid == (0.01, 0.1, 1.0, 10.0, 100.0)
    assert cfg.select.frequency_floor == 50
    assert cfg.select.percentiles == tuple(range(10, 101, 10))
    assert cfg.monitor.min_posts == 200
    assert cfg.harness.outer_repeats == 10
    assert cfg.harness.inner_repeats == 3


def test_audit_defaults_all_pass():
    checks = audit_defaults()
    assert set(checks) == set(EXPECTED_DEFAULTS)
    assert all(checks.values())


def test_audit_flags_drifted_value():
    cfg = parse_config({"shift": {"k": 400}})
    checks = audit_defaults(cfg)
    assert checks["shift.k"] is False
    assert checks["shift.cf_nb"] is True


def test_unknown_top_level_key_rejected():
    with pytest.raises(ValueError, match="unknown keys.*sede"):
        parse_config({"sede": 3})


def test_unknown_nested_key_rejected_with_path():
    with pytest.raises(ValueError, match="embed.*unknown keys.*dims"):
        parse_config({"embed": {"dims": 50}})


def test_unknown_period_key_rejected():
    bad = {"periods": [{"name": "a", "start": "2020-01-01", "stop": "2020-02-01"}]}
    with pytest.raises(ValueError, match=r"periods\[0\].*stop"):
        parse_config(bad)


def test_unknown_schema_field_rejected():
    with pytest.raises(ValueError, match="schema.*author"):
        parse_config({"corpus": {"schema": {"author": "by"}}})


def test_section_must_be_mapping():
    with pytest.raises(ValueError, match="expected a mapping"):
        parse_config({"shift": [1, 2]})


def test_periods_parse_and_lookup():
    cfg = parse_config(
        {
            "periods": [
                {"name": "p1", "start": "2020-01-01", "end": "2020-07-01"},
                {"name": "p2", "start": "2020-07-01", "end": "2021-01-01"},
            ]
        }
    )
    p1 = cfg.period("p1")
    assert p1.name == "p1"
    assert p1.start == 1577836800.0
    assert p1.end < cfg.period("p2").start + 1
    with pytest.raises(KeyError):
        cfg.period("p9")


def test_tuple_fields_parse_from_lists():
    cfg = parse_config(
        {"select": {"percentiles": [25, 50, 100]}, "model": {"c_grid": [0.5, 2.0]}}
    )
    assert cfg.select.percentiles == (25, 50, 100)
    assert cfg.model.c_grid == (0.5, 2.0)


def test_yaml_round_trip_is_semantically_identical(tmp_path):
    cfg = parse_config(
        {
            "seed": 11,
            "workers": 2,
            "deterministic": True,
            "output_dir": "run1",
            "periods": [{"name": "a", "start": "2019-01-01", "end": "2019-06-01"}],
            "embed": {"dim": 32, "epochs": 5},
            "shift": {"k": 50},
            "select": {"percentiles": [50, 100]},
            "harness": {"train_windows": ["a"], "full_scale": True},
            "synth": {"vocab_size": 500, "overlap": 0.25},
        }
    )
    path = tmp_path / "cfg.yaml"
    save_config(cfg, path)
    again = load_config(path)
    assert again == cfg
    assert to_mapping(again) == to_mapping(cfg)


def test_load_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config(path) == RunConfig()


def test_load_rejects_non_mapping_root(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError, match="root must be a mapping"):
        load_config(path)


def test_saved_yaml_is_plain_types(tmp_path):
    path = tmp_path / "cfg.yaml"
    save_config(RunConfig(), path)
    raw = yaml.safe_load(path.read_text())
    assert isinstance(raw, dict)
    assert raw["shift"]["k"] == 500
    assert raw["select"]["percentiles"] == list(range(10, 101, 10))


def test_embed_params_carry_seed_and_workers():
    cfg = parse_config({"embed": {"dim": 24}})
    params = cfg.embed.params(seed=9, workers=3)
    assert params.dim == 24
    assert params.seed == 9
    assert params.workers == 3
