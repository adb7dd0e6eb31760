import pytest

from txai_bench.config import (
    ConfigError,
    config_digest,
    default_grid_mapping,
    derive_seed,
    experiment_from_mapping,
    format_config,
    multi_target_mapping,
    parse_config_text,
)
from txai_bench.data import SyntheticSpec
from txai_bench.trojan import CheckerPattern, RandomLocation, ShapePattern


def test_parse_basics_comments_blanks():
    text = """
    # a comment
    seed = 7
    out.dir = runs/x   # trailing comment
    eval.methods = bp, occ
    """
    flat = parse_config_text(text)
    assert flat == {"seed": "7", "out.dir": "runs/x", "eval.methods": "bp, occ"}


@pytest.mark.parametrize("bad,match", [
    ("novalue\n", "expected 'key = value'"),
    ("= 3\n", "empty key"),
    ("a = 1\na = 2\n", "duplicate key"),
])
def test_parse_errors_name_line(bad, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(bad)


def test_format_round_trip():
    flat = {"seed": "3", "scenario.s.entry.0.target": "1"}
    assert parse_config_text(format_config(flat)) == flat


def test_digest_ignores_comments_and_spacing():
    a = "seed = 1\nout.dir = x\n"
    b = "# hi\nseed =    1\n\nout.dir = x   # note\n"
    assert config_digest(a) == config_digest(b)
    assert config_digest(a) != config_digest("seed = 2\nout.dir = x\n")


def test_derive_seed_stable_and_distinct():
    assert derive_seed(0, "train") == derive_seed(0, "train")
    assert derive_seed(0, "train") != derive_seed(1, "train")
    assert derive_seed(0, "train") != derive_seed(0, "poison", "s")


def test_default_grid_assembles():
    cfg = experiment_from_mapping(default_grid_mapping(eval_samples=10))
    assert len(cfg.scenarios) == 6
    assert {s.scenario_id for s in cfg.scenarios} == {
        "corner4", "corner6", "corner8", "random4", "random6", "random8"}
    assert cfg.methods == ("bp", "gbp", "gcam", "ggcam", "occ", "fa", "lime")
    corner6 = next(s for s in cfg.scenarios if s.scenario_id == "corner6")
    assert corner6.location_label == "corner"
    assert corner6.pattern_label == "solid"
    assert corner6.size_label == 6
    assert corner6.target_mode == "single"
    random4 = next(s for s in cfg.scenarios if s.scenario_id == "random4")
    assert isinstance(random4.poison.entries[0].trigger.location, RandomLocation)
    assert isinstance(cfg.dataset, SyntheticSpec)


def test_multi_target_mapping_assembles():
    cfg = experiment_from_mapping(multi_target_mapping(k=3, eval_samples=5))
    (scenario,) = cfg.scenarios
    assert scenario.target_mode == "multi"
    assert len(scenario.poison.entries) == 3
    kinds = [type(e.trigger.pattern) for e in scenario.poison.entries]
    assert CheckerPattern in kinds and ShapePattern in kinds
    targets = [e.target_label for e in scenario.poison.entries]
    assert len(set(targets)) == 3


def test_seed_changes_derived_streams():
    a = experiment_from_mapping(default_grid_mapping(seed=0))
    b = experiment_from_mapping(default_grid_mapping(seed=1))
    assert a.train.seed != b.train.seed
    assert a.scenarios[0].poison.seed != b.scenarios[0].poison.seed


@pytest.mark.parametrize("overrides,match", [
    ({"eval.samples": "0"}, "eval.samples"),
    ({"eval.methods": "bp,zorp"}, "unknown method"),
    ({"arch.id": "resnet"}, "unknown architecture"),
    ({"dataset.source": "imagenet"}, "dataset.source"),
])
def test_validation_errors(overrides, match):
    flat = default_grid_mapping()
    flat.update(overrides)
    with pytest.raises(ConfigError, match=match):
        experiment_from_mapping(flat)


def test_missing_scenario_entries_rejected():
    flat = {"scenario.x.fraction": "0.1"}
    with pytest.raises(ConfigError, match="no entries"):
        experiment_from_mapping(flat)


def test_idx_source_requires_existing_files(tmp_path):
    flat = default_grid_mapping()
    flat["dataset.source"] = "idx"
    flat["dataset.train_images"] = "nope.idx"
    flat["dataset.train_labels"] = "nope.idx"
    flat["dataset.test_images"] = "nope.idx"
    flat["dataset.test_labels"] = "nope.idx"
    with pytest.raises(ConfigError, match="no such file"):
        experiment_from_mapping(flat, base_dir=str(tmp_path))


def test_fixed_location_and_alpha_parse():
    flat = default_grid_mapping()
    flat["scenario.fix.fraction"] = "0.1"
    flat["scenario.fix.entry.0.pattern"] = "circle"
    flat["scenario.fix.entry.0.size"] = "5"
    flat["scenario.fix.entry.0.location"] = "3,4"
    flat["scenario.fix.entry.0.alpha"] = "0.5"
    flat["scenario.fix.entry.0.target"] = "2"
    cfg = experiment_from_mapping(flat)
    fix = next(s for s in cfg.scenarios if s.scenario_id == "fix")
    trig = fix.poison.entries[0].trigger
    assert trig.alpha == 0.5
    assert trig.location.row == 3 and trig.location.col == 4
    assert fix.location_label == "3,4"
    assert fix.pattern_label == "circle"
