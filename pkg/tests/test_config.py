"""Flat-text config parsing and the model builder on top of it."""

import pytest

from dfformer.config import (
    coerce,
    load_config,
    model_config_from,
    parse_config_text,
    section,
)
from dfformer.errors import ConfigError


def test_coercion():
    assert coerce("3") == 3 and isinstance(coerce("3"), int)
    assert coerce("0x10") == 16
    assert coerce("2.5") == 2.5
    assert coerce("1e-3") == 0.001
    assert coerce("true") is True
    assert coerce("False") is False
    assert coerce("nano-df") == "nano-df"


def test_parse_basic():
    flat = parse_config_text(
        """
        # a training run
        model.name = nano-df     # trailing comment
        model.input = 32
        train.lr = 4e-3
        train.epochs = 30
        data.noise = 0.1
        """
    )
    assert flat["model.name"] == "nano-df"
    assert flat["model.input"] == 32
    assert flat["train.lr"] == 4e-3
    assert flat["data.noise"] == 0.1
    assert section(flat, "train") == {"lr": 4e-3, "epochs": 30}


def test_parse_errors_carry_source_and_line():
    with pytest.raises(ConfigError) as err:
        parse_config_text("model.name = nano-df\njust words\n", source="run.cfg")
    assert str(err.value).startswith("run.cfg:2:")
    assert "key = value" in str(err.value)

    with pytest.raises(ConfigError) as err:
        parse_config_text("model.input =")
    assert "empty value" in str(err.value)

    with pytest.raises(ConfigError) as err:
        parse_config_text("Model.Input = 3")
    assert "bad key" in str(err.value)

    with pytest.raises(ConfigError) as err:
        parse_config_text("train.lr = 1\ntrain.lr = 2")
    assert "duplicate" in str(err.value)
    assert ":2:" in str(err.value)


def test_unknown_sections_and_keys_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config_text("weird.key = 3")
    assert "unknown section 'weird'" in str(err.value)

    with pytest.raises(ConfigError) as err:
        parse_config_text("model.color = blue")
    assert "unknown key 'color' in section model" in str(err.value)

    with pytest.raises(ConfigError) as err:
        parse_config_text("train.momentum = 0.9")
    assert "unknown key 'momentum'" in str(err.value)

    with pytest.raises(ConfigError) as err:
        parse_config_text("stages[4].depth = 2")
    assert "unknown section" in str(err.value)


def test_load_config_uses_path_in_errors(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("model.name = nano-df\nmodel.input = \n")
    with pytest.raises(ConfigError) as err:
        load_config(str(p))
    assert str(p) in str(err.value)
    p.write_text("model.name = nano-df\n")
    assert load_config(str(p)) == {"model.name": "nano-df"}


def test_model_from_name():
    cfg = model_config_from(parse_config_text(
        "model.name = nano-df\nmodel.input = 64\nmodel.classes = 7\n"
    ))
    assert cfg.name == "nano-df"
    assert cfg.input_size == 64
    assert cfg.num_classes == 7


def test_model_from_family_size():
    cfg = model_config_from(parse_config_text(
        "model.family = gfformer\nmodel.size = s18\n"
    ))
    assert cfg.name == "gfformer-s18"
    assert cfg.input_size == 224


def test_model_requires_identity():
    with pytest.raises(ConfigError) as err:
        model_config_from(parse_config_text("model.input = 32"))
    assert "model.name or model.family" in str(err.value)


def test_model_knob_overrides():
    cfg = model_config_from(parse_config_text(
        """
        model.name = nano-df
        model.n_filters = 2
        model.mlp_ratio = 2
        model.routeing_ratio = 0.5
        model.drop_path = 0.1
        """
    ))
    assert cfg.n_filters == 2
    assert cfg.mlp_ratio == 2
    assert cfg.routeing_ratio == 0.5
    assert cfg.drop_path_rate == 0.1


def test_stage_overrides_keep_geometry():
    cfg = model_config_from(parse_config_text(
        """
        model.name = nano-df
        stages[1].depth = 3
        stages[1].mixer = gf
        """
    ))
    assert cfg.stages[1].depth == 3
    assert cfg.stages[1].mixer == "gf"
    assert cfg.stages[1].width == 32
    # downsampling geometry is fixed by the pyramid, not configurable
    assert (cfg.stages[1].down_kernel, cfg.stages[1].down_stride) == (3, 2)
    assert cfg.stages[0].depth == 1
