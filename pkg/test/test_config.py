#!/usr/bin/env python3
"""
Tests for the run configuration and its config-file format.
"""

import pytest

from msrfnet.config import (
    ABLATION_PRESETS,
    PRESETS,
    RunConfig,
    apply_overrides,
    convert_value,
    format_config,
    load_run_config,
    parse_config_text,
)
from msrfnet.errors import ConfigError

CONFIG_TEXT = """
# a toy run
preset   = toy
ablation = no_deep_supervision   # second layer
epochs   = 300
widths   = 8, 16, 32, 64
augment  = hflip, rot90
shape_stream = no
lr = 5e-4
"""


def test_parse_config_text():
    entries = parse_config_text(CONFIG_TEXT)
    assert list(entries) == ["preset", "ablation", "epochs", "widths", "augment", "shape_stream", "lr"]
    assert entries["ablation"] == "no_deep_supervision"
    assert entries["widths"] == "8, 16, 32, 64"


@pytest.mark.parametrize(
    "text, message",
    [
        ("epochs = 3\nepochs = 4\n", "duplicate key 'epochs'"),
        ("epochs 3\n", "expected 'key = value'"),
        (" = 3\n", "missing key"),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config_text(text, source="run.cfg")


def test_parse_error_names_the_line():
    with pytest.raises(ConfigError, match="run.cfg:3"):
        parse_config_text("a = 1\n\nbroken\n", source="run.cfg")


def test_load_run_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(CONFIG_TEXT)
    cfg = load_run_config(path)
    assert cfg.epochs == 300
    assert cfg.lr == 5e-4
    assert cfg.augment == ("hflip", "rot90")
    assert cfg.net.widths == (8, 16, 32, 64)
    assert cfg.net.shape_stream is False
    assert cfg.net.deep_supervision is False
    assert cfg.net.height == PRESETS["toy"]["height"]


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(CONFIG_TEXT)
    cfg = load_run_config(path, ["epochs=5", "shape_stream = true"])
    assert cfg.epochs == 5
    assert cfg.net.shape_stream is True


def test_defaults():
    cfg = load_run_config()
    assert cfg == RunConfig()
    assert cfg.net.w == 0.4 and cfg.net.n_layers == 6 and cfg.net.dropout == 0.2
    assert cfg.lr == 1e-4 and cfg.batch_size == 16 and cfg.epochs == 200


def test_preset_then_ablation_then_keys():
    cfg = apply_overrides(
        RunConfig(), {"subnet_variant": "subset", "ablation": "no_subnet", "preset": "gradcheck"}
    )
    assert cfg.net.widths == PRESETS["gradcheck"]["widths"]
    assert cfg.net.subnet_variant == "subset"

    cfg = apply_overrides(RunConfig(), {"ablation": "no_subnet", "preset": "toy", "height": "32"})
    assert cfg.net.subnet_variant == "no_subnet"
    assert cfg.net.height == 32


@pytest.mark.parametrize("name", sorted(ABLATION_PRESETS))
def test_every_ablation_validates(name):
    apply_overrides(RunConfig(), {"preset": "gradcheck", "ablation": name}).validate()


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"colour": "red"}, "unknown config key 'colour'"),
        ({"preset": "huge"}, "unknown preset"),
        ({"ablation": "no_brain"}, "unknown ablation"),
        ({"epochs": "many"}, "cannot parse epochs"),
        ({"shape_stream": "maybe"}, "cannot parse shape_stream"),
        ({"widths": "8, x"}, "cannot parse widths"),
    ],
)
def test_override_errors(overrides, message):
    with pytest.raises(ConfigError, match=message):
        apply_overrides(RunConfig(), overrides)


@pytest.mark.parametrize(
    "overrides, message",
    [
        (["epochs=0"], "epochs"),
        (["batch_size=0"], "batch_size"),
        (["lr=-1"], "lr"),
        (["augment=hflip, shear"], "unknown augmentation"),
        (["height=30"], "multiple of 8"),
        (["w=1.5"], r"\[0, 1\]"),
        (["epochs"], "key=value"),
    ],
)
def test_invalid_run_config(overrides, message):
    with pytest.raises(ConfigError, match=message):
        load_run_config(overrides=overrides)


@pytest.mark.parametrize(
    "key, raw, value",
    [
        ("epochs", " 12 ", 12),
        ("lr", "1e-3", 1e-3),
        ("deep_supervision", "False", False),
        ("decoder_attention", "yes", True),
        ("growth", "4,4, 4", (4, 4, 4)),
        ("augment", "", ()),
        ("widths", [1, 2, 3, 4], (1, 2, 3, 4)),
        ("out_dir", "runs/a", "runs/a"),
    ],
)
def test_convert_value(key, raw, value):
    assert convert_value(key, raw) == value


def test_format_round_trip(tmp_path):
    cfg = load_run_config(overrides=["preset=toy", "ablation=dice_only", "augment=vflip", "seed=9"])
    path = tmp_path / "config.txt"
    path.write_text(format_config(cfg))
    assert load_run_config(path) == cfg
    assert "loss_mode = dice_only" in format_config(cfg)
