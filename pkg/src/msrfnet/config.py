"""
Run configuration and the flat `key = value` config file format.

    # comments start with '#'
    preset   = toy          # toy | large | gradcheck, applied first
    ablation = no_subnet    # optional named ablation, applied second
    epochs   = 300
    widths   = 8, 16, 32, 64
    augment  = hflip, rot90

Keys are the field names of RunConfig and MsrfNetConfig in one namespace.
Unknown or duplicate keys and unparsable values are errors.
"""

from dataclasses import dataclass, field, fields, replace
from typing import get_type_hints

from .data import AUGMENT_OPS
from .errors import ConfigError
from .network import MsrfNetConfig

_TUPLE_ITEM_TYPES = {"widths": int, "growth": int, "augment": str}
_TRUE = ("true", "yes", "1")
_FALSE = ("false", "no", "0")

PRESETS = {
    "toy": {
        "height": 64,
        "width": 64,
        "widths": (8, 16, 32, 64),
        "growth": (16, 32, 64),
        "se_reduction": 8,
        "shape_channels": 8,
    },
    "large": {
        "height": 256,
        "width": 256,
        "widths": (32, 64, 128, 256),
        "growth": (16, 32, 64),
        "se_reduction": 8,
        "shape_channels": 8,
        "epochs": 200,
        "batch_size": 16,
        "lr": 1e-4,
    },
    "gradcheck": {
        "height": 16,
        "width": 16,
        "widths": (4, 8, 16, 32),
        "growth": (4, 4, 4),
        "se_reduction": 4,
        "shape_channels": 4,
    },
}

ABLATION_PRESETS = {
    "full": {},
    "no_subnet": {"subnet_variant": "no_subnet"},
    "no_scaling": {"subnet_variant": "no_scaling"},
    "no_cross_23": {"subnet_variant": "no_cross_23"},
    "subset": {"subnet_variant": "subset"},
    "no_deep_supervision": {"deep_supervision": False},
    "no_decoder_attention": {"decoder_attention": False},
    "no_shape_stream": {"shape_stream": False},
    "dice_only": {"loss_mode": "dice_only"},
    "bce_only": {"loss_mode": "bce_only"},
}


@dataclass
class RunConfig:
    net: MsrfNetConfig = field(default_factory=MsrfNetConfig)
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    lr: float = 1e-4
    data_root: str = ""
    synth_n: int = 20
    out_dir: str = "msrf_run"
    checkpoint_every: int = 0
    augment: tuple = ()

    def validate(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.synth_n < 1:
            raise ConfigError(f"synth_n must be >= 1, got {self.synth_n}")
        if self.checkpoint_every < 0:
            raise ConfigError(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")
        unknown = [op for op in self.augment if op not in AUGMENT_OPS]
        if unknown:
            raise ConfigError(f"unknown augmentation(s) {unknown}, expected a subset of {AUGMENT_OPS}")
        self.net.validate()
        return self


def _run_fields():
    return {f.name for f in fields(RunConfig) if f.name != "net"}


def _net_fields():
    return {f.name for f in fields(MsrfNetConfig)}


def _field_type(key):
    hints = get_type_hints(MsrfNetConfig if key in _net_fields() else RunConfig)
    return hints[key]


def convert_value(key, raw):
    """Parse the text `raw` into the type of field `key`."""
    if key not in _run_fields() | _net_fields():
        raise ConfigError(f"unknown config key '{key}'")
    kind = _field_type(key)
    if not isinstance(raw, str):
        return tuple(raw) if kind is tuple else raw
    text = raw.strip()
    try:
        if kind is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if kind is tuple:
            item = _TUPLE_ITEM_TYPES.get(key, str)
            return tuple(item(part.strip()) for part in text.split(",") if part.strip())
        return kind(text)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = '{raw}' as {kind.__name__}") from None


def parse_config_text(text, source="<config>"):
    """Ordered `{key: raw value}` of a config file; rejects malformed and duplicate lines."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        entries[key] = value
    return entries


def apply_overrides(cfg, overrides):
    """
    Return a copy of `cfg` with `overrides` ({key: raw or typed value}) applied.
    `preset` and `ablation` are expanded first, in that order.
    """
    overrides = dict(overrides)
    layered = {}
    preset = overrides.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}', expected one of {sorted(PRESETS)}")
        layered.update(PRESETS[preset])
    ablation = overrides.pop("ablation", None)
    if ablation is not None:
        if ablation not in ABLATION_PRESETS:
            raise ConfigError(
                f"unknown ablation '{ablation}', expected one of {sorted(ABLATION_PRESETS)}"
            )
        layered.update(ABLATION_PRESETS[ablation])
    layered.update(overrides)

    run_changes, net_changes = {}, {}
    for key, raw in layered.items():
        value = convert_value(key, raw)
        (net_changes if key in _net_fields() else run_changes)[key] = value
    return replace(cfg, net=replace(cfg.net, **net_changes), **run_changes)


def load_run_config(path=None, overrides=()):
    """
    RunConfig from an optional config file plus `overrides`, a sequence of
    'key=value' strings that win over the file.
    """
    entries = {}
    if path is not None:
        with open(path, "r") as f:
            entries = parse_config_text(f.read(), source=str(path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        entries[key] = value
    return apply_overrides(RunConfig(), entries).validate()


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


def format_config(cfg):
    """The resolved configuration as config-file text, readable by load_run_config."""
    lines = []
    for f in fields(cfg.net):
        lines.append(f"{f.name} = {_format_value(getattr(cfg.net, f.name))}")
    for name in sorted(_run_fields(), key=[f.name for f in fields(RunConfig)].index):
        lines.append(f"{name} = {_format_value(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"
