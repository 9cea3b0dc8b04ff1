"""Run configuration: a flat ``key = value`` text format with typed parsing.

Unknown keys are rejected so typos fail loudly.  ``to_text`` emits a
canonical serialization (stable key order, stable number formatting) that
is embedded verbatim in checkpoints, making artifacts self-describing.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError
from .losses import LossWeights
from .network import NetworkConfig
from .stokes import DEFAULT_PATTERN, validate_pattern


@dataclass
class RunConfig:
    seed: int = 0
    batch_size: int = 4
    epochs: int = 335
    lr: float = 1e-4
    crop_size: int = 128
    val_count: int = 50
    data_root: str = "data"
    out_dir: str = "runs"
    pattern: tuple = DEFAULT_PATTERN
    loss: LossWeights = field(default_factory=LossWeights)
    network: NetworkConfig = field(default_factory=NetworkConfig)

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not (np.isfinite(self.lr) and self.lr > 0):
            raise ConfigError("lr must be finite and > 0")
        if self.crop_size < 16:
            raise ConfigError("crop_size must be >= 16")
        if self.val_count < 0:
            raise ConfigError("val_count must be >= 0")
        validate_pattern(self.pattern)


def format_pattern(pattern):
    return ";".join(",".join(str(a) for a in row) for row in pattern)


def parse_pattern(text):
    try:
        rows = [
            tuple(int(cell) for cell in row.split(","))
            for row in text.split(";")
        ]
    except ValueError:
        raise ConfigError("pattern must look like '90,45;135,0'") from None
    pattern = tuple(rows)
    try:
        validate_pattern(pattern)
    except Exception as exc:
        raise ConfigError("bad pattern %r: %s" % (text, exc)) from None
    return pattern


def _parse_bool(raw, key):
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ConfigError("%s must be 'true' or 'false', got %r" % (key, raw))


def _parse_num(kind, raw, key):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError("%s expects %s, got %r" % (key, kind.__name__, raw)) from None


# key -> (section, attribute, parser); sections group dotted keys onto the
# nested dataclasses.
_SCHEMA = {
    "seed": (None, "seed", lambda r, k: _parse_num(int, r, k)),
    "batch_size": (None, "batch_size", lambda r, k: _parse_num(int, r, k)),
    "epochs": (None, "epochs", lambda r, k: _parse_num(int, r, k)),
    "lr": (None, "lr", lambda r, k: _parse_num(float, r, k)),
    "crop_size": (None, "crop_size", lambda r, k: _parse_num(int, r, k)),
    "val_count": (None, "val_count", lambda r, k: _parse_num(int, r, k)),
    "data_root": (None, "data_root", lambda r, k: r),
    "out_dir": (None, "out_dir", lambda r, k: r),
    "pattern": (None, "pattern", lambda r, k: parse_pattern(r)),
    "loss.ssim": ("loss", "ssim", lambda r, k: _parse_num(float, r, k)),
    "loss.l1": ("loss", "l1", lambda r, k: _parse_num(float, r, k)),
    "loss.con": ("loss", "con", lambda r, k: _parse_num(float, r, k)),
    "loss.tex": ("loss", "tex", lambda r, k: _parse_num(float, r, k)),
    "loss.reg": ("loss", "reg", lambda r, k: _parse_num(float, r, k)),
    "network.base_channels": ("network", "base_channels", lambda r, k: _parse_num(int, r, k)),
    "network.window": ("network", "window", lambda r, k: _parse_num(int, r, k)),
    "network.heads": ("network", "heads", lambda r, k: _parse_num(int, r, k)),
    "network.cbam_reduction": ("network", "cbam_reduction", lambda r, k: _parse_num(int, r, k)),
    "network.use_texture_block": ("network", "use_texture_block", _parse_bool),
    "network.use_cbam": ("network", "use_cbam", _parse_bool),
    "network.use_brightness_branch": ("network", "use_brightness_branch", _parse_bool),
    "network.use_bright_enhance": ("network", "use_bright_enhance", _parse_bool),
}


def parse_config(text):
    """Parse flat ``key = value`` text (# comments, blank lines allowed)."""
    top = {}
    loss_kw = {}
    net_kw = {}
    seen = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value', got %r" % (lineno, raw_line))
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA:
            raise ConfigError("line %d: unknown key %r" % (lineno, key))
        if key in seen:
            raise ConfigError("line %d: duplicate key %r" % (lineno, key))
        seen.add(key)
        section, attr, parser = _SCHEMA[key]
        value = parser(raw, key)
        if section is None:
            top[attr] = value
        elif section == "loss":
            loss_kw[attr] = value
        else:
            net_kw[attr] = value
    try:
        return RunConfig(
            loss=LossWeights(**loss_kw), network=NetworkConfig(**net_kw), **top
        )
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_text(cfg):
    """Canonical serialization; ``parse_config(to_text(c))`` round-trips."""
    lines = []
    for key, (section, attr, _) in _SCHEMA.items():
        if section is None:
            value = getattr(cfg, attr)
            if attr == "pattern":
                value = format_pattern(value)
        else:
            value = getattr(getattr(cfg, section), attr)
        lines.append("%s = %s" % (key, _format_value(value)))
    return "\n".join(lines) + "\n"


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from None
    return parse_config(text)
