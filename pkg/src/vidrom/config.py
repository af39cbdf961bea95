"""Pipeline configuration: a flat ``key = value`` text format.

One setting per line, ``#`` starts a comment line, blank lines are ignored.
Unknown keys are rejected so typos fail loudly instead of silently using a
default.  Values keep their literal text form in the provenance snapshot; the
typed accessors live on the dataclass.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_str_list(text: str) -> tuple:
    items = tuple(part.strip() for part in text.split(",") if part.strip())
    return items


def _parse_float_list(text: str) -> tuple:
    return tuple(float(part) for part in text.split(",") if part.strip())


@dataclass
class PipelineConfig:
    """All tunables for the track / fit / predict / backbone commands."""

    # input media: a frame directory or raw container, template box in frame 0
    frames: str = ""
    fps: float = None
    template_x0: int = 0
    template_y0: int = 0
    template_width: int = 0
    template_height: int = 0

    # template search
    search_scale: float = 2.0
    theta_init: float = 0.0
    theta_min: float = -15.0
    theta_max: float = 15.0
    theta_interval: float = 5.0
    score_thresh: float = 0.5
    iou_thresh: float = 0.3
    n_match: int = 1
    d_thresh: float = None
    background_removal: bool = False

    # observable assembly and delay embedding
    embed_channels: tuple = ("x", "y")
    channel_scale: tuple = ()  # per-channel multipliers; empty means all 1.0
    embed_copies: int = 5
    embed_lag: int = 1
    skip_samples: int = 0
    fixed_point_policy: str = "tail_mean"  # or "supplied"
    fixed_point_value: tuple = ()
    tail_window: int = 100

    # model orders
    manifold_dim: int = 2
    manifold_order: int = 3
    dynamics_order: int = 3
    normalform_order: int = None  # defaults to dynamics_order
    resonance_tol: float = 0.1
    roundtrip_tol: float = 1e-6
    manifold_error_bound: float = 0.03

    # training and evaluation series (track CSVs)
    train_csv: tuple = ()
    test_csv: str = ""

    # prediction horizon
    duration: float = None
    dt: float = None
    substeps: int = 1

    # backbone sampling
    rho_max: float = None
    backbone_samples: int = 200
    amplitude_channel: int = 0

    out_dir: str = "out"


_LIST_PARSERS = {
    "embed_channels": _parse_str_list,
    "train_csv": _parse_str_list,
    "channel_scale": _parse_float_list,
    "fixed_point_value": _parse_float_list,
}


def _parser_for(field) -> callable:
    if field.name in _LIST_PARSERS:
        return _LIST_PARSERS[field.name]
    if field.type == "bool":
        return _parse_bool
    if field.type == "int":
        return int
    if field.type == "float":
        return float
    return str


_PARSERS = {f.name: _parser_for(f) for f in fields(PipelineConfig)}


def parse_config(text: str) -> "tuple[PipelineConfig, dict]":
    """Parse config text; returns the config and the raw key/value snapshot."""
    values = {}
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
        raw[key] = value
    config = PipelineConfig(**values)
    _validate(config)
    return config, raw


def _validate(config: PipelineConfig) -> None:
    if config.fixed_point_policy not in ("tail_mean", "supplied"):
        raise ConfigError(
            "fixed_point_policy must be 'tail_mean' or 'supplied', "
            f"got {config.fixed_point_policy!r}"
        )
    if config.fixed_point_policy == "supplied" and not config.fixed_point_value:
        raise ConfigError("fixed_point_policy = supplied requires fixed_point_value")
    if config.channel_scale and len(config.channel_scale) != len(config.embed_channels):
        raise ConfigError(
            f"channel_scale has {len(config.channel_scale)} entries for "
            f"{len(config.embed_channels)} channels"
        )
    for name in config.embed_channels:
        if name not in ("x", "y", "theta"):
            raise ConfigError(f"unknown embed channel {name!r}")
    if config.embed_copies < 1:
        raise ConfigError("embed_copies must be at least 1")
    if config.embed_lag < 1:
        raise ConfigError("embed_lag must be at least 1")
    if config.skip_samples < 0:
        raise ConfigError("skip_samples must not be negative")
    if config.tail_window < 1:
        raise ConfigError("tail_window must be at least 1")
    if config.manifold_dim < 1:
        raise ConfigError("manifold_dim must be at least 1")
    if config.manifold_order < 1:
        raise ConfigError("manifold_order must be at least 1")
    if config.dynamics_order < 1:
        raise ConfigError("dynamics_order must be at least 1")
    if config.substeps < 1:
        raise ConfigError("substeps must be at least 1")


def load_config(path) -> "tuple[PipelineConfig, dict]":
    from pathlib import Path

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def config_snapshot(config: PipelineConfig) -> dict:
    """Full typed settings as a JSON-ready dict (tuples become lists)."""
    out = {}
    for key, value in asdict(config).items():
        out[key] = list(value) if isinstance(value, tuple) else value
    return out
