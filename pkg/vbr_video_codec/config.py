"""
Settings for the codec, the trainer and the data pipeline.

Defaults live in ``DEFAULT_SETTINGS``. Bundled YAML profiles, a user YAML file and
dotted-key overrides are deep-merged on top of them, in that order, and the result
is validated before any typed settings object is built.
"""

import copy
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

PROFILES = ("default", "desk")

DEFAULT_SETTINGS = {
    "rate": {
        "m": 2.0,
        "n": 64,
        "lambda_min": 0.002,
        "lambda_max": 0.25,
        "q_init_min": 0.5,
        "q_init_max": 2.0,
        "train_quant": "noise",
    },
    "model": {
        "in_channels": 3,
        "channels": [32, 64, 96],
        "mv_channels": 64,
        "ctx_channels": 96,
        "intra_channels": 96,
        "flow_levels": 3,
        "max_displacement": 32.0,
        "use_long_term": True,
        "support": 64,
    },
    "trainer": {
        "seed": 0,
        "batch_size": 4,
        "epochs": None,  # None keeps the per-stage epochs of the schedule
        "max_steps_per_epoch": None,
        "intra_warmup_epochs": 20,
        "mixed_precision": False,
        "distortion_scale": 1.0,
        "device": "auto",
        "ckpt_dir": "ckpt",
        "log_csv": "train_log.csv",
        "stage_overrides": [],
    },
    "data": {
        "crop_size": 256,
        "pad_multiple": 64,
        "synthetic_clips": 256,
        "clip_frames": 7,
        "frame_size": [256, 448],
        "septuplet_root": None,
        "recipes": ["translate", "static", "rectangle"],
    },
}

QUANT_MODES = ("noise", "ste")
SYNTH_RECIPES = ("translate", "static", "rectangle")


@dataclass(frozen=True)
class RateSettings:
    """Rate-control hyperparameters (``rate.*`` keys)."""

    m: float
    n: int
    lambda_min: float
    lambda_max: float
    q_init_min: float
    q_init_max: float
    train_quant: str


@dataclass(frozen=True)
class ModelSettings:
    """Network widths and structural switches (``model.*`` keys)."""

    in_channels: int
    channels: tuple
    mv_channels: int
    ctx_channels: int
    intra_channels: int
    flow_levels: int
    max_displacement: float
    use_long_term: bool
    support: int


@dataclass(frozen=True)
class TrainerSettings:
    """Training loop options (``trainer.*`` keys)."""

    seed: int
    batch_size: int
    epochs: Optional[int]
    max_steps_per_epoch: Optional[int]
    intra_warmup_epochs: int
    mixed_precision: bool
    distortion_scale: float
    device: str
    ckpt_dir: str
    log_csv: str
    stage_overrides: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class DataSettings:
    """Training data options (``data.*`` keys)."""

    crop_size: int
    pad_multiple: int
    synthetic_clips: int
    clip_frames: int
    frame_size: tuple
    septuplet_root: Optional[str]
    recipes: tuple


@dataclass(frozen=True)
class CodecSettings:
    """Complete, validated settings tree."""

    rate: RateSettings
    model: ModelSettings
    trainer: TrainerSettings
    data: DataSettings

    def as_dict(self) -> dict:
        """Return the settings as plain JSON-serializable data."""
        return json.loads(json.dumps(asdict(self)))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form of the settings."""
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def sampler_config(self):
        """Build the rate sampler configuration with scalar gain bounds."""
        from .rate_control import SamplerConfig

        return SamplerConfig(
            m=self.rate.m,
            n=self.rate.n,
            lambda_min=self.rate.lambda_min,
            lambda_max=self.rate.lambda_max,
            q_min=(self.rate.q_init_min,),
            q_max=(self.rate.q_init_max,),
        )


def _deep_merge(base: dict, update: Mapping, path: str = "") -> dict:
    """Merge ``update`` into ``base`` in place, rejecting unknown keys."""
    for key, value in update.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"Unknown setting '{dotted}'.")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigurationError(f"Setting '{dotted}' must be a mapping.")
            _deep_merge(base[key], value, f"{dotted}.")
        else:
            base[key] = value
    return base


def _apply_dotted(settings: dict, overrides: Mapping[str, Any]) -> None:
    """Apply overrides given as ``{"section.key": value}``."""
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        nested = value
        for part in reversed(parts):
            nested = {part: nested}
        _deep_merge(settings, nested)


def read_profile(name: str) -> dict:
    """Read a bundled YAML profile from ``vbr_video_codec/configs``."""
    if name not in PROFILES:
        raise ConfigurationError(f"Unknown profile '{name}'. Available profiles: {list(PROFILES)}")
    text = resources.files("vbr_video_codec").joinpath("configs", f"{name}.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text) or {}


def read_yaml(path) -> dict:
    """Read a user settings file."""
    try:
        with open(Path(path), encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except OSError as e:
        raise ConfigurationError(f"Cannot read settings file '{path}': {e}") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Settings file '{path}' is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Settings file '{path}' must contain a mapping at the top level.")
    return data


def load_settings(path=None, desk: bool = False, overrides: Optional[Mapping[str, Any]] = None) -> CodecSettings:
    """
    Build validated settings.

    Args:
        path: Optional YAML file merged over the defaults.
        desk: Merge the bundled desk profile after the default profile and before the user file.
        overrides: Dotted-key overrides applied last (e.g. ``{"rate.m": 1.0}``).

    Returns:
        CodecSettings: Typed, validated settings.

    Raises:
        ConfigurationError: On unknown keys or invalid values.
    """
    merged = copy.deepcopy(DEFAULT_SETTINGS)
    _deep_merge(merged, read_profile("default"))
    if desk:
        _deep_merge(merged, read_profile("desk"))
    if path is not None:
        _deep_merge(merged, read_yaml(path))
    if overrides:
        _apply_dotted(merged, overrides)
    return settings_from_dict(merged)


def settings_from_dict(data: Mapping) -> CodecSettings:
    """Validate a complete settings dictionary (e.g. from a checkpoint manifest)."""
    merged = _deep_merge(copy.deepcopy(DEFAULT_SETTINGS), data)
    _validate_rate(merged["rate"])
    _validate_model(merged["model"])
    _validate_trainer(merged["trainer"])
    _validate_data(merged["data"], merged["model"])

    model = dict(merged["model"])
    model["channels"] = tuple(int(c) for c in model["channels"])
    trainer = dict(merged["trainer"])
    trainer["stage_overrides"] = tuple(dict(o) for o in trainer["stage_overrides"])
    data_section = dict(merged["data"])
    data_section["frame_size"] = tuple(int(s) for s in data_section["frame_size"])
    data_section["recipes"] = tuple(data_section["recipes"])

    return CodecSettings(
        rate=RateSettings(**merged["rate"]),
        model=ModelSettings(**model),
        trainer=TrainerSettings(**trainer),
        data=DataSettings(**data_section),
    )


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigurationError(f"Setting '{key}' {message}")


def _validate_rate(rate: dict) -> None:
    """Validate ``rate.*`` settings."""
    _require(isinstance(rate["m"], (int, float)) and rate["m"] > 0, "rate.m", "must be a positive number.")
    _require(isinstance(rate["n"], int) and rate["n"] >= 4 and rate["n"] % 4 == 0, "rate.n",
             "must be an integer >= 4 divisible by 4.")
    _require(0 < rate["lambda_min"] < rate["lambda_max"], "rate.lambda_min",
             "must satisfy 0 < lambda_min < lambda_max.")
    _require(0 < rate["q_init_min"] < rate["q_init_max"], "rate.q_init_min",
             "must satisfy 0 < q_init_min < q_init_max.")
    _require(rate["train_quant"] in QUANT_MODES, "rate.train_quant", f"must be one of {list(QUANT_MODES)}.")


def _validate_model(model: dict) -> None:
    """Validate ``model.*`` settings."""
    channels = model["channels"]
    _require(isinstance(channels, (list, tuple)) and len(channels) == 3, "model.channels",
             "must list exactly three widths (full, 1/2 and 1/4 scale).")
    for key in ("in_channels", "mv_channels", "ctx_channels", "intra_channels", "flow_levels", "support"):
        _require(isinstance(model[key], int) and model[key] > 0, f"model.{key}", "must be a positive integer.")
    _require(all(isinstance(c, int) and c > 0 for c in channels), "model.channels", "must be positive integers.")
    _require(model["max_displacement"] > 0, "model.max_displacement", "must be positive.")
    _require(model["support"] <= 2048, "model.support", "must not exceed 2048 (16-bit frequency tables).")


def _validate_trainer(trainer: dict) -> None:
    """Validate ``trainer.*`` settings."""
    _require(isinstance(trainer["batch_size"], int) and trainer["batch_size"] > 0, "trainer.batch_size",
             "must be a positive integer.")
    if trainer["epochs"] is not None:
        _require(isinstance(trainer["epochs"], int) and trainer["epochs"] > 0, "trainer.epochs",
                 "must be a positive integer or null.")
    if trainer["max_steps_per_epoch"] is not None:
        _require(isinstance(trainer["max_steps_per_epoch"], int) and trainer["max_steps_per_epoch"] > 0,
                 "trainer.max_steps_per_epoch", "must be a positive integer or null.")
    _require(isinstance(trainer["intra_warmup_epochs"], int) and trainer["intra_warmup_epochs"] >= 0,
             "trainer.intra_warmup_epochs", "must be a non-negative integer.")
    _require(trainer["distortion_scale"] > 0, "trainer.distortion_scale", "must be positive.")
    _require(trainer["device"] in ("auto", "cpu", "cuda", "mps"), "trainer.device",
             "must be one of auto, cpu, cuda, mps.")
    for override in trainer["stage_overrides"]:
        _require(isinstance(override, Mapping) and "id" in override, "trainer.stage_overrides",
                 "entries must be mappings with an 'id'.")
        unknown = set(override) - {"id", "lr", "epochs", "frames"}
        _require(not unknown, "trainer.stage_overrides", f"has unknown fields {sorted(unknown)}.")


def _validate_data(data: dict, model: dict) -> None:
    """Validate ``data.*`` settings."""
    _require(isinstance(data["pad_multiple"], int) and data["pad_multiple"] % 16 == 0, "data.pad_multiple",
             "must be a multiple of 16.")
    _require(isinstance(data["crop_size"], int) and data["crop_size"] > 0 and data["crop_size"] % 16 == 0,
             "data.crop_size", "must be a positive multiple of 16.")
    _require(isinstance(data["clip_frames"], int) and data["clip_frames"] >= 2, "data.clip_frames",
             "must be at least 2.")
    _require(len(data["frame_size"]) == 2 and min(data["frame_size"]) >= data["crop_size"], "data.frame_size",
             "must be [height, width] no smaller than data.crop_size.")
    _require(all(r in SYNTH_RECIPES for r in data["recipes"]), "data.recipes",
             f"entries must be among {list(SYNTH_RECIPES)}.")
    _require(isinstance(data["synthetic_clips"], int) and data["synthetic_clips"] >= 0, "data.synthetic_clips",
             "must be a non-negative integer.")
    if data["synthetic_clips"] == 0 and not data["septuplet_root"]:
        logger.warning("No synthetic clips and no septuplet root configured; training data will be empty.")
