"""
Checkpoint layout: ``<root>/stage{NN}/params.bin`` and ``manifest.json``; the intra
warm-up writes ``<root>/intra/``. Manifests hold no timestamps, so reruns with the
same seed and settings produce identical files.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Tuple

import torch

from ..config import CodecSettings, settings_from_dict
from ..constants import MODEL_VERSION
from ..exceptions import CheckpointError

logger = logging.getLogger(__name__)

PARAMS_FILE = "params.bin"
MANIFEST_FILE = "manifest.json"
INTRA_DIR = "intra"


def stage_dir(root, stage_id: int) -> Path:
    return Path(root) / f"stage{stage_id:02d}"


def intra_dir(root) -> Path:
    return Path(root) / INTRA_DIR


def save_checkpoint(model: torch.nn.Module, directory, manifest: dict) -> Path:
    """
    Write parameters and manifest into ``directory``.

    Raises:
        CheckpointError: If the files cannot be written.
    """
    directory = Path(directory)
    manifest = {**manifest, "model_version": MODEL_VERSION}
    try:
        directory.mkdir(parents=True, exist_ok=True)
        state = {k: v.detach().cpu() for k, v in model.state_dict().items()}
        torch.save(state, directory / PARAMS_FILE)
        with open(directory / MANIFEST_FILE, "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint to '{directory}': {e}") from e
    logger.info(f"Checkpoint written to {directory}")
    return directory


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST_FILE
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as e:
        raise CheckpointError(f"Cannot read manifest '{path}': {e}") from e
    except json.JSONDecodeError as e:
        raise CheckpointError(f"Manifest '{path}' is not valid JSON: {e}") from e


def load_state(directory, map_location="cpu") -> dict:
    path = Path(directory) / PARAMS_FILE
    try:
        return torch.load(path, map_location=map_location, weights_only=True)
    except (OSError, RuntimeError) as e:
        raise CheckpointError(f"Cannot read parameters '{path}': {e}") from e


def load_checkpoint(directory, model: Optional[torch.nn.Module] = None, map_location="cpu") -> Tuple[object, dict]:
    """
    Load a checkpoint.

    Args:
        directory: Checkpoint directory.
        model: Model to load into; built from the manifest settings when omitted.

    Returns:
        Tuple[VideoCodec, dict]: The model and the manifest.
    """
    manifest = read_manifest(directory)
    if manifest.get("model_version") != MODEL_VERSION:
        raise CheckpointError(
            f"Checkpoint '{directory}' has model version {manifest.get('model_version')}, expected {MODEL_VERSION}."
        )
    if model is None:
        from ..models import VideoCodec

        settings = checkpoint_settings(manifest)
        model = VideoCodec(settings.model, settings.rate)
    try:
        model.load_state_dict(load_state(directory, map_location))
    except RuntimeError as e:
        raise CheckpointError(f"Checkpoint '{directory}' does not match the model: {e}") from e
    return model, manifest


def checkpoint_settings(manifest: dict) -> CodecSettings:
    if "config" not in manifest:
        raise CheckpointError("Manifest carries no settings.")
    return settings_from_dict(manifest["config"])


def latest_stage_checkpoint(root) -> Optional[Path]:
    """Highest-numbered stage directory holding a manifest."""
    candidates = sorted(p for p in Path(root).glob("stage[0-9][0-9]") if (p / MANIFEST_FILE).exists())
    return candidates[-1] if candidates else None
