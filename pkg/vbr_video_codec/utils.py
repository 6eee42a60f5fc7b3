import logging
from typing import Optional

import numpy as np
import torch

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def seeded_generator(seed: int, stream: Optional[int] = None) -> np.random.Generator:
    """
    Create a numpy generator, optionally for an independent sub-stream.

    Args:
        seed (int): Base seed.
        stream (int, optional): Sub-stream id (e.g. a training stage id).

    Returns:
        np.random.Generator: Deterministic generator for the pair.
    """
    if stream is None:
        return np.random.default_rng(seed)
    return np.random.default_rng([seed, stream])


def seed_torch(seed: int, stream: Optional[int] = None) -> None:
    """Seed torch's global generators for a (seed, stream) pair."""
    torch.manual_seed(seed if stream is None else seed * 1000 + stream)


def resolve_device(name: str = "auto") -> torch.device:
    """
    Map a device setting to a torch device.

    Args:
        name (str): One of ``auto``, ``cpu``, ``cuda``, ``mps``.

    Returns:
        torch.device: The selected device. ``auto`` prefers CUDA, then MPS, then CPU.
    """
    if name == "auto":
        if torch.cuda.is_available():
            return torch.device("cuda")
        if getattr(torch.backends, "mps", None) is not None and torch.backends.mps.is_available():
            return torch.device("mps")
        return torch.device("cpu")
    if name == "cuda" and not torch.cuda.is_available():
        raise ConfigurationError("Device 'cuda' requested but CUDA is not available.")
    return torch.device(name)


def count_parameters(module: torch.nn.Module, trainable_only: bool = False) -> int:
    """Number of scalar parameters in ``module``."""
    return sum(p.numel() for p in module.parameters() if p.requires_grad or not trainable_only)


def format_bytes(size: int) -> str:
    """Human-readable byte count for log lines."""
    if size < 1024:
        return f"{size} B"
    if size < 1024 * 1024:
        return f"{size / 1024:.1f} KiB"
    return f"{size / (1024 * 1024):.1f} MiB"
