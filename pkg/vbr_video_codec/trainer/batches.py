"""Training instances: cropped frame sequences with one rate index each."""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np
import torch

from ..data_io import ClipDataset, random_crop
from ..exceptions import DataError
from ..rate_control import SamplerConfig, lambda_for_idx, sample_idx
from .schedule import StageConfig

logger = logging.getLogger(__name__)


@dataclass
class TrainingInstance:
    """``frames`` is ``(T, C, H, W)``; frame 0 is coded as the I-frame."""

    frames: np.ndarray
    idx: int
    lam: float
    loss_frames: tuple


@dataclass
class Batch:
    frames: torch.Tensor  # (B, T, C, H, W)
    idx: torch.Tensor  # (B,)
    lam: torch.Tensor  # (B,)
    loss_frames: tuple

    @property
    def size(self) -> int:
        return self.frames.shape[0]


def build_batch(
    dataset: ClipDataset,
    stage: StageConfig,
    rng: np.random.Generator,
    sampler: SamplerConfig,
    crop_size: int,
    index: Optional[int] = None,
) -> TrainingInstance:
    """
    One training instance for ``stage``.

    Takes the first ``stage.frames`` frames of a clip, crops one window across all
    of them and draws a single rate index for the whole instance.

    Raises:
        DataError: If the clip is shorter than the stage needs.
    """
    if len(dataset) == 0:
        raise DataError("Dataset is empty.")
    if index is None:
        index = int(rng.integers(0, len(dataset)))
    clip = dataset[index]
    if clip.shape[0] < stage.frames:
        raise DataError(f"Clip {index} has {clip.shape[0]} frames; stage {stage.id} needs {stage.frames}.")
    frames = random_crop(clip[: stage.frames], crop_size, rng)
    idx = sample_idx(sampler, rng)
    return TrainingInstance(
        frames=np.ascontiguousarray(frames),
        idx=idx,
        lam=lambda_for_idx(sampler, idx),
        loss_frames=stage.loss_frames,
    )


def collate(instances: Sequence[TrainingInstance], device=None) -> Batch:
    frames = torch.from_numpy(np.stack([i.frames for i in instances]))
    return Batch(
        frames=frames.to(device) if device is not None else frames,
        idx=torch.tensor([i.idx for i in instances], dtype=torch.long, device=device),
        lam=torch.tensor([i.lam for i in instances], dtype=torch.float32, device=device),
        loss_frames=instances[0].loss_frames,
    )


def epoch_batches(
    dataset: ClipDataset,
    stage: StageConfig,
    rng: np.random.Generator,
    sampler: SamplerConfig,
    crop_size: int,
    batch_size: int,
    max_steps: Optional[int] = None,
    device=None,
) -> Iterator[Batch]:
    """Batches for one epoch in a seeded permutation of the dataset; the last partial batch is dropped."""
    order = rng.permutation(len(dataset))
    steps = max(len(order) // batch_size, 1 if len(order) else 0)
    if max_steps is not None:
        steps = min(steps, max_steps)
    for step in range(steps):
        chunk = order[step * batch_size : (step + 1) * batch_size]
        if len(chunk) < batch_size:
            chunk = np.resize(order, batch_size)
        instances: List[TrainingInstance] = [
            build_batch(dataset, stage, rng, sampler, crop_size, index=int(i)) for i in chunk
        ]
        yield collate(instances, device)
