"""
Training jobs.

``StageJob`` runs one stage of the schedule, ``IntraWarmupJob`` pre-trains the intra
codec, and ``TrainJob`` chains them with checkpoints in between. Each job seeds its
own generators from ``(seed, stage id)``, so a run resumed from a checkpoint replays
the same batches and losses as an uninterrupted one.
"""

import csv
import logging
import math
from contextlib import nullcontext
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import torch
from tqdm import tqdm

from ..config import CodecSettings
from ..constants import TRAIN_LOG_COLUMNS
from ..data_io import ClipDataset
from ..exceptions import CheckpointError, TrainingError, UsageError
from ..losses import LossBreakdown, loss_all, loss_avg, loss_me_d, loss_me_rd, loss_rec_d, loss_rec_rd
from ..utils import count_parameters, resolve_device, seed_torch, seeded_generator
from .batches import Batch, epoch_batches
from .checkpoints import MANIFEST_FILE, intra_dir, load_checkpoint, save_checkpoint, stage_dir
from .schedule import StageConfig, apply_freezing, apply_overrides, default_schedule, select_stages, unfreeze_all

logger = logging.getLogger(__name__)

WARMUP_STAGE_ID = 0


@dataclass
class TrainOptions:
    """Options of a full training run."""

    start_stage: int = 1
    end_stage: int = 18
    progress: bool = True

    def validate(self, schedule: Sequence[StageConfig]) -> None:
        ids = [s.id for s in schedule]
        if self.start_stage not in ids or self.end_stage not in ids or self.start_stage > self.end_stage:
            raise UsageError(
                f"Invalid stage range {self.start_stage}..{self.end_stage}; stages run from {ids[0]} to {ids[-1]}."
            )


@dataclass
class StageMetrics:
    stage: int
    steps: int
    first_loss: float
    last_loss: float
    mean_loss: float
    mean_distortion: float
    mean_bpp_mv: float
    mean_bpp_context: float

    def as_dict(self) -> dict:
        return asdict(self)


class TrainingLog:
    """Appends one CSV row per optimizer step."""

    def __init__(self, path):
        self.path = Path(path) if path else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, row: dict) -> None:
        if self.path is None:
            return
        new_file = not self.path.exists()
        with open(self.path, "a", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=TRAIN_LOG_COLUMNS)
            if new_file:
                writer.writeheader()
            writer.writerow({k: row[k] for k in TRAIN_LOG_COLUMNS})


def _frame_loss(loss_type: str, x: torch.Tensor, out, bpp_mv, bpp_context, lam):
    """Per-frame objective and the distortion it uses."""
    if loss_type == "meD":
        d = loss_me_d(x, out.warped)
        return d, d
    if loss_type == "meRD":
        return loss_me_rd(x, out.warped, bpp_mv, lam), loss_me_d(x, out.warped)
    d = loss_rec_d(x, out.x_hat)
    if loss_type == "recD":
        return d, d
    rec_rd = loss_rec_rd(x, out.x_hat, bpp_context, lam)
    if loss_type == "recRD":
        return rec_rd, d
    return loss_all(rec_rd, bpp_mv), d


def compute_stage_loss(model, batch: Batch, stage: StageConfig, mode: str = "noise", distortion_scale: float = 1.0):
    """
    Roll the model over one batch and build the stage objective.

    Frame 0 is intra coded; frames 1.. are P-frames coded recursively. Losses are
    collected on ``stage.loss_frames`` and averaged. Returns ``(loss, LossBreakdown)``.
    """
    frames = batch.frames
    b, _, _, h, w = frames.shape
    pixels = b * h * w
    lam = batch.lam.to(frames.dtype) * distortion_scale
    intra = model.forward_intra(frames[:, 0], batch.idx, mode)
    state = intra.state
    last = frames.shape[1] - 1
    losses, distortions, rates_mv, rates_ctx = [], [], [], []
    for t in range(1, frames.shape[1]):
        x = frames[:, t]
        motion_only = stage.motion_only and t == last
        out = model.forward_inter(x, state, batch.idx, mode, motion_only=motion_only)
        bpp_mv = out.bits_mv / pixels
        bpp_context = out.bits_context / pixels if out.bits_context is not None else torch.zeros_like(bpp_mv)
        if t in stage.loss_frames:
            frame_loss, distortion = _frame_loss(stage.loss_type, x, out, bpp_mv, bpp_context, lam)
            losses.append(frame_loss)
            distortions.append(distortion.detach())
            rates_mv.append(bpp_mv.detach())
            rates_ctx.append(bpp_context.detach())
        if not motion_only:
            state = out.state
    loss = loss_avg(losses)
    if stage.trains_intra:
        loss = loss + loss_rec_rd(frames[:, 0], intra.x_hat, intra.bits / pixels, lam)
    breakdown = LossBreakdown(
        distortion=float(torch.stack(distortions).mean()),
        bpp_mv=float(torch.stack(rates_mv).mean()),
        bpp_context=float(torch.stack(rates_ctx).mean()),
        total=float(loss.detach()),
    )
    return loss, breakdown


def compute_intra_loss(model, batch: Batch, mode: str = "noise", distortion_scale: float = 1.0):
    x0 = batch.frames[:, 0]
    pixels = x0.shape[0] * x0.shape[2] * x0.shape[3]
    out = model.forward_intra(x0, batch.idx, mode)
    bpp = out.bits / pixels
    loss = loss_rec_rd(x0, out.x_hat, bpp, batch.lam.to(x0.dtype) * distortion_scale)
    breakdown = LossBreakdown(
        distortion=float(loss_rec_d(x0, out.x_hat).detach()),
        bpp_mv=0.0,
        bpp_context=float(bpp.detach()),
        total=float(loss.detach()),
    )
    return loss, breakdown


class TrainingJob:
    """Base for jobs that optimize the codec over seeded epochs of batches."""

    class Meta:
        name = "Training job"

    def __init__(
        self,
        model,
        dataset: ClipDataset,
        settings: CodecSettings,
        stage: StageConfig,
        log: Optional[TrainingLog] = None,
        progress: bool = True,
        rng: Optional[np.random.Generator] = None,
    ):
        self.model = model
        self.dataset = dataset
        self.settings = settings
        self.stage = stage
        self.log = log or TrainingLog(None)
        self.progress = progress
        self.rng = rng
        self.device = resolve_device(settings.trainer.device)
        self.logger = logger.getChild(f"stage{stage.id:02d}")

    def prepare(self) -> None:
        """Set ``requires_grad`` for this job."""
        raise NotImplementedError

    def loss(self, batch: Batch):
        raise NotImplementedError

    def _autocast(self):
        if not self.settings.trainer.mixed_precision:
            return nullcontext()
        dtype = torch.float16 if self.device.type == "cuda" else torch.bfloat16
        return torch.autocast(device_type=self.device.type, dtype=dtype)

    def _snapshot(self, step: int, batch: Batch, breakdown: Optional[LossBreakdown]) -> Path:
        directory = Path(self.settings.trainer.ckpt_dir) / "diagnostic"
        manifest = {
            "stage": self.stage.id,
            "step": step,
            "seed": self.settings.trainer.seed,
            "config_hash": self.settings.config_hash(),
            "idx": batch.idx.tolist(),
            "breakdown": asdict(breakdown) if breakdown else None,
            "config": self.settings.as_dict(),
        }
        try:
            return save_checkpoint(self.model, directory, manifest)
        except CheckpointError:
            self.logger.exception("Could not write diagnostic snapshot")
            return directory

    def run(self) -> StageMetrics:
        """
        Train for ``stage.epochs`` epochs.

        Returns:
            StageMetrics: Loss summary of the stage.

        Raises:
            TrainingError: On a non-finite loss, after writing a diagnostic snapshot.
        """
        seed = self.settings.trainer.seed
        rng = self.rng if self.rng is not None else seeded_generator(seed, self.stage.id)
        seed_torch(seed, self.stage.id)
        self.model.to(self.device)
        self.model.train()
        self.prepare()

        params = [p for p in self.model.parameters() if p.requires_grad]
        if not params:
            raise TrainingError(f"Stage {self.stage.id} has no trainable parameters.")
        optimizer = torch.optim.Adam(params, lr=self.stage.lr)
        scaler = torch.amp.GradScaler(
            self.device.type, enabled=self.settings.trainer.mixed_precision and self.device.type == "cuda"
        )
        self.logger.info(
            f"Starting {self.Meta.name.lower()} {self.stage.id}: {self.stage.loss_type}/{self.stage.segment_type}, "
            f"{self.stage.frames} frames, lr {self.stage.lr:g}, {self.stage.epochs} epoch(s), "
            f"{count_parameters(self.model, trainable_only=True)} trainable parameters"
        )

        trainer = self.settings.trainer
        sampler = self.settings.sampler_config()
        step = 0
        losses: List[float] = []
        breakdowns: List[LossBreakdown] = []
        for epoch in range(self.stage.epochs):
            batches = epoch_batches(
                self.dataset,
                self.stage,
                rng,
                sampler,
                self.settings.data.crop_size,
                trainer.batch_size,
                trainer.max_steps_per_epoch,
                self.device,
            )
            bar = tqdm(batches, desc=f"stage {self.stage.id:02d} epoch {epoch + 1}", disable=not self.progress,
                       leave=False)
            for batch in bar:
                optimizer.zero_grad(set_to_none=True)
                breakdown = None
                with self._autocast():
                    loss, breakdown = self.loss(batch)
                if not torch.isfinite(loss.detach()):
                    snapshot = self._snapshot(step, batch, breakdown)
                    raise TrainingError(
                        f"Non-finite loss at stage {self.stage.id}, step {step}; snapshot in {snapshot}."
                    )
                scaler.scale(loss).backward()
                scaler.step(optimizer)
                scaler.update()
                step += 1
                losses.append(breakdown.total)
                breakdowns.append(breakdown)
                self.log.write(breakdown.as_row(self.stage.id, step, int(batch.idx[0]), float(batch.lam[0])))
                self.logger.debug(f"step {step}: loss {breakdown.total:.6f}")
                bar.set_postfix(loss=f"{breakdown.total:.4f}")
            if losses:
                self.logger.info(f"Epoch {epoch + 1}/{self.stage.epochs}: last loss {losses[-1]:.6f}")

        if not losses:
            raise TrainingError(f"Stage {self.stage.id} ran no steps; is the dataset empty?")
        metrics = StageMetrics(
            stage=self.stage.id,
            steps=step,
            first_loss=losses[0],
            last_loss=losses[-1],
            mean_loss=float(np.mean(losses)),
            mean_distortion=float(np.mean([b.distortion for b in breakdowns])),
            mean_bpp_mv=float(np.mean([b.bpp_mv for b in breakdowns])),
            mean_bpp_context=float(np.mean([b.bpp_context for b in breakdowns])),
        )
        self.logger.info(f"Finished stage {self.stage.id} after {step} steps, mean loss {metrics.mean_loss:.6f}")
        return metrics

    def manifest(self, metrics: StageMetrics) -> dict:
        return {
            "stage": self.stage.id,
            "step": metrics.steps,
            "seed": self.settings.trainer.seed,
            "config_hash": self.settings.config_hash(),
            "metrics": metrics.as_dict(),
            "config": self.settings.as_dict(),
        }


class StageJob(TrainingJob):
    """One stage of the schedule: freezing, fresh Adam at the stage learning rate, stage loss."""

    class Meta:
        name = "Stage"

    def prepare(self) -> None:
        apply_freezing(self.model, self.stage)

    def loss(self, batch: Batch):
        return compute_stage_loss(
            self.model,
            batch,
            self.stage,
            mode=self.settings.rate.train_quant,
            distortion_scale=self.settings.trainer.distortion_scale,
        )


class IntraWarmupJob(TrainingJob):
    """Trains the intra codec alone on single frames before the schedule starts."""

    class Meta:
        name = "Intra warm-up"

    def __init__(self, model, dataset, settings, log=None, progress=True, epochs: Optional[int] = None):
        stage = StageConfig(
            id=WARMUP_STAGE_ID,
            loss_type="recRD",
            frames=2,
            lr=1e-4,
            segment_type="IP",
            epochs=epochs or settings.trainer.intra_warmup_epochs,
        )
        super().__init__(model, dataset, settings, stage, log=log, progress=progress)

    def prepare(self) -> None:
        for name, param in self.model.named_parameters():
            param.requires_grad_(name.startswith("intra."))

    def loss(self, batch: Batch):
        return compute_intra_loss(
            self.model,
            batch,
            mode=self.settings.rate.train_quant,
            distortion_scale=self.settings.trainer.distortion_scale,
        )


def run_stage(model, dataset, stage: StageConfig, rng=None, settings: CodecSettings = None, ckpt_root=None,
              log: Optional[TrainingLog] = None, progress: bool = False) -> StageMetrics:
    """
    Run one stage and, when ``ckpt_root`` is given, write its checkpoint.

    Args:
        rng: Generator for batches and rate indices; defaults to the ``(seed, stage id)`` stream.
    """
    job = StageJob(model, dataset, settings, stage, log=log, progress=progress, rng=rng)
    metrics = job.run()
    if ckpt_root is not None:
        save_checkpoint(model, stage_dir(ckpt_root, stage.id), job.manifest(metrics))
    return metrics


class TrainJob:
    """Intra warm-up followed by the selected stages, with a checkpoint after each."""

    class Meta:
        name = "Codec training"

    def __init__(self, model, dataset, settings: CodecSettings, schedule: Optional[Sequence[StageConfig]] = None,
                 options: Optional[TrainOptions] = None):
        self.model = model
        self.dataset = dataset
        self.settings = settings
        self.options = options or TrainOptions()
        base = list(schedule) if schedule is not None else default_schedule()
        self.schedule = apply_overrides(base, settings.trainer.stage_overrides, settings.trainer.epochs)
        self.logger = logger.getChild("train")

    def run(self) -> Path:
        """
        Returns:
            Path: Directory of the last checkpoint written.
        """
        self.options.validate(self.schedule)
        root = Path(self.settings.trainer.ckpt_dir)
        log = TrainingLog(self.settings.trainer.log_csv)
        self.logger.info(
            f"Training stages {self.options.start_stage}-{self.options.end_stage}, seed {self.settings.trainer.seed}, "
            f"config {self.settings.config_hash()[:12]}"
        )

        if self.options.start_stage == self.schedule[0].id:
            if self.settings.trainer.intra_warmup_epochs > 0:
                warmup = IntraWarmupJob(self.model, self.dataset, self.settings, log=log,
                                        progress=self.options.progress)
                metrics = warmup.run()
                save_checkpoint(self.model, intra_dir(root), warmup.manifest(metrics))
        else:
            previous = stage_dir(root, self.options.start_stage - 1)
            if not (previous / MANIFEST_FILE).exists():
                raise CheckpointError(f"Cannot start at stage {self.options.start_stage}: '{previous}' is missing.")
            load_checkpoint(previous, self.model)
            self.logger.info(f"Resumed from {previous}")

        last = None
        for stage in select_stages(self.schedule, self.options.start_stage, self.options.end_stage):
            job = StageJob(self.model, self.dataset, self.settings, stage, log=log, progress=self.options.progress)
            metrics = job.run()
            if not math.isfinite(metrics.last_loss):
                raise TrainingError(f"Stage {stage.id} finished with a non-finite loss.")
            last = save_checkpoint(self.model, stage_dir(root, stage.id), job.manifest(metrics))
        unfreeze_all(self.model)
        return last


def train_full(model, dataset, schedule=None, options: Optional[TrainOptions] = None,
               settings: CodecSettings = None) -> Path:
    """Run the schedule from ``options.start_stage`` to ``options.end_stage``; returns the final checkpoint."""
    return TrainJob(model, dataset, settings, schedule, options).run()
