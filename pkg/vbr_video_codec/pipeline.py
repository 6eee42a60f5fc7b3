"""
Sequence-level coding: clips in, containers out, and back.

Clips are float RGB arrays ``(T, 3, H, W)`` in ``[0, 1]``. Frames are padded to
``pad_multiple`` by edge replication before coding and cropped back to the header
dimensions after decoding.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from .constants import FRAME_TYPE_I, FRAME_TYPE_P, MODEL_STRIDE
from .container import Container, ContainerHeader, FrameRecord
from .data_io import clip_to_yuv, crop_to, pad_to_multiple
from .evaluation import RDCurve, RDPoint, sequence_psnr
from .exceptions import ArgumentError, BitstreamError, UsageError
from .models import CtxLatent, MvLatent, VideoCodec
from .trainer.checkpoints import checkpoint_settings, load_checkpoint

logger = logging.getLogger(__name__)


@dataclass
class FrameStats:
    index: int
    frame_type: int
    bpp_mv: float
    bpp_context: float

    @property
    def bpp(self) -> float:
        return self.bpp_mv + self.bpp_context


@dataclass
class EncodeResult:
    container: Container
    reconstruction: np.ndarray
    frames: List[FrameStats] = field(default_factory=list)

    @property
    def bpp(self) -> float:
        return self.container.bpp


def load_codec(checkpoint, device="cpu") -> Tuple[VideoCodec, object]:
    """
    Build a codec from a checkpoint directory.

    Returns:
        Tuple[VideoCodec, CodecSettings]: The model in eval mode and its settings.
    """
    model, manifest = load_checkpoint(checkpoint, map_location=device)
    model.to(device).eval()
    logger.info(f"Loaded codec from {checkpoint} (stage {manifest.get('stage')})")
    return model, checkpoint_settings(manifest)


def is_intra_frame(t: int, intra_period: int) -> bool:
    """Frame 0 is always intra; with ``intra_period > 0`` every ``intra_period``-th frame refreshes."""
    return t == 0 or (intra_period > 0 and t % intra_period == 0)


def _check_q_idx(model: VideoCodec, q_idx: int) -> None:
    if not 0 <= q_idx < model.n:
        raise UsageError(f"q_idx must be in [0, {model.n - 1}], got {q_idx}.")


def _to_tensor(frame: np.ndarray, device) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(frame, dtype=np.float32))[None].to(device)


def _to_array(x: torch.Tensor) -> np.ndarray:
    return x[0].detach().cpu().numpy().astype(np.float32)


def encode_sequence(
    model: VideoCodec,
    clip: np.ndarray,
    q_idx: int,
    intra_period: int = -1,
    pad_multiple: int = 64,
) -> EncodeResult:
    """
    Code a clip at one rate index.

    Returns:
        EncodeResult: The container, the decoder-side reconstruction (cropped to the
        input size) and per-frame rates measured on the original frame area.

    Raises:
        UsageError: If ``q_idx`` is outside ``[0, n)``.
        ArgumentError: If the clip is empty or has the wrong channel count.
    """
    clip = np.asarray(clip, dtype=np.float32)
    if clip.ndim != 4 or clip.shape[0] == 0:
        raise ArgumentError(f"Expected a (T, C, H, W) clip, got shape {clip.shape}.")
    if clip.shape[1] != model.settings.in_channels:
        raise ArgumentError(f"Clip has {clip.shape[1]} channels, model expects {model.settings.in_channels}.")
    _check_q_idx(model, q_idx)
    if pad_multiple % MODEL_STRIDE:
        raise ArgumentError(f"Padding multiple {pad_multiple} is not a multiple of {MODEL_STRIDE}.")

    padded, (h, w) = pad_to_multiple(clip, pad_multiple)
    device = next(model.parameters()).device
    header = ContainerHeader(width=w, height=h, frame_count=clip.shape[0], intra_period=intra_period, q_idx=q_idx)
    records, stats, recon = [], [], []
    state = None
    pixels = h * w
    model.eval()
    for t, frame in enumerate(padded):
        x = _to_tensor(frame, device)
        if is_intra_frame(t, intra_period):
            result = model.encode_intra(x, q_idx)
            record = FrameRecord(FRAME_TYPE_I, b"", result.latent.data)
            stats.append(FrameStats(t, FRAME_TYPE_I, 0.0, result.latent.bits / pixels))
        else:
            result = model.encode_inter(x, state, q_idx)
            record = FrameRecord(FRAME_TYPE_P, result.mv_latent.data, result.ctx_latent.data)
            stats.append(
                FrameStats(t, FRAME_TYPE_P, result.mv_latent.bits / pixels, result.ctx_latent.bits / pixels)
            )
        state = result.state
        records.append(record)
        recon.append(_to_array(result.x_hat))
        logger.debug(
            f"frame {t} ({'I' if record.is_intra else 'P'}): bpp_mv {stats[-1].bpp_mv:.4f}, "
            f"bpp_context {stats[-1].bpp_context:.4f}"
        )

    container = Container(header, records)
    reconstruction = crop_to(np.stack(recon), (h, w))
    logger.info(f"Encoded {len(records)} frame(s) at q_idx {q_idx}: {container.bpp:.4f} bpp")
    return EncodeResult(container=container, reconstruction=reconstruction, frames=stats)


def decode_sequence(model: VideoCodec, container: Container, pad_multiple: int = 64) -> np.ndarray:
    """
    Reconstruct a clip from a container and the model parameters.

    Raises:
        BitstreamError: If a record cannot be decoded with this model.
    """
    header = container.header
    if not 0 <= header.q_idx < model.n:
        raise BitstreamError(f"Header q_idx {header.q_idx} is outside the model's range [0, {model.n - 1}].")
    ph = header.height + (-header.height) % pad_multiple
    pw = header.width + (-header.width) % pad_multiple
    latent_shape = (ph // MODEL_STRIDE, pw // MODEL_STRIDE)
    device = next(model.parameters()).device
    model.eval()
    frames, state = [], None
    for t, record in enumerate(container.records):
        if record.is_intra != is_intra_frame(t, header.intra_period):
            raise BitstreamError(f"Record {t}: frame type does not follow intra period {header.intra_period}.")
        ctx = CtxLatent(
            data=record.ctx,
            shape=latent_shape,
            channels=model.intra.latent_channels if record.is_intra else model.settings.ctx_channels,
        )
        try:
            if record.is_intra:
                x_hat, state = model.decode_intra(ctx, header.q_idx, device=device)
            else:
                mv = MvLatent(data=record.mv, shape=latent_shape, channels=model.mv_codec.latent_channels)
                x_hat, state = model.decode_inter(mv, ctx, state, header.q_idx)
        except BitstreamError as e:
            raise BitstreamError(f"Record {t}: {e}") from e
        frames.append(_to_array(x_hat))
    logger.info(f"Decoded {len(frames)} frame(s) of {header.width}x{header.height}")
    return crop_to(np.stack(frames), (header.height, header.width))


def sequence_quality(reference: np.ndarray, decoded: np.ndarray) -> List[float]:
    """Per-frame weighted YUV PSNR after converting both clips to 8-bit I420."""
    return sequence_psnr(clip_to_yuv(reference), clip_to_yuv(decoded))


def rd_sweep(
    model: VideoCodec,
    clip: np.ndarray,
    indices: Sequence[int],
    label: str = "codec",
    intra_period: int = -1,
    pad_multiple: int = 64,
    reference: Optional[np.ndarray] = None,
) -> RDCurve:
    """
    Encode one clip at several rate indices and collect an RD curve.

    Args:
        reference: Clip to measure quality against; defaults to ``clip``.
    """
    reference = clip if reference is None else reference
    points = []
    for idx in indices:
        result = encode_sequence(model, clip, int(idx), intra_period, pad_multiple)
        quality = float(np.mean(sequence_quality(reference, result.reconstruction)))
        points.append(RDPoint(bpp=result.bpp, psnr=quality, idx=int(idx)))
        logger.info(f"q_idx {idx}: {result.bpp:.4f} bpp, {quality:.3f} dB")
    return RDCurve(label, points)
