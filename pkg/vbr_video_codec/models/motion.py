"""
Motion estimation, warping and the motion-vector codec.

Flow fields are ``(B, 2, H, W)`` tensors in pixels, channel 0 horizontal (positive to
the right) and channel 1 vertical (positive downward). Warping samples the source at
``(x + dx, y + dy)``.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import torch
from torch import Tensor, nn
from torch.nn import functional as F

from ..constants import DEFAULT_SUPPORT, MODEL_STRIDE, MODEL_VERSION
from ..entropy_coding import FactorizedPrior, estimate_bits
from ..exceptions import ArgumentError, BitstreamError
from ..rate_control import RateGain
from .layers import down_stack, up_stack

logger = logging.getLogger(__name__)


def _check_flow(src: Tensor, flow: Tensor) -> None:
    if src.dim() != 4 or flow.dim() != 4 or flow.shape[1] != 2:
        raise ArgumentError(f"Expected (B, C, H, W) source and (B, 2, H, W) flow, got {tuple(src.shape)}, "
                            f"{tuple(flow.shape)}.")
    if src.shape[0] != flow.shape[0] or src.shape[2:] != flow.shape[2:]:
        raise ArgumentError(f"Flow {tuple(flow.shape)} does not match source {tuple(src.shape)}.")


def warp(src: Tensor, flow: Tensor) -> Tensor:
    """
    Bilinear backward warp with edge clamping.

    Args:
        src (Tensor): Frame or feature map ``(B, C, H, W)``.
        flow (Tensor): Flow ``(B, 2, H, W)`` at the resolution of ``src``.

    Returns:
        Tensor: ``out[y, x] = src[y + dy, x + dx]``, bilinearly interpolated, sample
        positions clamped to the image.

    Raises:
        ArgumentError: If the shapes do not match.
    """
    _check_flow(src, flow)
    b, c, h, w = src.shape
    ys = torch.arange(h, device=src.device, dtype=flow.dtype).view(1, h, 1)
    xs = torch.arange(w, device=src.device, dtype=flow.dtype).view(1, 1, w)
    x = (xs + flow[:, 0]).clamp(0, w - 1)
    y = (ys + flow[:, 1]).clamp(0, h - 1)

    x0 = torch.floor(x).clamp(max=max(w - 2, 0))
    y0 = torch.floor(y).clamp(max=max(h - 2, 0))
    wx = (x - x0).unsqueeze(1)
    wy = (y - y0).unsqueeze(1)
    x0 = x0.long()
    y0 = y0.long()
    x1 = (x0 + 1).clamp(max=w - 1)
    y1 = (y0 + 1).clamp(max=h - 1)

    flat = src.reshape(b, c, h * w)

    def gather(yi: Tensor, xi: Tensor) -> Tensor:
        index = (yi * w + xi).reshape(b, 1, h * w).expand(b, c, h * w)
        return flat.gather(2, index).reshape(b, c, h, w)

    top = gather(y0, x0) * (1 - wx) + gather(y0, x1) * wx
    bottom = gather(y1, x0) * (1 - wx) + gather(y1, x1) * wx
    return top * (1 - wy) + bottom * wy


def downscale_flow(flow: Tensor, factor: int) -> Tensor:
    """Resize a flow field by ``1 / factor`` and divide its magnitude accordingly."""
    if factor == 1:
        return flow
    h, w = flow.shape[2] // factor, flow.shape[3] // factor
    return F.interpolate(flow, size=(h, w), mode="bilinear", align_corners=False) / factor


def upscale_flow(flow: Tensor, size: Tuple[int, int]) -> Tensor:
    factor = size[0] / flow.shape[2]
    return F.interpolate(flow, size=size, mode="bilinear", align_corners=False) * factor


class PyramidFlowNet(nn.Module):
    """
    Coarse-to-fine flow estimator.

    Each level refines the upsampled flow from the level below with a residual
    predicted from ``(warp(ref, flow), cur, flow)``. The final convolution of every
    refiner starts at zero, so an untrained network returns zero flow.
    """

    def __init__(
        self,
        in_channels: int = 3,
        levels: int = 3,
        filter_counts: Sequence[int] = (32, 64, 32, 16),
        kernel_size: int = 5,
        max_displacement: float = 32.0,
    ):
        super().__init__()
        self.levels = levels
        self.max_displacement = max_displacement
        padding = kernel_size // 2
        self.refiners = nn.ModuleList()
        for _ in range(levels):
            layers = []
            current = 2 * in_channels + 2
            for count in filter_counts:
                layers += [nn.Conv2d(current, count, kernel_size, padding=padding), nn.LeakyReLU(0.1)]
                current = count
            last = nn.Conv2d(current, 2, kernel_size, padding=padding)
            nn.init.zeros_(last.weight)
            nn.init.zeros_(last.bias)
            layers.append(last)
            self.refiners.append(nn.Sequential(*layers))

    def forward(self, cur: Tensor, ref: Tensor) -> Tensor:
        if cur.shape != ref.shape:
            raise ArgumentError(f"Current frame {tuple(cur.shape)} and reference {tuple(ref.shape)} differ in shape.")
        curs, refs = [cur], [ref]
        for _ in range(1, self.levels):
            curs.append(F.avg_pool2d(curs[-1], 2))
            refs.append(F.avg_pool2d(refs[-1], 2))

        flow = torch.zeros_like(curs[-1][:, :2])
        for refiner in self.refiners:
            cur_level = curs.pop()
            ref_level = refs.pop()
            if flow.shape[2:] != cur_level.shape[2:]:
                flow = upscale_flow(flow, tuple(cur_level.shape[2:]))
            flow = flow + refiner(torch.cat((warp(ref_level, flow), cur_level, flow), dim=1))
        return flow.clamp(-self.max_displacement, self.max_displacement)


def estimate_motion(flow_net: PyramidFlowNet, cur: Tensor, ref: Tensor) -> Tensor:
    """Flow that warps ``ref`` onto ``cur``."""
    return flow_net(cur, ref)


@dataclass(frozen=True)
class MvLatent:
    """Range-coded motion latent."""

    data: bytes
    shape: Tuple[int, int]
    channels: int
    model_version: int = MODEL_VERSION

    @property
    def bits(self) -> int:
        return 8 * len(self.data)


class MotionCodec(nn.Module):
    """
    Autoencoder for flow fields with a per-channel rate gain and a factorized prior.

    The encoder has four stride-2 stages; the latent is at 1/16 of the frame size.
    """

    def __init__(
        self,
        latent_channels: int = 64,
        hidden_channels: int = 64,
        support: int = DEFAULT_SUPPORT,
        n: int = 64,
        q_init_min: float = 0.5,
        q_init_max: float = 2.0,
    ):
        super().__init__()
        self.latent_channels = latent_channels
        self.encoder = down_stack((2, hidden_channels, hidden_channels, hidden_channels, latent_channels))
        self.decoder = up_stack((latent_channels, hidden_channels, hidden_channels, hidden_channels, 2))
        self.gain = RateGain(latent_channels, n, q_init_min, q_init_max)
        self.entropy = FactorizedPrior(latent_channels, support=support)

    def forward(self, flow: Tensor, idx: Tensor, mode: str = "noise") -> Tuple[Tensor, Tensor]:
        """
        Training/estimation pass.

        Returns:
            Tuple[Tensor, Tensor]: Decoded flow and estimated bits (scalar, whole batch).
        """
        y = self.gain.scale(self.encoder(flow), idx)
        y_hat, likelihoods = self.entropy(y, mode)
        flow_hat = self.decoder(self.gain.unscale(y_hat, idx))
        return flow_hat, -torch.log2(likelihoods).sum()

    @torch.no_grad()
    def compress(self, flow: Tensor, idx: Tensor) -> Tuple[MvLatent, Tensor]:
        y = self.gain.scale(self.encoder(flow), idx)
        data, y_hat = self.entropy.compress(y)
        latent = MvLatent(data=data, shape=tuple(y.shape[2:]), channels=self.latent_channels)
        return latent, self.decoder(self.gain.unscale(y_hat, idx))

    @torch.no_grad()
    def decompress(self, latent: MvLatent, idx: Tensor) -> Tensor:
        if latent.model_version != MODEL_VERSION:
            raise BitstreamError(
                f"Motion latent was produced by model version {latent.model_version}, expected {MODEL_VERSION}."
            )
        if latent.channels != self.latent_channels:
            raise BitstreamError(f"Motion latent has {latent.channels} channels, model has {self.latent_channels}.")
        y_hat = self.entropy.decompress(latent.data, latent.shape, device=idx.device)
        y_hat = y_hat.to(self.gain.log_q_min.dtype)
        return self.decoder(self.gain.unscale(y_hat, idx))

    def estimate_bits(self, y_hat: Tensor) -> Tensor:
        return estimate_bits(y_hat, self.entropy)


def mv_encode(codec: MotionCodec, flow: Tensor, idx: Tensor) -> Tuple[MvLatent, float, Tensor]:
    """
    Code a single flow field.

    Returns:
        Tuple[MvLatent, float, Tensor]: The latent, bits per frame pixel and the
        decoded flow the decoder will reproduce.
    """
    if flow.shape[2] % MODEL_STRIDE or flow.shape[3] % MODEL_STRIDE:
        raise ArgumentError(f"Flow size {tuple(flow.shape[2:])} is not a multiple of {MODEL_STRIDE}.")
    latent, flow_hat = codec.compress(flow, idx)
    bpp = latent.bits / (flow.shape[2] * flow.shape[3])
    return latent, bpp, flow_hat


def mv_decode(codec: MotionCodec, latent: MvLatent, idx: Tensor) -> Tensor:
    """Decode a flow field; raises ``BitstreamError`` on a model-version mismatch."""
    return codec.decompress(latent, idx)
