"""
Frame coders and the rolling decoder state.

``DecodedState`` keeps the decoder features of the last frame, the last intra frame
and the last four reconstructed frames, which is all the long-term reference rule
needs: ``x_hat[0]`` while ``t < 4`` and ``x_hat[t - 4]`` afterwards, with ``t``
counted from the most recent intra frame.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import torch
from compressai.layers import ResidualBlock, conv3x3, subpel_conv3x3
from compressai.models.utils import conv
from torch import Tensor, nn
from torch.nn import functional as F

from ..constants import DEFAULT_SUPPORT, LONG_TERM_OFFSET, MODEL_VERSION, RING_SIZE
from ..entropy_coding import FactorizedPrior
from ..exceptions import ArgumentError, StateError
from ..rate_control import RateGain
from .layers import down_stack, up_stack

logger = logging.getLogger(__name__)

Features = Tuple[Tensor, Tensor, Tensor]


@dataclass(frozen=True)
class DecodedState:
    """
    Decoder-side memory after decoding frame ``t``.

    Attributes:
        feat: Decoder features at full, 1/2 and 1/4 resolution.
        x0: Reconstruction of the most recent intra frame.
        frames: Last ``RING_SIZE`` reconstructions keyed by their index ``t``.
        t: Index of the newest reconstruction (0 for the intra frame).
    """

    feat: Features
    x0: Tensor
    frames: Dict[int, Tensor] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def from_intra(cls, x0: Tensor, feat: Features) -> "DecodedState":
        return cls(feat=tuple(feat), x0=x0, frames={0: x0}, t=0)

    @property
    def frame(self) -> Tensor:
        """Newest reconstruction, the short-term reference."""
        return self.frames[self.t]

    def push(self, frame: Tensor, feat: Features) -> "DecodedState":
        """State after decoding ``frame`` as index ``t + 1``."""
        t = self.t + 1
        frames = {k: v for k, v in self.frames.items() if k > t - RING_SIZE}
        frames[t] = frame
        return DecodedState(feat=tuple(feat), x0=self.x0, frames=frames, t=t)

    def detach(self) -> "DecodedState":
        return DecodedState(
            feat=tuple(f.detach() for f in self.feat),
            x0=self.x0.detach(),
            frames={k: v.detach() for k, v in self.frames.items()},
            t=self.t,
        )


def long_term_ref(state: Optional[DecodedState], t: int) -> Tensor:
    """
    Long-term reference for coding frame ``t``.

    Raises:
        StateError: If the state is empty or no longer holds the requested frame.
        ArgumentError: If ``t < 1``.
    """
    if state is None or not state.frames:
        raise StateError("Decoder state is empty; code an intra frame first.")
    if t < 1:
        raise ArgumentError(f"Long-term reference needs t >= 1, got {t}.")
    if t < LONG_TERM_OFFSET:
        return state.x0
    try:
        return state.frames[t - LONG_TERM_OFFSET]
    except KeyError:
        raise StateError(f"Frame {t - LONG_TERM_OFFSET} is no longer in the decoder state (newest is {state.t}).")


@dataclass(frozen=True)
class CtxLatent:
    """Range-coded frame latent (intra or conditional)."""

    data: bytes
    shape: Tuple[int, int]
    channels: int
    model_version: int = MODEL_VERSION

    @property
    def bits(self) -> int:
        return 8 * len(self.data)


class FeatureHead(nn.Module):
    """Three-scale features from a reconstructed frame; seeds the state after an intra frame."""

    def __init__(self, in_channels: int, channels: Sequence[int]):
        super().__init__()
        c0, c1, c2 = channels
        self.f0 = nn.Sequential(conv3x3(in_channels, c0), ResidualBlock(c0, c0))
        self.f1 = nn.Sequential(conv(c0, c1, kernel_size=3), ResidualBlock(c1, c1))
        self.f2 = nn.Sequential(conv(c1, c2, kernel_size=3), ResidualBlock(c2, c2))

    def forward(self, x: Tensor) -> Features:
        f0 = self.f0(x)
        f1 = self.f1(f0)
        return f0, f1, self.f2(f1)


class IntraCodec(nn.Module):
    """Unconditional autoencoder for I-frames with rate gains and a factorized prior."""

    def __init__(
        self,
        in_channels: int = 3,
        channels: Sequence[int] = (32, 64, 96),
        latent_channels: int = 96,
        support: int = DEFAULT_SUPPORT,
        n: int = 64,
        q_init_min: float = 0.5,
        q_init_max: float = 2.0,
    ):
        super().__init__()
        c0, c1, c2 = channels
        self.latent_channels = latent_channels
        self.encoder = down_stack((in_channels, c0, c1, c2, latent_channels))
        self.decoder = up_stack((latent_channels, c2, c1, c0, in_channels))
        self.feature_head = FeatureHead(in_channels, channels)
        self.gain = RateGain(latent_channels, n, q_init_min, q_init_max)
        self.entropy = FactorizedPrior(latent_channels, support=support)

    def analysis(self, x: Tensor, idx: Tensor) -> Tensor:
        return self.gain.scale(self.encoder(x), idx)

    def synthesis(self, y_hat: Tensor, idx: Tensor) -> Tuple[Tensor, Features]:
        x_hat = self.decoder(self.gain.unscale(y_hat, idx))
        return x_hat, self.feature_head(x_hat)


class ContextualEncoder(nn.Module):
    """Four stride-2 stages over ``x_t``, with the context joined at full, 1/2 and 1/4 scale."""

    def __init__(self, in_channels: int, channels: Sequence[int], latent_channels: int):
        super().__init__()
        c0, c1, c2 = channels
        self.stage1 = conv(in_channels + c0, c1)
        self.stage2 = conv(2 * c1, c2)
        self.stage3 = conv(2 * c2, c2)
        self.stage4 = conv(c2, latent_channels)
        self.act = nn.LeakyReLU(0.1)

    def forward(self, x: Tensor, context: Features) -> Tensor:
        c0, c1, c2 = context
        h = self.act(self.stage1(_cat(x, c0)))
        h = self.act(self.stage2(_cat(h, c1)))
        h = self.act(self.stage3(_cat(h, c2)))
        return self.stage4(h)


class ContextualDecoder(nn.Module):
    """
    Mirrors ``ContextualEncoder``; returns the reconstruction and the features kept
    for the next frame.
    """

    def __init__(self, out_channels: int, channels: Sequence[int], latent_channels: int):
        super().__init__()
        c0, c1, c2 = channels
        self.up4 = subpel_conv3x3(latent_channels, c2, 2)
        self.up3 = subpel_conv3x3(c2, c2, 2)
        self.merge2 = nn.Sequential(conv3x3(2 * c2, c2), ResidualBlock(c2, c2))
        self.up2 = subpel_conv3x3(c2, c1, 2)
        self.merge1 = nn.Sequential(conv3x3(2 * c1, c1), ResidualBlock(c1, c1))
        self.up1 = subpel_conv3x3(c1, c0, 2)
        self.merge0 = nn.Sequential(conv3x3(2 * c0, c0), ResidualBlock(c0, c0))
        self.reconstruct = conv3x3(c0, out_channels)
        self.act = nn.LeakyReLU(0.1)

    def forward(self, y_hat: Tensor, context: Features) -> Tuple[Tensor, Features]:
        c0, c1, c2 = context
        h = self.act(self.up3(self.act(self.up4(y_hat))))
        g2 = self.merge2(_cat(h, c2))
        g1 = self.merge1(_cat(self.act(self.up2(g2)), c1))
        g0 = self.merge0(_cat(self.act(self.up1(g1)), c0))
        return self.reconstruct(g0), (g0, g1, g2)


class ContextPrior(nn.Module):
    """Mean and scale of the frame latent, predicted from the 1/4-scale context."""

    def __init__(self, context_channels: int, latent_channels: int):
        super().__init__()
        self.net = nn.Sequential(
            conv(context_channels, latent_channels, kernel_size=3),
            nn.LeakyReLU(0.1),
            conv(latent_channels, 2 * latent_channels, kernel_size=3),
        )

    def forward(self, context_quarter: Tensor) -> Tuple[Tensor, Tensor]:
        means, scales = self.net(context_quarter).chunk(2, dim=1)
        return means, F.softplus(scales)


def _cat(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[2:] != b.shape[2:]:
        raise ArgumentError(f"Cannot join tensors of spatial size {tuple(a.shape[2:])} and {tuple(b.shape[2:])}.")
    return torch.cat((a, b), dim=1)
