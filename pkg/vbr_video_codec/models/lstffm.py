"""
Long-short-term feature fusion.

The short-term path warps the previous decoder features at every scale with the
decoded flow. The long-term path extracts a stride-2 pyramid from an older decoded
frame, without motion compensation, and merges it top-down through sub-pixel
upsampling. Both are concatenated per scale and fused into the context ``c_t``.
"""

import logging
from typing import Sequence, Tuple

import torch
from compressai.layers import ResidualBlock, conv3x3, subpel_conv3x3
from compressai.models.utils import conv
from torch import Tensor, nn

from ..exceptions import ArgumentError
from .motion import downscale_flow, warp

logger = logging.getLogger(__name__)

Features = Tuple[Tensor, Tensor, Tensor]


class ShortTermBranch(nn.Module):
    def __init__(self, channels: Sequence[int]):
        super().__init__()
        self.refine = nn.ModuleList(ResidualBlock(c, c) for c in channels)

    def forward(self, feat: Features, flow: Tensor) -> Features:
        out = []
        for scale, (f, refine) in enumerate(zip(feat, self.refine)):
            out.append(refine(warp(f, downscale_flow(flow, 2**scale))))
        return tuple(out)


class LongTermBranch(nn.Module):
    """Stride-2 pyramid over the long-term reference frame with a top-down path."""

    def __init__(self, in_channels: int, channels: Sequence[int]):
        super().__init__()
        c0, c1, c2 = channels
        self.stem = conv3x3(in_channels, c0)
        self.refine0 = ResidualBlock(c0, c0)
        self.down1 = conv(c0, c1, kernel_size=3)
        self.refine1 = ResidualBlock(c1, c1)
        self.down2 = conv(c1, c2, kernel_size=3)
        self.refine2 = ResidualBlock(c2, c2)
        self.up2 = subpel_conv3x3(c2, c1, 2)
        self.up1 = subpel_conv3x3(c1, c0, 2)

    def forward(self, lt: Tensor) -> Features:
        l0 = self.refine0(self.stem(lt))
        l1 = self.refine1(self.down1(l0))
        l2 = self.refine2(self.down2(l1))
        u1 = l1 + self.up2(l2)
        u0 = l0 + self.up1(u1)
        return u0, u1, l2


class FusionBlock(nn.Module):
    """conv -> LeakyReLU -> conv over the concatenated branches."""

    def __init__(self, in_channels: int, channels: int):
        super().__init__()
        self.block = nn.Sequential(conv3x3(in_channels, channels), nn.LeakyReLU(0.1), conv3x3(channels, channels))

    def forward(self, x: Tensor) -> Tensor:
        return self.block(x)


class LSTFFM(nn.Module):
    """
    Builds the three-scale context from previous features, decoded flow and a
    long-term reference frame.

    Args:
        in_channels: Channels of the reference frame.
        channels: Feature widths at full, 1/2 and 1/4 resolution.
        use_long_term: When False the long-term branch is omitted and the context
            comes from the short-term path alone.
    """

    def __init__(self, in_channels: int = 3, channels: Sequence[int] = (32, 64, 96), use_long_term: bool = True):
        super().__init__()
        self.channels = tuple(channels)
        self.use_long_term = use_long_term
        self.short_term = ShortTermBranch(channels)
        self.long_term = LongTermBranch(in_channels, channels) if use_long_term else None
        factor = 2 if use_long_term else 1
        self.fuse = nn.ModuleList(FusionBlock(factor * c, c) for c in channels)

    def forward(self, feat: Features, lt: Tensor, flow: Tensor) -> Features:
        if len(feat) != 3:
            raise ArgumentError(f"Expected features at 3 scales, got {len(feat)}.")
        for scale, (f, c) in enumerate(zip(feat, self.channels)):
            expected = (c, flow.shape[2] // 2**scale, flow.shape[3] // 2**scale)
            if tuple(f.shape[1:]) != expected:
                raise ArgumentError(f"Feature scale {scale} has shape {tuple(f.shape[1:])}, expected {expected}.")
        if lt.shape[2:] != flow.shape[2:]:
            raise ArgumentError(f"Long-term reference {tuple(lt.shape)} does not match flow {tuple(flow.shape)}.")

        short = self.short_term(feat, flow)
        if self.long_term is None:
            return tuple(fuse(s) for fuse, s in zip(self.fuse, short))
        long = self.long_term(lt)
        return tuple(fuse(torch.cat((s, lf), dim=1)) for fuse, s, lf in zip(self.fuse, short, long))


def lstffm_fuse(module: LSTFFM, state, lt: Tensor, flow: Tensor) -> Features:
    """Context features for the next frame from a decoder state."""
    return module(state.feat, lt, flow)
