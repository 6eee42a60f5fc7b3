"""
The composed video codec.

Training passes (``forward_intra`` / ``forward_inter``) use quantization proxies and
estimated bits. Coding passes (``encode_*`` / ``decode_*``) produce and consume real
range-coded latents; the encoder reconstructs through the same helpers the decoder
calls, so both sides hold identical states.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
from torch import Tensor, nn

from ..config import ModelSettings, RateSettings
from ..constants import MODEL_STRIDE, MODEL_VERSION
from ..entropy_coding import GaussianConditional
from ..exceptions import ArgumentError, BitstreamError, StateError
from ..rate_control import RateGain
from .frame_codec import (
    ContextPrior,
    ContextualDecoder,
    ContextualEncoder,
    CtxLatent,
    DecodedState,
    Features,
    IntraCodec,
    long_term_ref,
)
from .lstffm import LSTFFM
from .motion import MotionCodec, MvLatent, PyramidFlowNet, warp

logger = logging.getLogger(__name__)


@dataclass
class IntraOutput:
    x_hat: Tensor
    bits: Tensor
    state: DecodedState


@dataclass
class InterOutput:
    """
    Result of a training pass over one P-frame.

    ``x_hat`` and ``bits_context`` are None when only the motion path ran.
    """

    flow: Tensor
    flow_hat: Tensor
    warped: Tensor
    bits_mv: Tensor
    bits_context: Optional[Tensor]
    x_hat: Optional[Tensor]
    state: Optional[DecodedState]


@dataclass
class IntraResult:
    latent: CtxLatent
    bpp: float
    x_hat: Tensor
    state: DecodedState


@dataclass
class InterResult:
    mv_latent: MvLatent
    ctx_latent: CtxLatent
    bpp_mv: float
    bpp_context: float
    x_hat: Tensor
    state: DecodedState


def _idx_tensor(idx, batch: int, device) -> Tensor:
    if isinstance(idx, Tensor):
        idx = idx.to(device=device).reshape(-1)
        if idx.numel() == 1 and batch > 1:
            idx = idx.expand(batch)
        return idx
    return torch.full((batch,), int(idx), device=device, dtype=torch.long)


def _check_frame(x: Tensor) -> None:
    if x.dim() != 4:
        raise ArgumentError(f"Expected a (B, C, H, W) frame, got {tuple(x.shape)}.")
    if x.shape[2] % MODEL_STRIDE or x.shape[3] % MODEL_STRIDE:
        raise ArgumentError(f"Frame size {tuple(x.shape[2:])} is not a multiple of {MODEL_STRIDE}; pad it first.")


class VideoCodec(nn.Module):
    """
    Variable-bitrate P-frame codec with an intra codec for I-frames.

    Args:
        model: Network settings.
        rate: Rate settings; ``n`` and the gain initialization are used here.
    """

    def __init__(self, model: ModelSettings, rate: RateSettings):
        super().__init__()
        self.settings = model
        self.n = rate.n
        gain_args = dict(n=rate.n, q_init_min=rate.q_init_min, q_init_max=rate.q_init_max)
        channels = tuple(model.channels)

        self.flow_net = PyramidFlowNet(
            in_channels=model.in_channels, levels=model.flow_levels, max_displacement=model.max_displacement
        )
        self.mv_codec = MotionCodec(
            latent_channels=model.mv_channels, hidden_channels=model.mv_channels, support=model.support, **gain_args
        )
        self.intra = IntraCodec(
            in_channels=model.in_channels,
            channels=channels,
            latent_channels=model.intra_channels,
            support=model.support,
            **gain_args,
        )
        self.lstffm = LSTFFM(model.in_channels, channels, use_long_term=model.use_long_term)
        self.ctx_encoder = ContextualEncoder(model.in_channels, channels, model.ctx_channels)
        self.ctx_decoder = ContextualDecoder(model.in_channels, channels, model.ctx_channels)
        self.ctx_prior = ContextPrior(channels[2], model.ctx_channels)
        self.ctx_gain = RateGain(model.ctx_channels, **gain_args)
        self.ctx_entropy = GaussianConditional()

    # Training passes

    def forward_intra(self, x: Tensor, idx, mode: str = "noise") -> IntraOutput:
        _check_frame(x)
        idx = _idx_tensor(idx, x.shape[0], x.device)
        y = self.intra.analysis(x, idx)
        y_hat, likelihoods = self.intra.entropy(y, mode)
        x_hat, feat = self.intra.synthesis(y_hat, idx)
        bits = -torch.log2(likelihoods).sum()
        return IntraOutput(x_hat=x_hat, bits=bits, state=DecodedState.from_intra(x_hat, feat))

    def forward_inter(self, x: Tensor, state: DecodedState, idx, mode: str = "noise",
                      motion_only: bool = False) -> InterOutput:
        """
        One P-frame through motion estimation, the motion codec and, unless
        ``motion_only``, the conditional coder.
        """
        _check_frame(x)
        if state is None:
            raise StateError("Inter coding needs a decoder state from an intra frame.")
        idx = _idx_tensor(idx, x.shape[0], x.device)
        ref = state.frame
        flow = self.flow_net(x, ref)
        flow_hat, bits_mv = self.mv_codec(flow, idx, mode)
        warped = warp(ref, flow_hat)
        if motion_only:
            return InterOutput(flow, flow_hat, warped, bits_mv, None, None, None)

        context = self._context(state, flow_hat)
        y = self.ctx_gain.scale(self.ctx_encoder(x, context), idx)
        means, scales = self.ctx_prior(context[2])
        y_hat, likelihoods = self.ctx_entropy(y, scales, means, mode)
        x_hat, feat = self._reconstruct(y_hat, context, idx)
        bits_context = -torch.log2(likelihoods).sum()
        return InterOutput(flow, flow_hat, warped, bits_mv, bits_context, x_hat, state.push(x_hat, feat))

    # Shared encoder/decoder helpers

    def _context(self, state: DecodedState, flow_hat: Tensor) -> Features:
        return self.lstffm(state.feat, long_term_ref(state, state.t + 1), flow_hat)

    def _reconstruct(self, y_hat: Tensor, context: Features, idx: Tensor) -> Tuple[Tensor, Features]:
        return self.ctx_decoder(self.ctx_gain.unscale(y_hat, idx), context)

    def _finish_intra(self, y_hat: Tensor, idx: Tensor) -> Tuple[Tensor, DecodedState]:
        x_hat, feat = self.intra.synthesis(y_hat, idx)
        x_hat = x_hat.clamp(0, 1)
        return x_hat, DecodedState.from_intra(x_hat, feat)

    def _finish_inter(self, y_hat: Tensor, context: Features, idx: Tensor,
                      state: DecodedState) -> Tuple[Tensor, DecodedState]:
        x_hat, feat = self._reconstruct(y_hat, context, idx)
        x_hat = x_hat.clamp(0, 1)
        return x_hat, state.push(x_hat, feat)

    @staticmethod
    def _check_latent(latent, channels: int, kind: str) -> None:
        if latent.model_version != MODEL_VERSION:
            raise BitstreamError(f"{kind} latent has model version {latent.model_version}, expected {MODEL_VERSION}.")
        if latent.channels != channels:
            raise BitstreamError(f"{kind} latent has {latent.channels} channels, model has {channels}.")

    # Coding passes (batch size 1)

    @torch.no_grad()
    def encode_intra(self, x: Tensor, idx) -> IntraResult:
        """Code an I-frame and start a new decoder state."""
        _check_frame(x)
        if x.shape[0] != 1:
            raise ArgumentError("Coding passes take one frame at a time.")
        idx = _idx_tensor(idx, 1, x.device)
        y = self.intra.analysis(x, idx)
        data, y_hat = self.intra.entropy.compress(y)
        latent = CtxLatent(data=data, shape=tuple(y.shape[2:]), channels=self.intra.latent_channels)
        x_hat, state = self._finish_intra(y_hat, idx)
        return IntraResult(latent=latent, bpp=latent.bits / (x.shape[2] * x.shape[3]), x_hat=x_hat, state=state)

    @torch.no_grad()
    def decode_intra(self, latent: CtxLatent, idx, device=None) -> Tuple[Tensor, DecodedState]:
        self._check_latent(latent, self.intra.latent_channels, "Intra")
        device = device or self.ctx_gain.log_q_min.device
        idx = _idx_tensor(idx, 1, device)
        y_hat = self.intra.entropy.decompress(latent.data, latent.shape, device=device)
        return self._finish_intra(y_hat.to(self.ctx_gain.log_q_min.dtype), idx)

    @torch.no_grad()
    def encode_inter(self, x: Tensor, state: DecodedState, idx) -> InterResult:
        """Code a P-frame against ``state`` and return the updated state."""
        _check_frame(x)
        if state is None:
            raise StateError("Inter coding needs a decoder state from an intra frame.")
        if x.shape[0] != 1:
            raise ArgumentError("Coding passes take one frame at a time.")
        idx = _idx_tensor(idx, 1, x.device)
        flow = self.flow_net(x, state.frame)
        mv_latent, flow_hat = self.mv_codec.compress(flow, idx)

        context = self._context(state, flow_hat)
        y = self.ctx_gain.scale(self.ctx_encoder(x, context), idx)
        means, scales = self.ctx_prior(context[2])
        data, y_hat = self.ctx_entropy.compress(y, scales, means)
        ctx_latent = CtxLatent(data=data, shape=tuple(y.shape[2:]), channels=self.settings.ctx_channels)
        x_hat, new_state = self._finish_inter(y_hat, context, idx, state)
        pixels = x.shape[2] * x.shape[3]
        return InterResult(
            mv_latent=mv_latent,
            ctx_latent=ctx_latent,
            bpp_mv=mv_latent.bits / pixels,
            bpp_context=ctx_latent.bits / pixels,
            x_hat=x_hat,
            state=new_state,
        )

    @torch.no_grad()
    def decode_inter(self, mv_latent: MvLatent, ctx_latent: CtxLatent, state: DecodedState,
                     idx) -> Tuple[Tensor, DecodedState]:
        """Decode a P-frame from its latents, the model parameters and ``state`` only."""
        if state is None:
            raise StateError("Inter decoding needs a decoder state from an intra frame.")
        self._check_latent(ctx_latent, self.settings.ctx_channels, "Context")
        device = state.frame.device
        idx = _idx_tensor(idx, 1, device)
        flow_hat = self.mv_codec.decompress(mv_latent, idx)
        context = self._context(state, flow_hat)
        means, scales = self.ctx_prior(context[2])
        if tuple(means.shape[2:]) != tuple(ctx_latent.shape):
            raise BitstreamError(f"Context latent shape {ctx_latent.shape} does not match {tuple(means.shape[2:])}.")
        y_hat = self.ctx_entropy.decompress(ctx_latent.data, scales, means)
        return self._finish_inter(y_hat, context, idx, state)

    def parameter_groups(self):
        from ..trainer.schedule import ParamGroups

        return ParamGroups.from_model(self)


def encode_intra(model: VideoCodec, x_0: Tensor, idx) -> IntraResult:
    return model.encode_intra(x_0, idx)


def encode_inter(model: VideoCodec, x_t: Tensor, state: DecodedState, idx) -> InterResult:
    return model.encode_inter(x_t, state, idx)
