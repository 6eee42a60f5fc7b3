"""
Entropy models for latent tensors.

``FactorizedPrior`` wraps compressai's ``EntropyBottleneck`` (one learned density per
channel); ``GaussianConditional`` wraps compressai's discretized Gaussian whose mean
and scale come from a context network. compressai provides the likelihoods and the
16-bit quantized CDF tables; the tables are handed to ``SymbolModel`` so that the
range coder in this package produces the bitstream.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from compressai import entropy_models
from compressai.ops import quantize_ste

from ..constants import DEFAULT_SUPPORT, LIKELIHOOD_BOUND, SCALE_BOUND, SCALE_TABLE_LEVELS, SCALE_TABLE_MAX
from ..exceptions import ArgumentError, ModelError
from .range_coder import range_decode, range_encode
from .symbol_models import SymbolModel

logger = logging.getLogger(__name__)

QUANT_MODES = ("noise", "ste", "round")


def quantize(y: torch.Tensor, mode: str, means: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Quantize ``y`` around ``means``.

    Args:
        y (torch.Tensor): Continuous latent.
        mode (str): ``noise`` adds uniform noise in [-0.5, 0.5); ``ste`` rounds with a
            straight-through gradient; ``round`` rounds without gradient.
        means (torch.Tensor, optional): Quantization centers, zero when omitted.

    Returns:
        torch.Tensor: The quantized (or noisy) latent, same shape as ``y``.
    """
    if mode == "noise":
        return y + torch.empty_like(y).uniform_(-0.5, 0.5)
    centered = y if means is None else y - means
    if mode == "ste":
        rounded = quantize_ste(centered)
    elif mode == "round":
        rounded = torch.round(centered).detach()
    else:
        raise ArgumentError(f"Unknown quantization mode '{mode}', expected one of {list(QUANT_MODES)}.")
    return rounded if means is None else rounded + means


def to_symbols(y: torch.Tensor, support: int, means: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Integer symbols ``round(y - means)`` clipped to ``[-support, support]``."""
    centered = y if means is None else y - means
    return torch.round(centered).clamp(-support, support).to(torch.int64)


def from_symbols(symbols: torch.Tensor, means: Optional[torch.Tensor] = None, dtype=torch.float32) -> torch.Tensor:
    values = symbols.to(dtype)
    return values if means is None else values + means.to(dtype)


def bits_from_likelihoods(likelihoods: torch.Tensor) -> torch.Tensor:
    return -torch.log2(likelihoods).sum()


def quantized_tables(model: entropy_models.EntropyModel) -> List[SymbolModel]:
    """
    One ``SymbolModel`` per row of a compressai model's quantized CDF.

    The last symbol of every row is compressai's overflow bin; it stays in the table
    but the coders here clip symbols below it.
    """
    cdfs = model._quantized_cdf.cpu().numpy()
    lengths = model._cdf_length.cpu().numpy()
    offsets = model._offset.cpu().numpy()
    return [SymbolModel(cdf[:length], int(offset)) for cdf, length, offset in zip(cdfs, lengths, offsets)]


def _clip_to_tables(symbols: np.ndarray, tables: Sequence[SymbolModel], indexes: np.ndarray) -> np.ndarray:
    low = np.array([t.min_symbol for t in tables])[indexes]
    high = np.array([t.max_symbol - 1 for t in tables])[indexes]
    return np.clip(symbols, low, high)


class FactorizedPrior(entropy_models.EntropyBottleneck):
    """
    Non-parametric per-channel density.

    The quantiles are pinned to ``[-support, 0, support]`` so the coding tables cover
    a fixed symbol range centred on zero and keep their shape across checkpoints.
    """

    def __init__(self, channels: int, filters: Sequence[int] = (3, 3, 3), init_scale: float = 10.0,
                 support: int = DEFAULT_SUPPORT):
        super().__init__(channels, filters=tuple(filters), init_scale=init_scale, likelihood_bound=LIKELIHOOD_BOUND)
        self.channels = channels
        self.support = support
        with torch.no_grad():
            self.quantiles.copy_(torch.tensor([-support, 0.0, support]).repeat(channels, 1, 1))
        self.update(force=True)

    def medians(self) -> torch.Tensor:
        return self.quantiles[:, 0, 1].detach().view(1, -1, 1, 1)

    def likelihood(self, y: torch.Tensor) -> torch.Tensor:
        """Probability mass of the unit interval around each element of ``y`` (B, C, H, W)."""
        if y.dim() != 4 or y.shape[1] != self.channels:
            raise ArgumentError(f"Expected (B, {self.channels}, H, W) latent, got {tuple(y.shape)}.")
        b, c, h, w = y.shape
        values = y.permute(1, 0, 2, 3).reshape(c, 1, -1)
        lik, _, _ = self._likelihood(values)
        if self.use_likelihood_bound:
            lik = self.likelihood_lower_bound(lik)
        return lik.reshape(c, b, h, w).permute(1, 0, 2, 3)

    def forward(self, y: torch.Tensor, mode: str = "noise") -> Tuple[torch.Tensor, torch.Tensor]:
        """Return ``(y_hat, likelihoods)``."""
        y_hat = quantize(y, mode, None if mode == "noise" else self.medians().to(y.dtype))
        return y_hat, self.likelihood(y_hat)

    @torch.no_grad()
    def symbol_models(self) -> List[SymbolModel]:
        """One table per channel, rebuilt from the current density."""
        self.update(force=True)
        return quantized_tables(self)

    @torch.no_grad()
    def compress(self, y: torch.Tensor) -> Tuple[bytes, torch.Tensor]:
        """
        Range-code a single latent ``(1, C, H, W)``.

        Returns:
            Tuple[bytes, torch.Tensor]: The stream and the dequantized latent the
            decoder will reconstruct.
        """
        if y.shape[0] != 1:
            raise ArgumentError("compress() codes one latent at a time.")
        medians = self.medians().to(y.dtype)
        tables = self.symbol_models()
        _, c, h, w = y.shape
        indexes = np.repeat(np.arange(c), h * w)
        symbols = torch.round(y - medians).to(torch.int64).cpu().numpy().ravel()
        symbols = _clip_to_tables(symbols, tables, indexes)
        data = range_encode(symbols, tables, indexes)
        y_hat = from_symbols(torch.from_numpy(symbols).reshape(1, c, h, w).to(y.device), medians, dtype=y.dtype)
        return data, y_hat

    @torch.no_grad()
    def decompress(self, data: bytes, shape: Tuple[int, int], device=None) -> torch.Tensor:
        h, w = shape
        indexes = np.repeat(np.arange(self.channels), h * w)
        symbols = range_decode(data, self.channels * h * w, self.symbol_models(), indexes)
        symbols = torch.from_numpy(symbols).reshape(1, self.channels, h, w)
        medians = self.medians()
        if device is not None:
            symbols, medians = symbols.to(device), medians.to(device)
        return from_symbols(symbols, medians)


def scale_table(
    low: float = SCALE_BOUND, high: float = SCALE_TABLE_MAX, levels: int = SCALE_TABLE_LEVELS
) -> np.ndarray:
    return np.exp(np.linspace(math.log(low), math.log(high), levels))


class GaussianConditional(entropy_models.GaussianConditional):
    """Discretized Gaussian with predicted mean and scale over a log-spaced scale table."""

    def __init__(self, scale_bound: float = SCALE_BOUND):
        super().__init__(
            scale_table(low=scale_bound).tolist(), scale_bound=scale_bound, likelihood_bound=LIKELIHOOD_BOUND
        )
        self.update()
        self._models: Optional[List[SymbolModel]] = None

    def likelihood(self, y_hat: torch.Tensor, scales: torch.Tensor, means: torch.Tensor) -> torch.Tensor:
        lik = self._likelihood(y_hat, scales, means)
        if self.use_likelihood_bound:
            lik = self.likelihood_lower_bound(lik)
        return lik

    def forward(
        self, y: torch.Tensor, scales: torch.Tensor, means: torch.Tensor, mode: str = "noise"
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Return ``(y_hat, likelihoods)``."""
        y_hat = quantize(y, mode, means)
        return y_hat, self.likelihood(y_hat, scales, means)

    def symbol_models(self) -> List[SymbolModel]:
        """Tables for every scale-table entry, centred on zero."""
        if self._models is None:
            self._models = quantized_tables(self)
        return self._models

    def build_indexes(self, scales: torch.Tensor) -> np.ndarray:
        """Index of the smallest table scale that is not below each clamped scale."""
        return super().build_indexes(scales.detach()).cpu().numpy().astype(np.int64).ravel()

    @torch.no_grad()
    def compress(self, y: torch.Tensor, scales: torch.Tensor, means: torch.Tensor) -> Tuple[bytes, torch.Tensor]:
        tables = self.symbol_models()
        indexes = self.build_indexes(scales)
        symbols = torch.round(y - means).to(torch.int64).cpu().numpy().ravel()
        symbols = _clip_to_tables(symbols, tables, indexes)
        data = range_encode(symbols, tables, indexes)
        y_hat = from_symbols(torch.from_numpy(symbols).reshape(y.shape).to(y.device), means, dtype=y.dtype)
        return data, y_hat

    @torch.no_grad()
    def decompress(self, data: bytes, scales: torch.Tensor, means: torch.Tensor) -> torch.Tensor:
        count = int(np.prod(scales.shape))
        symbols = range_decode(data, count, self.symbol_models(), self.build_indexes(scales))
        symbols = torch.from_numpy(symbols).reshape(scales.shape).to(means.device)
        return from_symbols(symbols, means, dtype=means.dtype)


def estimate_bits(symbols, model, scales=None, means=None):
    """
    Ideal code length of ``symbols`` in bits.

    Args:
        symbols: Integer symbols for a ``SymbolModel``; continuous (noisy or rounded)
            latents for a parametric prior.
        model: ``SymbolModel``, ``FactorizedPrior`` or ``GaussianConditional``.
        scales, means: Required for ``GaussianConditional``.

    Returns:
        float for a ``SymbolModel``; a differentiable scalar tensor for the priors.

    Raises:
        ModelError: If a symbol has zero probability under a ``SymbolModel``.
    """
    if isinstance(model, SymbolModel):
        return model.bits(symbols)
    if isinstance(model, FactorizedPrior):
        return bits_from_likelihoods(model.likelihood(symbols))
    if isinstance(model, GaussianConditional):
        if scales is None or means is None:
            raise ArgumentError("GaussianConditional needs scales and means.")
        return bits_from_likelihoods(model.likelihood(symbols, scales, means))
    raise ModelError(f"Unsupported entropy model {type(model).__name__}.")
