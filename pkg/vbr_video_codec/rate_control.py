"""
Rate control: the piecewise linear index sampler and the exponential
interpolation of the Lagrange multiplier and the feature gains.

Rate indices are 0-based, ``idx`` in ``0..n-1``. The index range is split into four
disjoint quarters; quarter ``k`` receives probability ``m**k / (1 + m + m**2 + m**3)``
which is spread uniformly over its ``n / 4`` indices.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import torch
from torch import nn

from .exceptions import ArgumentError, ConfigurationError

logger = logging.getLogger(__name__)

SEGMENTS = 4


@dataclass(frozen=True)
class SamplerConfig:
    """Parameters of the rate sampler and of the lambda/gain interpolation."""

    m: float = 2.0
    n: int = 64
    lambda_min: float = 0.002
    lambda_max: float = 0.25
    q_min: Tuple[float, ...] = (0.5,)
    q_max: Tuple[float, ...] = (2.0,)

    def validate(self) -> "SamplerConfig":
        """
        Check the configuration.

        Raises:
            ConfigurationError: If any field is outside its valid range.
        """
        if not isinstance(self.m, (int, float)) or not math.isfinite(self.m) or self.m <= 0:
            raise ConfigurationError(f"Segment ratio m must be positive, got {self.m}.")
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < SEGMENTS or self.n % SEGMENTS:
            raise ConfigurationError(f"Index count n must be a positive multiple of 4, got {self.n}.")
        if not 0 < self.lambda_min < self.lambda_max:
            raise ConfigurationError(
                f"Lambda bounds must satisfy 0 < lambda_min < lambda_max, got {self.lambda_min}, {self.lambda_max}."
            )
        q_min = np.asarray(self.q_min, dtype=np.float64)
        q_max = np.asarray(self.q_max, dtype=np.float64)
        if q_min.shape != q_max.shape or q_min.ndim != 1 or q_min.size == 0:
            raise ConfigurationError("Gain bounds q_min and q_max must be non-empty vectors of equal length.")
        if np.any(q_min <= 0) or np.any(q_min >= q_max):
            raise ConfigurationError("Gain bounds must satisfy 0 < q_min < q_max elementwise.")
        return self

    @property
    def segment_size(self) -> int:
        return self.n // SEGMENTS


@dataclass(frozen=True)
class RateControlPoint:
    """A rate index with its Lagrange multiplier and gain vector."""

    idx: int
    lam: float
    q: Tuple[float, ...]


def segment_weights(cfg: SamplerConfig) -> np.ndarray:
    """
    Probability mass of each index quarter.

    Args:
        cfg (SamplerConfig): Sampler configuration.

    Returns:
        np.ndarray: Four weights ``m**k / (1 + m + m**2 + m**3)``, summing to one.
    """
    cfg.validate()
    powers = float(cfg.m) ** np.arange(SEGMENTS, dtype=np.float64)
    return powers / powers.sum()


def sample_indices(cfg: SamplerConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Draw ``size`` rate indices: a quarter by its weight, then an index uniformly inside it.

    Args:
        cfg (SamplerConfig): Sampler configuration.
        rng (np.random.Generator): Seeded generator; the only state this mutates.
        size (int): Number of draws.

    Returns:
        np.ndarray: Integer indices in ``0..n-1``.
    """
    weights = segment_weights(cfg)
    segments = rng.choice(SEGMENTS, size=size, p=weights)
    offsets = rng.integers(0, cfg.segment_size, size=size)
    return segments * cfg.segment_size + offsets


def sample_idx(cfg: SamplerConfig, rng: np.random.Generator) -> int:
    """Draw a single rate index."""
    return int(sample_indices(cfg, rng, 1)[0])


def _check_idx(cfg: SamplerConfig, idx) -> int:
    if isinstance(idx, (bool, np.bool_)) or not isinstance(idx, (int, np.integer)):
        raise ArgumentError(f"Rate index must be an integer, got {idx!r}.")
    if not 0 <= idx <= cfg.n - 1:
        raise ArgumentError(f"Rate index {idx} is outside 0..{cfg.n - 1}.")
    return int(idx)


def _fraction(cfg: SamplerConfig, idx: int) -> float:
    return idx / (cfg.n - 1)


def lambda_for_idx(cfg: SamplerConfig, idx) -> float:
    """
    Lagrange multiplier for a rate index, ``lambda_min * (lambda_max / lambda_min) ** (idx / (n - 1))``.

    Raises:
        ArgumentError: If ``idx`` is outside ``0..n-1``.
    """
    cfg.validate()
    idx = _check_idx(cfg, idx)
    if idx == 0:
        return float(cfg.lambda_min)
    if idx == cfg.n - 1:
        return float(cfg.lambda_max)
    return float(cfg.lambda_min * (cfg.lambda_max / cfg.lambda_min) ** _fraction(cfg, idx))


def q_for_idx(cfg: SamplerConfig, idx) -> np.ndarray:
    """
    Per-channel gain vector for a rate index, interpolated in log space between ``q_min`` and ``q_max``.

    Raises:
        ArgumentError: If ``idx`` is outside ``0..n-1``.
    """
    cfg.validate()
    idx = _check_idx(cfg, idx)
    q_min = np.asarray(cfg.q_min, dtype=np.float64)
    q_max = np.asarray(cfg.q_max, dtype=np.float64)
    if idx == 0:
        return q_min.copy()
    if idx == cfg.n - 1:
        return q_max.copy()
    return q_min * (q_max / q_min) ** _fraction(cfg, idx)


def rate_point(cfg: SamplerConfig, idx) -> RateControlPoint:
    """Bundle an index with its lambda and gain vector."""
    return RateControlPoint(
        idx=_check_idx(cfg, idx),
        lam=lambda_for_idx(cfg, idx),
        q=tuple(float(v) for v in q_for_idx(cfg, idx)),
    )


def rd_indices(n: int, count: int = 4) -> Sequence[int]:
    """
    Evenly spaced indices for an RD sweep, endpoints included.

    ``rd_indices(64, 4)`` is ``[0, 21, 42, 63]``.
    """
    if count < 1 or count > n:
        raise ArgumentError(f"Cannot pick {count} distinct indices out of {n}.")
    if count == 1:
        return [n - 1]
    return [int(v) for v in np.round(np.linspace(0, n - 1, count))]


class RateGain(nn.Module):
    """
    Learnable per-channel gains for one latent tensor.

    The encoder side multiplies latents by ``q(idx)`` before quantization and the decoder
    side divides by it afterwards. Bounds are stored in log space with a positive span
    so ``q_min < q_max`` holds throughout training.
    """

    def __init__(self, channels: int, n: int = 64, q_init_min: float = 0.5, q_init_max: float = 2.0):
        super().__init__()
        if not 0 < q_init_min < q_init_max:
            raise ConfigurationError("Gain initialization must satisfy 0 < q_init_min < q_init_max.")
        self.n = n
        span = math.log(q_init_max) - math.log(q_init_min)
        self.log_q_min = nn.Parameter(torch.full((channels,), math.log(q_init_min)))
        # inverse softplus of the initial log span
        self.raw_span = nn.Parameter(torch.full((channels,), math.log(math.expm1(span))))

    def bounds(self) -> Tuple[torch.Tensor, torch.Tensor]:
        """Current ``(q_min, q_max)`` vectors."""
        log_q_max = self.log_q_min + nn.functional.softplus(self.raw_span)
        return self.log_q_min.exp(), log_q_max.exp()

    def forward(self, idx: torch.Tensor) -> torch.Tensor:
        """
        Gains for a batch of indices.

        Args:
            idx (torch.Tensor): Shape ``(B,)`` rate indices.

        Returns:
            torch.Tensor: Shape ``(B, C, 1, 1)`` positive gains.
        """
        t = idx.to(self.log_q_min.dtype).reshape(-1, 1) / (self.n - 1)
        log_q = self.log_q_min + t * nn.functional.softplus(self.raw_span)
        return log_q.exp()[:, :, None, None]

    def scale(self, y: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
        return y * self(idx)

    def unscale(self, y_hat: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
        return y_hat / self(idx)

    def sampler_config(self, base: SamplerConfig) -> SamplerConfig:
        """Copy ``base`` with this module's learned gain bounds."""
        q_min, q_max = self.bounds()
        return SamplerConfig(
            m=base.m,
            n=base.n,
            lambda_min=base.lambda_min,
            lambda_max=base.lambda_max,
            q_min=tuple(q_min.detach().cpu().double().tolist()),
            q_max=tuple(q_max.detach().cpu().double().tolist()),
        )
