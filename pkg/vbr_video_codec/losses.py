"""
Training objectives.

Distortion is the per-pixel mean squared error and rates are bits per pixel. The
multiplier sits on the distortion term: ``lam * D + R``.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import torch
from torch import Tensor

from .exceptions import ArgumentError

logger = logging.getLogger(__name__)

Scalar = Union[Tensor, float]


@dataclass
class LossBreakdown:
    """Components of one training objective, as logged."""

    distortion: float
    bpp_mv: float
    bpp_context: float
    total: float

    def as_row(self, stage: int, step: int, idx: int, lam: float) -> dict:
        return {"stage": stage, "step": step, "idx": idx, "lambda": lam, **asdict(self)}

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in asdict(self).values())


def _check_shapes(x: Tensor, y: Tensor) -> None:
    if x.shape != y.shape:
        raise ArgumentError(f"Cannot compare frames of shape {tuple(x.shape)} and {tuple(y.shape)}.")


def _mse(x: Tensor, y: Tensor) -> Tensor:
    _check_shapes(x, y)
    return torch.mean((x - y) ** 2)


def _sample_mse(x: Tensor, y: Tensor) -> Tensor:
    _check_shapes(x, y)
    return torch.mean((x - y) ** 2, dim=tuple(range(1, x.dim())))


def rd_objective(distortion: Scalar, bpp: Scalar, lam) -> Scalar:
    """``lam * distortion + bpp``."""
    return lam * distortion + bpp


def _weighted_rd(x: Tensor, y: Tensor, bpp: Scalar, lam) -> Tensor:
    # lam may hold one multiplier per batch element
    if isinstance(lam, Tensor) and lam.dim() > 0:
        return torch.mean(lam * _sample_mse(x, y)) + bpp
    return rd_objective(_mse(x, y), bpp, lam)


def loss_me_d(x_t: Tensor, warped: Tensor) -> Tensor:
    """Mean squared error between the frame and its motion-compensated prediction."""
    return _mse(x_t, warped)


def loss_me_rd(x_t: Tensor, warped: Tensor, bpp_mv: Scalar, lam) -> Tensor:
    return _weighted_rd(x_t, warped, bpp_mv, lam)


def loss_rec_d(x_t: Tensor, x_hat: Tensor) -> Tensor:
    """Mean squared error of the full reconstruction."""
    return _mse(x_t, x_hat)


def loss_rec_rd(x_t: Tensor, x_hat: Tensor, bpp_context: Scalar, lam) -> Tensor:
    return _weighted_rd(x_t, x_hat, bpp_context, lam)


def loss_all(rec_rd: Scalar, bpp_mv: Scalar) -> Scalar:
    """Reconstruction objective plus motion rate."""
    return rec_rd + bpp_mv


def loss_avg(losses: Sequence[Scalar], t: Optional[int] = None) -> Scalar:
    """
    Mean of per-frame ``loss_all`` values over the coded P-frames.

    Raises:
        ArgumentError: If the list is empty or ``t`` disagrees with its length.
    """
    if not losses:
        raise ArgumentError("Cannot average an empty list of losses.")
    if t is not None and t != len(losses):
        raise ArgumentError(f"Expected {t} per-frame losses, got {len(losses)}.")
    total = losses[0]
    for value in losses[1:]:
        total = total + value
    return total / len(losses)
