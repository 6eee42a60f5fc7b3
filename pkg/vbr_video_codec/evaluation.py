"""
Quality metrics, Bjøntegaard deltas and RD-curve files.

PSNR is reported on 8-bit planes. Sequence quality is the mean over frames of the
luma-weighted YUV 4:2:0 PSNR ``(6·Y + U + V) / 8``. BD figures use monotone
piecewise-cubic (PCHIP) interpolation, so curves with many points are handled
without the oscillation of a single cubic fit.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.interpolate import PchipInterpolator  # noqa: E402

from .constants import PSNR_PEAK_8BIT, RD_CSV_COLUMNS, YUV_PSNR_WEIGHTS  # noqa: E402
from .data_io import YuvFrame  # noqa: E402
from .exceptions import ArgumentError, DataIOError, EvaluationError  # noqa: E402

logger = logging.getLogger(__name__)

MIN_BD_POINTS = 4


def psnr(ref, test, peak: float = PSNR_PEAK_8BIT) -> float:
    """
    Peak signal-to-noise ratio in dB.

    Returns:
        float: ``math.inf`` when the planes are identical.

    Raises:
        ArgumentError: If the shapes differ.
    """
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ArgumentError(f"Plane shapes differ: {ref.shape} vs {test.shape}.")
    mse = float(np.mean((ref - test) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def weighted_psnr(psnr_y: float, psnr_u: float, psnr_v: float) -> float:
    wy, wu, wv = YUV_PSNR_WEIGHTS
    return (wy * psnr_y + wu * psnr_u + wv * psnr_v) / (wy + wu + wv)


def weighted_psnr_yuv420(ref: YuvFrame, test: YuvFrame, peak: float = PSNR_PEAK_8BIT) -> float:
    """Luma-weighted PSNR of one I420 frame."""
    values = [psnr(r, t, peak) for r, t in zip(ref.planes(), test.planes())]
    return weighted_psnr(*values)


def sequence_psnr(refs: Sequence[YuvFrame], tests: Sequence[YuvFrame], peak: float = PSNR_PEAK_8BIT) -> List[float]:
    """Per-frame weighted PSNR of two equally long sequences."""
    if len(refs) != len(tests):
        raise ArgumentError(f"Sequences differ in length: {len(refs)} vs {len(tests)}.")
    return [weighted_psnr_yuv420(r, t, peak) for r, t in zip(refs, tests)]


def bits_per_pixel(total_bits: float, width: int, height: int, frames: int) -> float:
    if width <= 0 or height <= 0 or frames <= 0:
        raise ArgumentError(f"Invalid dimensions {width}x{height}x{frames}.")
    return total_bits / (width * height * frames)


@dataclass(frozen=True)
class RDPoint:
    """``psnr`` may be ``math.inf`` for a lossless point; such points are left out of BD figures."""

    bpp: float
    psnr: float
    idx: Optional[int] = None

    def __post_init__(self):
        if not self.bpp > 0:
            raise ArgumentError(f"bpp must be positive, got {self.bpp}.")
        if math.isnan(self.psnr):
            raise ArgumentError("PSNR is NaN.")


@dataclass
class RDCurve:
    label: str
    points: List[RDPoint] = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.bpp)
        rates = [p.bpp for p in self.points]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ArgumentError(f"Curve '{self.label}' has repeated bpp values.")

    def __len__(self) -> int:
        return len(self.points)

    def finite(self) -> Tuple[np.ndarray, np.ndarray]:
        """Rates and qualities of the points with finite PSNR."""
        kept = [p for p in self.points if math.isfinite(p.psnr)]
        if len(kept) < len(self.points):
            logger.warning(f"Curve '{self.label}': {len(self.points) - len(kept)} infinite-PSNR point(s) skipped")
        return np.array([p.bpp for p in kept]), np.array([p.psnr for p in kept])


def _bd_inputs(curve: RDCurve) -> Tuple[np.ndarray, np.ndarray]:
    rates, quality = curve.finite()
    if len(rates) < MIN_BD_POINTS:
        raise ArgumentError(
            f"Curve '{curve.label}' has {len(rates)} usable point(s); at least {MIN_BD_POINTS} are needed."
        )
    return np.log10(rates), quality


def _mean_over(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    """Average of the PCHIP interpolant of ``y(x)`` over ``[lo, hi]``."""
    order = np.argsort(x)
    x, y = x[order], y[order]
    if np.any(np.diff(x) <= 0):
        raise EvaluationError("Curve is not strictly monotone in the integration variable.")
    integral = PchipInterpolator(x, y).integrate(lo, hi)
    return float(integral) / (hi - lo)


def _overlap(a: np.ndarray, b: np.ndarray, what: str) -> Tuple[float, float]:
    lo = max(a.min(), b.min())
    hi = min(a.max(), b.max())
    if hi <= lo:
        raise EvaluationError(f"Curves do not overlap in {what}.")
    return lo, hi


def bd_rate(anchor: RDCurve, test: RDCurve) -> float:
    """
    Bjøntegaard delta rate of ``test`` against ``anchor``, in percent.

    Log-rate is interpolated as a function of quality and averaged over the common
    quality interval. Negative values are bitrate savings.

    Raises:
        ArgumentError: If a curve has fewer than four finite points.
        EvaluationError: If the quality ranges do not overlap.
    """
    log_a, q_a = _bd_inputs(anchor)
    log_t, q_t = _bd_inputs(test)
    lo, hi = _overlap(q_a, q_t, "quality")
    delta = _mean_over(q_t, log_t, lo, hi) - _mean_over(q_a, log_a, lo, hi)
    return (10.0**delta - 1.0) * 100.0


def bd_psnr(anchor: RDCurve, test: RDCurve) -> float:
    """Bjøntegaard delta quality in dB over the common log-rate interval; positive is better."""
    log_a, q_a = _bd_inputs(anchor)
    log_t, q_t = _bd_inputs(test)
    lo, hi = _overlap(log_a, log_t, "rate")
    return _mean_over(log_t, q_t, lo, hi) - _mean_over(log_a, q_a, lo, hi)


def _format(value: float) -> str:
    return "inf" if math.isinf(value) else repr(float(value))


def write_rd_csv(curves: Iterable[RDCurve], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=RD_CSV_COLUMNS)
        writer.writeheader()
        for curve in curves:
            for p in curve.points:
                writer.writerow(
                    {"label": curve.label, "idx": "" if p.idx is None else p.idx, "bpp": _format(p.bpp),
                     "psnr": _format(p.psnr)}
                )
    return path


def read_rd_csv(path) -> List[RDCurve]:
    """
    Read curves written by ``write_rd_csv`` or supplied for an external anchor codec.

    Raises:
        DataIOError: If the file is missing or lacks the expected columns.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            missing = {"label", "bpp", "psnr"} - set(reader.fieldnames or [])
            if missing:
                raise DataIOError(f"'{path}' lacks column(s) {sorted(missing)}.")
            grouped: Dict[str, List[RDPoint]] = {}
            for row in reader:
                idx = row.get("idx") or None
                point = RDPoint(
                    bpp=float(row["bpp"]),
                    psnr=float(row["psnr"]),
                    idx=int(idx) if idx is not None else None,
                )
                grouped.setdefault(row["label"], []).append(point)
    except OSError as e:
        raise DataIOError(f"Cannot read RD file '{path}': {e}") from e
    except ValueError as e:
        raise DataIOError(f"Malformed RD file '{path}': {e}") from e
    return [RDCurve(label, points) for label, points in grouped.items()]


def plot_rd(curves: Iterable[RDCurve], path, title: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    try:
        for curve in curves:
            rates, quality = curve.finite()
            ax.plot(rates, quality, marker="o", markersize=3, label=curve.label)
        ax.set_xlabel("bpp")
        ax.set_ylabel("YUV PSNR (dB)")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    logger.info(f"RD plot written to {path}")
    return path


def emit_rd(curves: Sequence[RDCurve], path) -> Tuple[Path, Path]:
    """
    Write ``<path>.csv`` and ``<path>.png`` for the given curves.

    Returns:
        tuple: CSV path and image path.
    """
    base = Path(path)
    if base.suffix in (".csv", ".png"):
        base = base.with_suffix("")
    csv_path = write_rd_csv(curves, base.with_suffix(".csv"))
    png_path = plot_rd(curves, base.with_suffix(".png"))
    return csv_path, png_path
