"""Discrete symbol distributions as 16-bit cumulative frequency tables."""

import logging
from typing import Optional

import numpy as np

from ..constants import DEFAULT_SUPPORT, FREQ_TOTAL
from ..exceptions import ArgumentError, ModelError

logger = logging.getLogger(__name__)


class SymbolModel:
    """
    Static distribution over the integer symbols ``offset .. offset + K - 1``.

    ``cdf`` has ``K + 1`` entries, starts at 0, ends at ``FREQ_TOTAL`` (2**16) and is
    strictly increasing, so every in-support symbol has a frequency of at least one.
    """

    def __init__(self, cdf, offset: int = 0):
        cdf = np.asarray(cdf, dtype=np.int64)
        if cdf.ndim != 1 or cdf.size < 2:
            raise ModelError("Cumulative table needs at least two entries.")
        if cdf[0] != 0 or cdf[-1] != FREQ_TOTAL:
            raise ModelError(f"Cumulative table must run from 0 to {FREQ_TOTAL}, got {cdf[0]}..{cdf[-1]}.")
        if np.any(np.diff(cdf) < 1):
            raise ModelError("Cumulative table must be strictly increasing.")
        self.cdf = cdf
        self.offset = int(offset)
        self._cdf_list = [int(c) for c in cdf]

    def __repr__(self):
        return f"SymbolModel(symbols={self.num_symbols}, offset={self.offset})"

    def __eq__(self, other):
        if not isinstance(other, SymbolModel):
            return NotImplemented
        return self.offset == other.offset and np.array_equal(self.cdf, other.cdf)

    __hash__ = None

    @property
    def num_symbols(self) -> int:
        return self.cdf.size - 1

    @property
    def min_symbol(self) -> int:
        return self.offset

    @property
    def max_symbol(self) -> int:
        return self.offset + self.num_symbols - 1

    @property
    def frequencies(self) -> np.ndarray:
        return np.diff(self.cdf)

    @property
    def cdf_list(self) -> list:
        """The table as Python ints, for the coder's inner loop."""
        return self._cdf_list

    def probabilities(self) -> np.ndarray:
        return self.frequencies / FREQ_TOTAL

    def contains(self, symbols) -> np.ndarray:
        symbols = np.asarray(symbols)
        return (symbols >= self.min_symbol) & (symbols <= self.max_symbol)

    def bits(self, symbols) -> float:
        """
        Ideal code length of ``symbols`` under this model.

        Raises:
            ModelError: If any symbol is outside the support (zero probability).
        """
        symbols = np.asarray(symbols, dtype=np.int64).ravel()
        if symbols.size == 0:
            return 0.0
        inside = self.contains(symbols)
        if not inside.all():
            bad = symbols[~inside][0]
            raise ModelError(f"Symbol {bad} has zero probability (support {self.min_symbol}..{self.max_symbol}).")
        freqs = self.frequencies[symbols - self.offset]
        return float(np.sum(np.log2(FREQ_TOTAL) - np.log2(freqs)))

    def entropy(self) -> float:
        """Entropy in bits per symbol."""
        p = self.probabilities()
        return float(-np.sum(p * np.log2(p)))

    @classmethod
    def from_pmf(cls, pmf, offset: int = 0) -> "SymbolModel":
        """
        Quantize a probability vector to a frequency table.

        Each symbol gets ``floor(p * (T - K)) + 1``; the leftover counts go to the
        symbols with the largest fractional parts. Zero entries therefore keep a
        frequency of one.

        Args:
            pmf: Non-negative weights, normalized here.
            offset (int): Value of the first symbol.

        Returns:
            SymbolModel: The quantized model.
        """
        pmf = np.asarray(pmf, dtype=np.float64).ravel()
        k = pmf.size
        if k == 0 or k > FREQ_TOTAL:
            raise ArgumentError(f"Cannot build a 16-bit table for {k} symbols.")
        if not np.all(np.isfinite(pmf)) or np.any(pmf < 0) or pmf.sum() <= 0:
            raise ArgumentError("Probabilities must be finite, non-negative and not all zero.")
        scaled = pmf / pmf.sum() * (FREQ_TOTAL - k)
        base = np.floor(scaled).astype(np.int64)
        freqs = base + 1
        remainder = FREQ_TOTAL - int(freqs.sum())
        if remainder > 0:
            order = np.argsort(-(scaled - base), kind="stable")
            freqs[np.resize(order, remainder)] += 1
        cdf = np.concatenate([[0], np.cumsum(freqs)])
        return cls(cdf, offset)

    @classmethod
    def uniform(cls, k: int, offset: int = 0) -> "SymbolModel":
        """Equal frequencies over ``k`` symbols (exact when ``k`` divides 2**16)."""
        return cls.from_pmf(np.ones(k), offset)

    @classmethod
    def for_support(cls, support: int = DEFAULT_SUPPORT, pmf: Optional[np.ndarray] = None) -> "SymbolModel":
        """Model over ``[-support, support]``, uniform unless ``pmf`` is given."""
        k = 2 * support + 1
        if pmf is None:
            return cls.uniform(k, -support)
        if len(pmf) != k:
            raise ArgumentError(f"Expected {k} probabilities for support {support}, got {len(pmf)}.")
        return cls.from_pmf(pmf, -support)
