"""
Byte-oriented range coder with carry propagation.

The encoder keeps a 33-bit ``low`` and a 32-bit ``range``; bytes are delayed in a
one-byte cache plus a run of pending 0xFF bytes until a carry can no longer reach
them. A symbol with cumulative frequency ``c`` and frequency ``f`` (total 2**16)
narrows the interval to ``[R*c >> 16, R*(c+f) >> 16)`` relative to ``low``, so no
range is lost to truncation.
"""

import bisect
import logging
from typing import Optional, Sequence, Union

import numpy as np

from ..constants import FREQ_PRECISION_BITS
from ..exceptions import ArgumentError, BitstreamError, EncodeError
from .symbol_models import SymbolModel

logger = logging.getLogger(__name__)

TOP = 1 << 24
MASK32 = 0xFFFFFFFF
FLUSH_BYTES = 5


class RangeEncoder:
    """Incremental encoder; call ``encode`` per symbol and ``finish`` once."""

    def __init__(self):
        self.low = 0
        self.range = MASK32
        self.cache = 0
        self.cache_size = 1
        self.output = bytearray()
        self._finished = False

    def _shift_low(self):
        if self.low < 0xFF000000 or self.low > MASK32:
            carry = self.low >> 32
            temp = self.cache
            while True:
                self.output.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if self.cache_size == 0:
                    break
            self.cache = (self.low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def encode_interval(self, start: int, freq: int):
        lo = (self.range * start) >> FREQ_PRECISION_BITS
        hi = (self.range * (start + freq)) >> FREQ_PRECISION_BITS
        self.low += lo
        self.range = hi - lo
        while self.range < TOP:
            self.range <<= 8
            self._shift_low()

    def encode(self, symbol: int, model: SymbolModel):
        index = symbol - model.offset
        if not 0 <= index < model.num_symbols:
            raise EncodeError(f"Symbol {symbol} outside support {model.min_symbol}..{model.max_symbol}.")
        cdf = model.cdf_list
        self.encode_interval(cdf[index], cdf[index + 1] - cdf[index])

    def finish(self) -> bytes:
        if not self._finished:
            for _ in range(FLUSH_BYTES):
                self._shift_low()
            self._finished = True
        return bytes(self.output)


class RangeDecoder:
    """Decoder mirroring ``RangeEncoder``; reading past the end raises ``BitstreamError``."""

    def __init__(self, data: bytes):
        self.data = memoryview(bytes(data))
        self.pos = 0
        self.range = MASK32
        self.code = 0
        for _ in range(FLUSH_BYTES):
            self.code = (self.code << 8) | self._next_byte()
        if self.code > MASK32:
            raise BitstreamError("Invalid range coder preamble.")

    def _next_byte(self) -> int:
        if self.pos >= len(self.data):
            raise BitstreamError(f"Bitstream truncated after {len(self.data)} bytes.")
        value = self.data[self.pos]
        self.pos += 1
        return value

    def decode(self, model: SymbolModel) -> int:
        cdf = model.cdf_list
        r = self.range
        target = (((self.code + 1) << FREQ_PRECISION_BITS) - 1) // r
        index = bisect.bisect_right(cdf, target) - 1
        if not 0 <= index < model.num_symbols:
            raise BitstreamError("Corrupt bitstream: decoded value outside the frequency table.")
        lo = (r * cdf[index]) >> FREQ_PRECISION_BITS
        hi = (r * cdf[index + 1]) >> FREQ_PRECISION_BITS
        self.code -= lo
        self.range = hi - lo
        while self.range < TOP:
            self.range <<= 8
            self.code = ((self.code << 8) | self._next_byte()) & MASK32
        return index + model.offset

    @property
    def bytes_consumed(self) -> int:
        return self.pos


ModelArg = Union[SymbolModel, Sequence[SymbolModel]]


def _model_picker(model: ModelArg, indexes: Optional[np.ndarray], count: int):
    if isinstance(model, SymbolModel):
        return lambda i: model
    if indexes is None:
        raise ArgumentError("A list of symbol models needs per-symbol indexes.")
    indexes = np.asarray(indexes, dtype=np.int64).ravel()
    if indexes.size != count:
        raise ArgumentError(f"Got {indexes.size} model indexes for {count} symbols.")
    if count and (indexes.min() < 0 or indexes.max() >= len(model)):
        raise ArgumentError("Model index out of range.")
    table = list(model)
    index_list = indexes.tolist()
    return lambda i: table[index_list[i]]


def range_encode(symbols, model: ModelArg, indexes=None) -> bytes:
    """
    Range-code a sequence of integer symbols.

    Args:
        symbols: Integer symbols (any shape; flattened in C order).
        model: One ``SymbolModel`` for all symbols, or a list of models selected per
            symbol through ``indexes``.
        indexes: Per-symbol model index when ``model`` is a list.

    Returns:
        bytes: The coded stream. An empty input still yields the 5 flush bytes.

    Raises:
        EncodeError: If a symbol lies outside its model's support.
    """
    flat = np.asarray(symbols, dtype=np.int64).ravel()
    pick = _model_picker(model, indexes, flat.size)
    encoder = RangeEncoder()
    for i, symbol in enumerate(flat.tolist()):
        encoder.encode(symbol, pick(i))
    data = encoder.finish()
    logger.debug(f"Range coded {flat.size} symbols into {len(data)} bytes")
    return data


def range_decode(data: bytes, count: int, model: ModelArg, indexes=None) -> np.ndarray:
    """
    Decode exactly ``count`` symbols.

    Raises:
        BitstreamError: If the stream is truncated or inconsistent with the model.
    """
    if count < 0:
        raise ArgumentError(f"Symbol count must be non-negative, got {count}.")
    pick = _model_picker(model, indexes, count)
    decoder = RangeDecoder(data)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = decoder.decode(pick(i))
    return out
