"""
Bitstream container.

Layout (little-endian)::

    header  magic "EVNV" | version u8 | width u16 | height u16 | frame_count u16 |
            intra_period i16 | q_idx u8 | reserved u32
    record  frame_type u8 | mv_len u32 | mv bytes | ctx_len u32 | ctx bytes

Width and height are the original dimensions before padding. I-frame records carry
an empty motion payload.
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

from .constants import CONTAINER_MAGIC, CONTAINER_VERSION, FRAME_TYPE_I, FRAME_TYPE_P
from .exceptions import ArgumentError, BitstreamError, DataIOError

logger = logging.getLogger(__name__)

HEADER = struct.Struct("<4sBHHHhBI")
RECORD_TYPE = struct.Struct("<BI")
LENGTH = struct.Struct("<I")


@dataclass(frozen=True)
class ContainerHeader:
    width: int
    height: int
    frame_count: int
    intra_period: int = -1
    q_idx: int = 0
    version: int = CONTAINER_VERSION
    reserved: int = 0

    def __post_init__(self):
        if not (0 < self.width <= 0xFFFF and 0 < self.height <= 0xFFFF):
            raise ArgumentError(f"Frame size {self.width}x{self.height} does not fit the header.")
        if not 0 < self.frame_count <= 0xFFFF:
            raise ArgumentError(f"Frame count {self.frame_count} does not fit the header.")
        if self.intra_period == 0 or not -1 <= self.intra_period <= 0x7FFF:
            raise ArgumentError(f"Intra period must be -1 or positive, got {self.intra_period}.")
        if not 0 <= self.q_idx <= 0xFF:
            raise ArgumentError(f"q_idx {self.q_idx} does not fit in one byte.")

    def pack(self) -> bytes:
        return HEADER.pack(
            CONTAINER_MAGIC,
            self.version,
            self.width,
            self.height,
            self.frame_count,
            self.intra_period,
            self.q_idx,
            self.reserved,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "ContainerHeader":
        """
        Raises:
            BitstreamError: On a short header, wrong magic or unsupported version.
        """
        if len(data) < HEADER.size:
            raise BitstreamError(f"Header needs {HEADER.size} bytes, got {len(data)}.")
        magic, version, width, height, frames, intra_period, q_idx, reserved = HEADER.unpack_from(data)
        if magic != CONTAINER_MAGIC:
            raise BitstreamError(f"Bad magic {magic!r}, expected {CONTAINER_MAGIC!r}.")
        if version != CONTAINER_VERSION:
            raise BitstreamError(f"Unsupported container version {version}.")
        try:
            return cls(width, height, frames, intra_period, q_idx, version, reserved)
        except ArgumentError as e:
            raise BitstreamError(f"Invalid header: {e}") from e


@dataclass(frozen=True)
class FrameRecord:
    frame_type: int
    mv: bytes = b""
    ctx: bytes = b""

    def __post_init__(self):
        if self.frame_type not in (FRAME_TYPE_I, FRAME_TYPE_P):
            raise ArgumentError(f"Unknown frame type {self.frame_type}.")
        if self.frame_type == FRAME_TYPE_I and self.mv:
            raise ArgumentError("I-frame records carry no motion payload.")

    @property
    def is_intra(self) -> bool:
        return self.frame_type == FRAME_TYPE_I

    @property
    def bits(self) -> int:
        return 8 * (len(self.mv) + len(self.ctx))

    def pack(self) -> bytes:
        return b"".join(
            [RECORD_TYPE.pack(self.frame_type, len(self.mv)), self.mv, LENGTH.pack(len(self.ctx)), self.ctx]
        )


@dataclass
class Container:
    header: ContainerHeader
    records: List[FrameRecord] = field(default_factory=list)

    @property
    def total_bits(self) -> int:
        return sum(r.bits for r in self.records)

    @property
    def bpp(self) -> float:
        h = self.header
        return self.total_bits / (h.width * h.height * h.frame_count)


def serialize(container: Container) -> bytes:
    """
    Raises:
        ArgumentError: If the record count disagrees with the header.
    """
    if len(container.records) != container.header.frame_count:
        raise ArgumentError(
            f"Header announces {container.header.frame_count} frames, got {len(container.records)} records."
        )
    if container.records and not container.records[0].is_intra:
        raise ArgumentError("The first record must be an I-frame.")
    return container.header.pack() + b"".join(r.pack() for r in container.records)


def _take(data: bytes, pos: int, size: int, record: int, what: str) -> bytes:
    if pos + size > len(data):
        raise BitstreamError(f"Record {record}: truncated {what} ({len(data) - pos} of {size} bytes).")
    return data[pos : pos + size]


def parse(data: bytes) -> Container:
    """
    Raises:
        BitstreamError: On a malformed header or a truncated, invalid or surplus record.
    """
    header = ContainerHeader.unpack(data)
    pos = HEADER.size
    records = []
    for i in range(header.frame_count):
        frame_type, mv_len = RECORD_TYPE.unpack(_take(data, pos, RECORD_TYPE.size, i, "record header"))
        pos += RECORD_TYPE.size
        mv = _take(data, pos, mv_len, i, "motion payload")
        pos += mv_len
        (ctx_len,) = LENGTH.unpack(_take(data, pos, LENGTH.size, i, "context length"))
        pos += LENGTH.size
        ctx = _take(data, pos, ctx_len, i, "context payload")
        pos += ctx_len
        try:
            records.append(FrameRecord(frame_type, bytes(mv), bytes(ctx)))
        except ArgumentError as e:
            raise BitstreamError(f"Record {i}: {e}") from e
    if records and not records[0].is_intra:
        raise BitstreamError("Record 0: the first frame must be an I-frame.")
    if pos != len(data):
        raise BitstreamError(f"{len(data) - pos} trailing byte(s) after record {header.frame_count - 1}.")
    return Container(header, records)


def write_container(path, container: Container) -> Path:
    path = Path(path)
    try:
        path.write_bytes(serialize(container))
    except OSError as e:
        raise DataIOError(f"Cannot write '{path}': {e}") from e
    logger.info(f"Wrote {container.header.frame_count} frame(s), {container.total_bits // 8} payload bytes to {path}")
    return path


def read_container(path) -> Container:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"Cannot read '{path}': {e}") from e
    return parse(data)
