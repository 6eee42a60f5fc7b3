"""Tests for vbr_video_codec.container module."""

import pytest


def _container(frames=3):
    from vbr_video_codec.container import Container, ContainerHeader, FrameRecord

    header = ContainerHeader(width=30, height=18, frame_count=frames, intra_period=-1, q_idx=21)
    records = [FrameRecord(0, b"", b"intra-payload")]
    records += [FrameRecord(1, bytes([t]) * t, b"ctx" * t) for t in range(1, frames)]
    return Container(header, records)


# =============================================================================
# TestHeader - 4 tests
# =============================================================================


class TestHeader:
    """Test the fixed-size container header."""

    def test_random_headers_round_trip(self, rng):
        """Packed headers unpack to the same fields."""
        from vbr_video_codec.container import HEADER, ContainerHeader

        for _ in range(50):
            header = ContainerHeader(
                width=int(rng.integers(1, 0xFFFF)),
                height=int(rng.integers(1, 0xFFFF)),
                frame_count=int(rng.integers(1, 0xFFFF)),
                intra_period=int(rng.choice([-1, int(rng.integers(1, 0x7FFF))])),
                q_idx=int(rng.integers(0, 64)),
            )
            data = header.pack()
            assert len(data) == HEADER.size == 18
            assert ContainerHeader.unpack(data) == header

    def test_bad_magic(self):
        """A foreign file is rejected."""
        from vbr_video_codec.container import ContainerHeader
        from vbr_video_codec.exceptions import BitstreamError

        data = b"RIFF" + ContainerHeader(16, 16, 1).pack()[4:]
        with pytest.raises(BitstreamError, match="magic"):
            ContainerHeader.unpack(data)

    def test_bad_version(self):
        """Unknown versions are rejected."""
        from vbr_video_codec.container import ContainerHeader
        from vbr_video_codec.exceptions import BitstreamError

        data = bytearray(ContainerHeader(16, 16, 1).pack())
        data[4] = 9
        with pytest.raises(BitstreamError, match="version"):
            ContainerHeader.unpack(bytes(data))

    @pytest.mark.parametrize(
        "fields",
        [
            {"width": 0, "height": 16, "frame_count": 1},
            {"width": 16, "height": 16, "frame_count": 0},
            {"width": 16, "height": 16, "frame_count": 1, "intra_period": 0},
            {"width": 16, "height": 16, "frame_count": 1, "q_idx": 256},
        ],
    )
    def test_invalid_fields(self, fields):
        """Fields that do not fit the header are rejected."""
        from vbr_video_codec.container import ContainerHeader
        from vbr_video_codec.exceptions import ArgumentError

        with pytest.raises(ArgumentError):
            ContainerHeader(**fields)


# =============================================================================
# TestRecords - 6 tests
# =============================================================================


class TestRecords:
    """Test frame records and whole containers."""

    def test_serialize_then_parse(self):
        """Records keep their types and payloads."""
        from vbr_video_codec.container import parse, serialize

        container = _container()
        parsed = parse(serialize(container))
        assert parsed.header == container.header
        assert parsed.records == container.records

    def test_bits_and_bpp(self):
        """Rates count payload bytes only, over the unpadded frame area."""
        container = _container(frames=2)
        assert container.total_bits == 8 * (len(b"intra-payload") + 1 + 3)
        assert container.bpp == pytest.approx(container.total_bits / (30 * 18 * 2))

    def test_intra_record_without_motion(self):
        """I-frame records cannot carry motion bytes."""
        from vbr_video_codec.container import FrameRecord
        from vbr_video_codec.exceptions import ArgumentError

        with pytest.raises(ArgumentError):
            FrameRecord(0, b"mv", b"ctx")

    def test_truncated_record_named(self):
        """Truncation reports the record it hit."""
        from vbr_video_codec.container import parse, serialize
        from vbr_video_codec.exceptions import BitstreamError

        data = serialize(_container())
        with pytest.raises(BitstreamError, match="Record 2: truncated"):
            parse(data[:-2])

    def test_trailing_bytes(self):
        """Bytes after the last record are rejected."""
        from vbr_video_codec.container import parse, serialize
        from vbr_video_codec.exceptions import BitstreamError

        with pytest.raises(BitstreamError, match="trailing"):
            parse(serialize(_container()) + b"\x00")

    def test_record_count_mismatch(self):
        """The header frame count must match the records."""
        from vbr_video_codec.container import Container, serialize
        from vbr_video_codec.exceptions import ArgumentError

        container = _container()
        with pytest.raises(ArgumentError):
            serialize(Container(container.header, container.records[:2]))


# =============================================================================
# TestContainerFiles - 2 tests
# =============================================================================


class TestContainerFiles:
    """Test reading and writing container files."""

    def test_file_round_trip(self, tmp_path):
        """A written container reads back unchanged."""
        from vbr_video_codec.container import read_container, write_container

        container = _container()
        path = write_container(tmp_path / "clip.evc", container)
        loaded = read_container(path)
        assert loaded.records == container.records

    def test_missing_file(self, tmp_path):
        """A missing file raises DataIOError."""
        from vbr_video_codec.container import read_container
        from vbr_video_codec.exceptions import DataIOError

        with pytest.raises(DataIOError):
            read_container(tmp_path / "absent.evc")
