"""Tests for vbr_video_codec.evaluation module."""

import math

import numpy as np
import pytest


def _curve(label, rates, quality):
    from vbr_video_codec.evaluation import RDCurve, RDPoint

    return RDCurve(label, [RDPoint(bpp=r, psnr=q) for r, q in zip(rates, quality)])


ANCHOR_RATES = [0.05, 0.1, 0.2, 0.4]
ANCHOR_PSNR = [30.0, 32.0, 34.0, 36.0]

# =============================================================================
# TestPsnr - 5 tests
# =============================================================================


class TestPsnr:
    """Test PSNR and its YUV weighting."""

    def test_identical_is_infinite(self):
        """Identical planes give infinite PSNR."""
        from vbr_video_codec.evaluation import psnr

        plane = np.full((8, 8), 77, dtype=np.uint8)
        assert psnr(plane, plane) == math.inf

    def test_closed_form(self):
        """An error of 16 levels on every pixel gives 10*log10(255^2 / 256)."""
        from vbr_video_codec.evaluation import psnr

        ref = np.zeros((4, 4))
        assert psnr(ref, ref + 16) == pytest.approx(10 * math.log10(255**2 / 256))

    def test_weighted_average(self):
        """Luma counts six times as much as each chroma plane."""
        from vbr_video_codec.evaluation import weighted_psnr

        assert weighted_psnr(40.0, 30.0, 30.0) == pytest.approx(37.5)

    def test_weighted_bounded_by_planes(self, rng):
        """The weighted value lies between the smallest and largest plane PSNR."""
        from vbr_video_codec.data_io import YuvFrame
        from vbr_video_codec.evaluation import psnr, weighted_psnr_yuv420

        def frame():
            return YuvFrame(
                rng.integers(0, 256, (8, 8), dtype=np.uint8),
                rng.integers(0, 256, (4, 4), dtype=np.uint8),
                rng.integers(0, 256, (4, 4), dtype=np.uint8),
            )

        for _ in range(20):
            a, b = frame(), frame()
            values = [psnr(x, y) for x, y in zip(a.planes(), b.planes())]
            assert min(values) - 1e-9 <= weighted_psnr_yuv420(a, b) <= max(values) + 1e-9

    def test_shape_mismatch(self):
        """Planes of different size are rejected."""
        from vbr_video_codec.evaluation import psnr
        from vbr_video_codec.exceptions import ArgumentError

        with pytest.raises(ArgumentError):
            psnr(np.zeros((4, 4)), np.zeros((4, 2)))


# =============================================================================
# TestRDCurve - 3 tests
# =============================================================================


class TestRDCurve:
    """Test RD point and curve validation."""

    def test_sorted_by_rate(self):
        """Points are kept in increasing bpp order."""
        curve = _curve("a", [0.4, 0.1, 0.2], [36.0, 32.0, 34.0])
        assert [p.bpp for p in curve.points] == [0.1, 0.2, 0.4]

    def test_invalid_points(self):
        """Non-positive rates, NaN quality and repeated rates are rejected."""
        from vbr_video_codec.evaluation import RDPoint
        from vbr_video_codec.exceptions import ArgumentError

        with pytest.raises(ArgumentError):
            RDPoint(bpp=0.0, psnr=30.0)
        with pytest.raises(ArgumentError):
            RDPoint(bpp=0.1, psnr=math.nan)
        with pytest.raises(ArgumentError):
            _curve("a", [0.1, 0.1], [30.0, 31.0])

    def test_infinite_points_skipped(self):
        """Lossless points stay on the curve but leave the BD inputs."""
        curve = _curve("a", ANCHOR_RATES + [1.0], ANCHOR_PSNR + [math.inf])
        rates, quality = curve.finite()
        assert list(rates) == ANCHOR_RATES
        assert len(curve) == 5


# =============================================================================
# TestBjontegaard - 8 tests
# =============================================================================


class TestBjontegaard:
    """Test BD-rate and BD-PSNR."""

    def test_identical_curves(self):
        """A curve against itself saves nothing."""
        from vbr_video_codec.evaluation import bd_psnr, bd_rate

        anchor = _curve("a", ANCHOR_RATES, ANCHOR_PSNR)
        assert bd_rate(anchor, anchor) == pytest.approx(0.0, abs=1e-9)
        assert bd_psnr(anchor, anchor) == pytest.approx(0.0, abs=1e-9)

    def test_halved_rates(self):
        """Same quality at half the rate is a 50% saving."""
        from vbr_video_codec.evaluation import bd_rate

        anchor = _curve("a", ANCHOR_RATES, ANCHOR_PSNR)
        test = _curve("t", [r / 2 for r in ANCHOR_RATES], ANCHOR_PSNR)
        assert bd_rate(anchor, test) == pytest.approx(-50.0, abs=0.1)

    def test_doubled_rates(self):
        """Same quality at twice the rate costs 100% more."""
        from vbr_video_codec.evaluation import bd_rate

        anchor = _curve("a", ANCHOR_RATES, ANCHOR_PSNR)
        test = _curve("t", [r * 2 for r in ANCHOR_RATES], ANCHOR_PSNR)
        assert bd_rate(anchor, test) == pytest.approx(100.0, abs=0.2)

    def test_antisymmetry(self):
        """Swapping the curves inverts the rate ratio."""
        from vbr_video_codec.evaluation import bd_rate

        anchor = _curve("a", ANCHOR_RATES, ANCHOR_PSNR)
        test = _curve("t", [0.04, 0.09, 0.17, 0.36], [30.2, 32.1, 34.3, 36.1])
        forward = 1 + bd_rate(anchor, test) / 100
        backward = 1 + bd_rate(test, anchor) / 100
        assert forward * backward == pytest.approx(1.0, abs=1e-6)

    def test_collinear_extra_point(self):
        """Adding a point on a log-linear curve leaves the figure unchanged."""
        from vbr_video_codec.evaluation import bd_rate

        anchor = _curve("a", ANCHOR_RATES, ANCHOR_PSNR)
        test = _curve("t", [0.08, 0.16, 0.32, 0.64], [31.0, 33.0, 35.0, 37.0])
        denser = _curve("t", [0.08, 0.16, 0.32, 0.64, 0.32 * math.sqrt(2)], [31.0, 33.0, 35.0, 37.0, 36.0])
        assert bd_rate(anchor, denser) == pytest.approx(bd_rate(anchor, test), abs=1e-6)

    def test_bd_psnr_shift(self):
        """A curve one dB higher everywhere gains one dB."""
        from vbr_video_codec.evaluation import bd_psnr

        anchor = _curve("a", ANCHOR_RATES, ANCHOR_PSNR)
        test = _curve("t", ANCHOR_RATES, [q + 1 for q in ANCHOR_PSNR])
        assert bd_psnr(anchor, test) == pytest.approx(1.0, abs=1e-9)

    def test_too_few_points(self):
        """Curves need four finite points."""
        from vbr_video_codec.evaluation import bd_rate
        from vbr_video_codec.exceptions import ArgumentError

        anchor = _curve("a", ANCHOR_RATES, ANCHOR_PSNR)
        short = _curve("t", ANCHOR_RATES[:3] + [0.8], ANCHOR_PSNR[:3] + [math.inf])
        with pytest.raises(ArgumentError):
            bd_rate(anchor, short)

    def test_no_overlap(self):
        """Disjoint quality ranges cannot be compared."""
        from vbr_video_codec.evaluation import bd_rate
        from vbr_video_codec.exceptions import EvaluationError

        anchor = _curve("a", ANCHOR_RATES, ANCHOR_PSNR)
        test = _curve("t", ANCHOR_RATES, [q + 20 for q in ANCHOR_PSNR])
        with pytest.raises(EvaluationError):
            bd_rate(anchor, test)


# =============================================================================
# TestRDFiles - 4 tests
# =============================================================================


class TestRDFiles:
    """Test RD CSV files and plots."""

    def test_csv_round_trip(self, tmp_path):
        """Curves read back with labels, indices and infinite points intact."""
        from vbr_video_codec.evaluation import RDCurve, RDPoint, read_rd_csv, write_rd_csv

        curves = [
            RDCurve("ours", [RDPoint(0.1, 32.5, idx=0), RDPoint(0.3, math.inf, idx=63)]),
            _curve("anchor", ANCHOR_RATES, ANCHOR_PSNR),
        ]
        path = write_rd_csv(curves, tmp_path / "rd.csv")
        loaded = read_rd_csv(path)
        assert [c.label for c in loaded] == ["ours", "anchor"]
        assert loaded[0].points == curves[0].points
        assert loaded[1].points == curves[1].points

    def test_missing_columns(self, tmp_path):
        """A CSV without rate or quality columns is rejected."""
        from vbr_video_codec.evaluation import read_rd_csv
        from vbr_video_codec.exceptions import DataIOError

        path = tmp_path / "rd.csv"
        path.write_text("label,bitrate\nx,1\n")
        with pytest.raises(DataIOError):
            read_rd_csv(path)

    def test_missing_file(self, tmp_path):
        """A missing CSV raises DataIOError."""
        from vbr_video_codec.evaluation import read_rd_csv
        from vbr_video_codec.exceptions import DataIOError

        with pytest.raises(DataIOError):
            read_rd_csv(tmp_path / "absent.csv")

    def test_emit_rd(self, tmp_path):
        """emit_rd writes a CSV and a PNG next to each other."""
        from vbr_video_codec.evaluation import emit_rd

        csv_path, png_path = emit_rd([_curve("a", ANCHOR_RATES, ANCHOR_PSNR)], tmp_path / "out" / "rd.csv")
        assert csv_path == tmp_path / "out" / "rd.csv"
        assert png_path.suffix == ".png"
        assert png_path.read_bytes()[:4] == b"\x89PNG"
