"""Tests for vbr_video_codec.cli module."""

import numpy as np
import pytest


@pytest.fixture
def yuv_input(tmp_path, translate_clip):
    """Three frames of the translate clip as a 32x32 I420 file."""
    from vbr_video_codec.data_io import clip_to_yuv, write_yuv420

    path = tmp_path / "input.yuv"
    write_yuv420(path, clip_to_yuv(translate_clip.frames[:3]))
    return path


@pytest.fixture
def rd_files(tmp_path):
    """Anchor and test RD curve files, the test saving half the rate."""
    from vbr_video_codec.evaluation import RDCurve, RDPoint, write_rd_csv

    rates = [0.05, 0.1, 0.2, 0.4]
    quality = [30.0, 32.0, 34.0, 36.0]
    anchor = write_rd_csv([RDCurve("anchor", [RDPoint(r, q) for r, q in zip(rates, quality)])], tmp_path / "a.csv")
    test = write_rd_csv([RDCurve("ours", [RDPoint(r / 2, q) for r, q in zip(rates, quality)])], tmp_path / "t.csv")
    return anchor, test


# =============================================================================
# TestCodingCommands - 4 tests
# =============================================================================


class TestCodingCommands:
    """Test encode, decode and eval."""

    def test_encode_decode(self, saved_checkpoint, yuv_input, tmp_path, capsys):
        """Decoding the encoded container gives the encoder's reconstruction."""
        from vbr_video_codec.cli import main

        container = tmp_path / "clip.evc"
        recon = tmp_path / "recon.yuv"
        decoded = tmp_path / "decoded.yuv"
        args = ["encode", str(yuv_input), "--width", "32", "--height", "32", "--checkpoint", str(saved_checkpoint)]
        assert main(args + ["--q-idx", "21", "-o", str(container), "--recon", str(recon)]) == 0
        assert "total  bpp_mv" in capsys.readouterr().out
        assert main(["decode", str(container), "--checkpoint", str(saved_checkpoint), "-o", str(decoded)]) == 0
        assert decoded.read_bytes() == recon.read_bytes()
        assert len(decoded.read_bytes()) == 3 * 32 * 32 * 3 // 2

    def test_eval(self, yuv_input, capsys):
        """A file compared with itself reports infinite PSNR."""
        from vbr_video_codec.cli import main

        assert main(["eval", str(yuv_input), str(yuv_input), "--width", "32", "--height", "32"]) == 0
        out = capsys.readouterr().out
        assert "frame    2  psnr inf" in out
        assert "mean   psnr inf" in out

    def test_q_idx_out_of_range(self, saved_checkpoint, yuv_input, tmp_path, capsys):
        """A bad rate index exits with the usage code."""
        from vbr_video_codec.cli import EXIT_USAGE, main

        args = ["encode", str(yuv_input), "--width", "32", "--height", "32", "--checkpoint", str(saved_checkpoint),
                "--q-idx", "99", "-o", str(tmp_path / "clip.evc")]
        assert main(args) == EXIT_USAGE
        assert capsys.readouterr().err.startswith("E_USAGE: ")

    def test_missing_container(self, saved_checkpoint, tmp_path, capsys):
        """An unreadable container exits with the error code and an I/O prefix."""
        from vbr_video_codec.cli import EXIT_ERROR, main

        args = ["decode", str(tmp_path / "absent.evc"), "--checkpoint", str(saved_checkpoint), "-o", "x.yuv"]
        assert main(args) == EXIT_ERROR
        assert capsys.readouterr().err.startswith("E_IO: ")


# =============================================================================
# TestCurveCommands - 4 tests
# =============================================================================


class TestCurveCommands:
    """Test bdrate and plot."""

    def test_bdrate(self, rd_files, capsys):
        """Halving the rate at equal quality reports a 50% saving."""
        from vbr_video_codec.cli import main

        anchor, test = rd_files
        assert main(["bdrate", str(anchor), str(test)]) == 0
        out = capsys.readouterr().out
        assert "ours vs anchor: -50.00%" in out
        assert "BD-PSNR" in out

    def test_bdrate_unknown_label(self, rd_files, capsys):
        """Asking for a label the file lacks is a usage error."""
        from vbr_video_codec.cli import EXIT_USAGE, main

        anchor, test = rd_files
        assert main(["bdrate", str(anchor), str(test), "--test-label", "other"]) == EXIT_USAGE
        assert "No curve labelled 'other'" in capsys.readouterr().err

    def test_plot(self, rd_files, tmp_path):
        """plot writes one image for all curves."""
        from vbr_video_codec.cli import main

        out = tmp_path / "rd.png"
        assert main(["plot", *map(str, rd_files), "-o", str(out), "--title", "tiny"]) == 0
        assert out.read_bytes()[:4] == b"\x89PNG"

    def test_bad_override(self, capsys):
        """Train overrides must be key=value pairs."""
        from vbr_video_codec.cli import EXIT_USAGE, main

        assert main(["train", "--set", "trainer.seed"]) == EXIT_USAGE
        assert "key=value" in capsys.readouterr().err


# =============================================================================
# TestArgumentErrors - 3 tests
# =============================================================================


class TestArgumentErrors:
    """Test that malformed command lines fail with a single usage line."""

    def test_missing_required_option(self, capsys):
        """Leaving out --q-idx exits with the usage code and one E_USAGE line."""
        from vbr_video_codec.cli import EXIT_USAGE, main

        assert main(["encode", "in.yuv", "--checkpoint", "ckpt", "-o", "clip.evc"]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert err.startswith("E_USAGE: ")
        assert "--q-idx" in err
        assert err.count("\n") == 1

    def test_unknown_command(self, capsys):
        """An unknown subcommand is a usage error."""
        from vbr_video_codec.cli import EXIT_USAGE, main

        assert main(["transcode"]) == EXIT_USAGE
        assert capsys.readouterr().err.startswith("E_USAGE: ")

    def test_bad_integer(self):
        """A non-integer frame width is a usage error raised by the parser."""
        from vbr_video_codec.cli import CodecArgumentParser, build_parser
        from vbr_video_codec.exceptions import UsageError

        parser = build_parser()
        assert isinstance(parser, CodecArgumentParser)
        with pytest.raises(UsageError, match="invalid int value"):
            parser.parse_args(["eval", "a.yuv", "b.yuv", "--width", "wide", "--height", "32"])


# =============================================================================
# TestTrainCommand - 1 test
# =============================================================================


class TestTrainCommand:
    """Test the train command end to end."""

    def test_first_stage(self, tiny_overrides, tmp_path, capsys):
        """Training one stage writes its checkpoint and reports it."""
        from vbr_video_codec.cli import main

        args = ["train", "--end-stage", "1", "--no-progress", "--seed", "3"]
        for key, value in tiny_overrides.items():
            if key == "trainer.ckpt_dir":
                args += ["--ckpt-dir", value]
            else:
                args += ["--set", f"{key}={value}"]
        assert main(args) == 0
        assert "stage01" in capsys.readouterr().out
        assert (tmp_path / "ckpt" / "stage01" / "manifest.json").exists()
        assert np.isfinite(float((tmp_path / "train_log.csv").read_text().splitlines()[1].split(",")[-1]))
