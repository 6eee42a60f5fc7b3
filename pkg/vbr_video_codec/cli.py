"""Command-line interface: ``vbr-codec <command> ...`` or ``python -m vbr_video_codec``."""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import yaml

from .config import load_settings
from .constants import BD_RATE_VARIANT, FRAME_TYPE_I
from .container import read_container, write_container
from .data_io import (
    build_training_clips,
    clip_to_yuv,
    load_image_folder,
    load_yuv420,
    write_yuv420,
    yuv_to_clip,
)
from .evaluation import bd_psnr, bd_rate, emit_rd, plot_rd, read_rd_csv, sequence_psnr
from .exceptions import CodecError, UsageError
from .pipeline import decode_sequence, encode_sequence, load_codec, rd_sweep
from .rate_control import rd_indices
from .utils import format_bytes, seeded_generator

logger = logging.getLogger(__name__)

EXIT_ERROR = 1
EXIT_USAGE = 2


def _parse_override(text: str):
    if "=" not in text:
        raise UsageError(f"Override '{text}' must look like key=value.")
    key, value = text.split("=", 1)
    return key.strip(), yaml.safe_load(value)


def _read_clip(path, width: Optional[int], height: Optional[int], frames: Optional[int]) -> np.ndarray:
    path = Path(path)
    if path.is_dir():
        return load_image_folder(path, max_frames=frames)
    if path.suffix.lower() != ".yuv":
        raise UsageError(f"Input '{path}' must be a .yuv file or a folder of images.")
    if not width or not height:
        raise UsageError("Raw .yuv input needs --width and --height.")
    return yuv_to_clip(load_yuv420(path, width, height, frames))


def _curve(curves, label: Optional[str], path):
    if label is None:
        if len(curves) != 1:
            raise UsageError(f"'{path}' holds {len(curves)} curves; pick one with a label option.")
        return curves[0]
    for curve in curves:
        if curve.label == label:
            return curve
    raise UsageError(f"No curve labelled '{label}' in '{path}'.")


# Commands


def cmd_train(args) -> int:
    overrides = dict(_parse_override(o) for o in args.set or [])
    if args.seed is not None:
        overrides["trainer.seed"] = args.seed
    if args.mixed_precision:
        overrides["trainer.mixed_precision"] = True
    if args.no_pls:
        overrides["rate.m"] = 1.0
    if args.no_lstffm:
        overrides["model.use_long_term"] = False
    if args.ckpt_dir:
        overrides["trainer.ckpt_dir"] = args.ckpt_dir
    settings = load_settings(args.config, desk=args.desk, overrides=overrides)

    from .models import VideoCodec
    from .trainer import TrainOptions, train_full

    options = TrainOptions(start_stage=args.start_stage, end_stage=args.end_stage, progress=not args.no_progress)
    dataset = build_training_clips(
        settings.data, seeded_generator(settings.trainer.seed), in_channels=settings.model.in_channels
    )
    model = VideoCodec(settings.model, settings.rate)
    final = train_full(model, dataset, options=options, settings=settings)
    print(f"Final checkpoint: {final}")
    return 0


def cmd_encode(args) -> int:
    model, settings = load_codec(args.checkpoint)
    clip = _read_clip(args.input, args.width, args.height, args.frames)
    result = encode_sequence(model, clip, args.q_idx, args.intra_period, settings.data.pad_multiple)
    write_container(args.output, result.container)
    if args.recon:
        write_yuv420(args.recon, clip_to_yuv(result.reconstruction))
    for s in result.frames:
        kind = "I" if s.frame_type == FRAME_TYPE_I else "P"
        print(f"frame {s.index:4d} {kind}  bpp_mv {s.bpp_mv:.5f}  bpp_context {s.bpp_context:.5f}")
    mv = sum(s.bpp_mv for s in result.frames) / len(result.frames)
    ctx = sum(s.bpp_context for s in result.frames) / len(result.frames)
    print(
        f"total  bpp_mv {mv:.5f}  bpp_context {ctx:.5f}  bpp {result.bpp:.5f}  "
        f"({format_bytes(result.container.total_bits // 8)})"
    )
    return 0


def cmd_decode(args) -> int:
    model, settings = load_codec(args.checkpoint)
    container = read_container(args.container)
    clip = decode_sequence(model, container, settings.data.pad_multiple)
    write_yuv420(args.output, clip_to_yuv(clip))
    h = container.header
    print(f"Decoded {h.frame_count} frame(s) of {h.width}x{h.height} to {args.output}")
    return 0


def cmd_eval(args) -> int:
    refs = load_yuv420(args.reference, args.width, args.height, args.frames)
    tests = load_yuv420(args.decoded, args.width, args.height, args.frames)
    count = min(len(refs), len(tests))
    if len(refs) != len(tests):
        logger.warning(f"Frame counts differ ({len(refs)} vs {len(tests)}); comparing the first {count}")
    values = sequence_psnr(refs[:count], tests[:count])
    for t, value in enumerate(values):
        print(f"frame {t:4d}  psnr {value:.4f}")
    print(f"mean   psnr {float(np.mean(values)):.4f}")
    if args.container:
        print(f"bpp    {read_container(args.container).bpp:.5f}")
    return 0


def cmd_bdrate(args) -> int:
    anchor = _curve(read_rd_csv(args.anchor), args.anchor_label, args.anchor)
    test = _curve(read_rd_csv(args.test), args.test_label, args.test)
    rate = bd_rate(anchor, test)
    quality = bd_psnr(anchor, test)
    print(f"BD-rate ({BD_RATE_VARIANT}) {test.label} vs {anchor.label}: {rate:+.2f}%")
    print(f"BD-PSNR {quality:+.3f} dB")
    return 0


def cmd_plot(args) -> int:
    curves = [c for path in args.curves for c in read_rd_csv(path)]
    plot_rd(curves, args.output, title=args.title)
    print(f"Plot written to {args.output}")
    return 0


def cmd_sweep(args) -> int:
    model, settings = load_codec(args.checkpoint)
    clip = _read_clip(args.input, args.width, args.height, args.frames)
    indices = args.indices if args.indices else rd_indices(model.n, args.count)
    curve = rd_sweep(model, clip, indices, args.label, args.intra_period, settings.data.pad_multiple)
    csv_path, png_path = emit_rd([curve], args.output)
    for p in curve.points:
        psnr = "inf" if math.isinf(p.psnr) else f"{p.psnr:.4f}"
        print(f"q_idx {p.idx:3d}  bpp {p.bpp:.5f}  psnr {psnr}")
    print(f"Wrote {csv_path} and {png_path}")
    return 0


# Parser


def _add_input_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("input", help="raw I420 .yuv file or folder of numbered images")
    parser.add_argument("--width", type=int, help="frame width of a .yuv input")
    parser.add_argument("--height", type=int, help="frame height of a .yuv input")
    parser.add_argument("--frames", type=int, help="number of frames to read")
    parser.add_argument("--checkpoint", required=True, help="checkpoint directory")
    parser.add_argument("--intra-period", type=int, default=-1, help="I-frame refresh period (-1: first frame only)")


class CodecArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports bad arguments as a one-line ``UsageError``."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = CodecArgumentParser(prog="vbr-codec", description="Variable-bitrate neural video codec.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the staged training schedule")
    p.add_argument("--config", help="YAML settings file")
    p.add_argument("--desk", action="store_true", help="use the small desk-scale profile")
    p.add_argument("--start-stage", type=int, default=1)
    p.add_argument("--end-stage", type=int, default=18)
    p.add_argument("--seed", type=int)
    p.add_argument("--mixed-precision", action="store_true")
    p.add_argument("--no-pls", action="store_true", help="sample rate indices uniformly")
    p.add_argument("--no-lstffm", action="store_true", help="drop the long-term fusion branch")
    p.add_argument("--ckpt-dir", help="checkpoint root directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted settings override")
    p.add_argument("--no-progress", action="store_true", help="hide progress bars")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode a clip into a container")
    _add_input_args(p)
    p.add_argument("--q-idx", type=int, required=True, help="rate index")
    p.add_argument("-o", "--output", required=True, help="container file")
    p.add_argument("--recon", help="also write the reconstruction as .yuv")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a container to .yuv")
    p.add_argument("container")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="weighted YUV PSNR of a decoded .yuv")
    p.add_argument("reference")
    p.add_argument("decoded")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--frames", type=int)
    p.add_argument("--container", help="container the decoded file came from, for bpp")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bdrate", help="BD-rate of a test curve against an anchor curve")
    p.add_argument("anchor")
    p.add_argument("test")
    p.add_argument("--anchor-label")
    p.add_argument("--test-label")
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("plot", help="plot RD curves from CSV files")
    p.add_argument("curves", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("sweep", help="encode one clip at several rate indices")
    _add_input_args(p)
    p.add_argument("--indices", type=int, nargs="+")
    p.add_argument("--count", type=int, default=4, help="evenly spaced indices when --indices is not given")
    p.add_argument("--label", default="codec")
    p.add_argument("-o", "--output", required=True, help="output base path for .csv and .png")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except CodecError as e:
        print(f"{e.code}: {e}", file=sys.stderr)
        return EXIT_USAGE if isinstance(e, UsageError) else EXIT_ERROR
