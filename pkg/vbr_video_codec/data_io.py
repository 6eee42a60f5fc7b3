"""
Video and image ingestion, color conversion, patch sampling and synthetic clips.

Clips are float32 arrays of shape ``(T, C, H, W)`` with values in ``[0, 1]``; the
working color space is RGB. Raw files are 8-bit I420 (YUV 4:2:0 planar).
"""

import logging
import re
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from PIL import Image
from scipy.ndimage import gaussian_filter
from scipy.ndimage import shift as nd_shift
from torch.nn import functional as F
from torch.utils.data import Dataset

from .exceptions import ArgumentError, DataError, DataIOError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
RECIPES = ("translate", "static", "rectangle")

# BT.601 limited range, RGB in [0, 1] -> YCbCr in 8-bit code values
_RGB_TO_YUV = np.array(
    [
        [65.481, 128.553, 24.966],
        [-37.797, -74.203, 112.0],
        [112.0, -93.786, -18.214],
    ]
)
_YUV_OFFSET = np.array([16.0, 128.0, 128.0])
_YUV_TO_RGB = np.linalg.inv(_RGB_TO_YUV)


@dataclass
class YuvFrame:
    """8-bit I420 planes: full-resolution luma, half-resolution chroma."""

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]

    def planes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.y, self.u, self.v


def _frame_bytes(width: int, height: int) -> int:
    return width * height * 3 // 2


def _check_dims(width: int, height: int) -> None:
    if width <= 0 or height <= 0 or width % 2 or height % 2:
        raise ArgumentError(f"I420 needs positive even dimensions, got {width}x{height}.")


def load_yuv420(path, width: int, height: int, nframes: Optional[int] = None) -> List[YuvFrame]:
    """
    Read ``nframes`` I420 frames (all complete frames when ``nframes`` is None).

    Raises:
        DataIOError: If the file cannot be read or is shorter than requested.
    """
    _check_dims(width, height)
    frame_size = _frame_bytes(width, height)
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DataIOError(f"Cannot read '{path}': {e}") from e
    if nframes is None:
        nframes = len(raw) // frame_size
    expected = nframes * frame_size
    if len(raw) < expected or nframes < 1:
        raise DataIOError(
            f"'{path}' holds {len(raw)} bytes; {max(nframes, 1)} frame(s) of {width}x{height} I420 need "
            f"{max(expected, frame_size)} bytes."
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=expected)
    frames = []
    cw, ch = width // 2, height // 2
    for i in range(nframes):
        start = i * frame_size
        y = data[start : start + width * height].reshape(height, width)
        u_start = start + width * height
        u = data[u_start : u_start + cw * ch].reshape(ch, cw)
        v = data[u_start + cw * ch : start + frame_size].reshape(ch, cw)
        frames.append(YuvFrame(y.copy(), u.copy(), v.copy()))
    logger.debug(f"Loaded {nframes} frames of {width}x{height} from {path}")
    return frames


def write_yuv420(path, frames: Sequence[YuvFrame]) -> None:
    """Write frames as raw I420."""
    try:
        with open(path, "wb") as handle:
            for frame in frames:
                for plane in frame.planes():
                    handle.write(np.ascontiguousarray(plane, dtype=np.uint8).tobytes())
    except OSError as e:
        raise DataIOError(f"Cannot write '{path}': {e}") from e


def _upsample_chroma(plane: np.ndarray) -> np.ndarray:
    t = torch.from_numpy(plane.astype(np.float64))[None, None]
    return F.interpolate(t, scale_factor=2, mode="bilinear", align_corners=False)[0, 0].numpy()


def _downsample_chroma(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def yuv_rgb_convert(frame, direction: str):
    """
    Convert between an I420 frame and an RGB image.

    Args:
        frame: ``YuvFrame`` for ``yuv2rgb``; float array ``(H, W, 3)`` in [0, 1] for ``rgb2yuv``.
        direction (str): ``yuv2rgb`` or ``rgb2yuv``.

    Returns:
        The converted frame. RGB output is float64 clipped to [0, 1]; YUV output is uint8.
    """
    if direction == "yuv2rgb":
        yuv = np.stack(
            [frame.y.astype(np.float64), _upsample_chroma(frame.u), _upsample_chroma(frame.v)], axis=-1
        )
        rgb = (yuv - _YUV_OFFSET) @ _YUV_TO_RGB.T
        return np.clip(rgb, 0.0, 1.0)
    if direction == "rgb2yuv":
        rgb = np.asarray(frame, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ArgumentError(f"Expected an (H, W, 3) RGB image, got {rgb.shape}.")
        _check_dims(rgb.shape[1], rgb.shape[0])
        yuv = rgb @ _RGB_TO_YUV.T + _YUV_OFFSET
        y = yuv[..., 0]
        u = _downsample_chroma(yuv[..., 1])
        v = _downsample_chroma(yuv[..., 2])
        return YuvFrame(*(np.clip(np.round(p), 0, 255).astype(np.uint8) for p in (y, u, v)))
    raise ArgumentError(f"Unknown conversion direction '{direction}', expected 'yuv2rgb' or 'rgb2yuv'.")


def yuv_to_clip(frames: Sequence[YuvFrame]) -> np.ndarray:
    """I420 frames to a float32 RGB clip ``(T, 3, H, W)``."""
    return np.stack([yuv_rgb_convert(f, "yuv2rgb").transpose(2, 0, 1) for f in frames]).astype(np.float32)


def clip_to_yuv(clip: np.ndarray) -> List[YuvFrame]:
    return [yuv_rgb_convert(np.asarray(frame).transpose(1, 2, 0), "rgb2yuv") for frame in clip]


def pad_to_multiple(clip: np.ndarray, multiple: int = 64) -> Tuple[np.ndarray, Tuple[int, int]]:
    """
    Pad the last two axes up to a multiple of ``multiple`` by edge replication.

    Returns:
        Tuple[np.ndarray, Tuple[int, int]]: Padded array and the original ``(H, W)``.
    """
    h, w = clip.shape[-2:]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h or pad_w:
        widths = [(0, 0)] * (clip.ndim - 2) + [(0, pad_h), (0, pad_w)]
        clip = np.pad(clip, widths, mode="edge")
    return clip, (h, w)


def crop_to(clip, size: Tuple[int, int]):
    h, w = size
    return clip[..., :h, :w]


def random_crop(clip: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Crop the same ``size x size`` window from every frame.

    Raises:
        DataError: If the clip is smaller than the crop.
    """
    h, w = clip.shape[-2:]
    if size > h or size > w:
        raise DataError(f"Cannot crop {size}x{size} from {h}x{w} frames.")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return clip[..., top : top + size, left : left + size]


def _natural_key(path: Path):
    return [int(part) if part.isdigit() else part for part in re.split(r"(\d+)", path.name)]


def _read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert("RGB"), dtype=np.float32).transpose(2, 0, 1) / 255.0
    except OSError as e:
        raise DataIOError(f"Cannot read image '{path}': {e}") from e


def load_image_folder(path, max_frames: Optional[int] = None) -> np.ndarray:
    """Numbered images in a folder, in natural order, as a clip ``(T, 3, H, W)``."""
    folder = Path(path)
    if not folder.is_dir():
        raise DataIOError(f"'{folder}' is not a directory.")
    files = sorted((p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES), key=_natural_key)
    if max_frames is not None:
        files = files[:max_frames]
    if not files:
        raise DataIOError(f"No images found in '{folder}'.")
    frames = [_read_image(p) for p in files]
    if len({f.shape for f in frames}) != 1:
        raise DataIOError(f"Images in '{folder}' differ in size.")
    return np.stack(frames)


def septuplet_dirs(root, frames: int = 7) -> List[Path]:
    """
    Clip folders of a ``root/sequence/clip/im1..imN`` layout holding all ``frames`` images.

    Incomplete folders are skipped with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataIOError(f"Septuplet root '{root}' is not a directory.")
    dirs = []
    for clip_dir in sorted(p for p in root.glob("*/*") if p.is_dir()):
        if not all((clip_dir / f"im{i}.png").exists() for i in range(1, frames + 1)):
            logger.warning(f"Skipping incomplete clip {clip_dir}")
            continue
        dirs.append(clip_dir)
    return dirs


def _read_clip_dir(clip_dir: Path, frames: int) -> np.ndarray:
    return np.stack([_read_image(clip_dir / f"im{i}.png") for i in range(1, frames + 1)])


def load_septuplets(root, frames: int = 7, limit: Optional[int] = None) -> List[np.ndarray]:
    """Clips from a ``root/sequence/clip/im1..imN`` layout; see ``septuplet_dirs``."""
    dirs = septuplet_dirs(root, frames)
    if limit is not None:
        dirs = dirs[:limit]
    clips = [_read_clip_dir(d, frames) for d in dirs]
    logger.info(f"Loaded {len(clips)} septuplet clips from {root}")
    return clips


@dataclass
class SyntheticClip:
    """Frames ``(T, C, H, W)`` and ground-truth flow ``(T - 1, 2, H, W)`` warping frame t-1 onto t."""

    frames: np.ndarray
    flow: np.ndarray
    recipe: str


def _texture(rng: np.random.Generator, height: int, width: int, channels: int, sigma: float = 2.0) -> np.ndarray:
    noise = rng.random((channels, height, width))
    smooth = np.stack([gaussian_filter(c, sigma, mode="wrap") for c in noise])
    low, high = smooth.min(), smooth.max()
    return ((smooth - low) / max(high - low, 1e-12)).astype(np.float32)


def _shifted(texture: np.ndarray, dy: float, dx: float, top: int, left: int, height: int, width: int) -> np.ndarray:
    """Window of ``texture`` sampled at ``(y + dy, x + dx)`` relative to ``(top, left)``."""
    if float(dy).is_integer() and float(dx).is_integer():
        y0, x0 = top + int(dy), left + int(dx)
        return texture[:, y0 : y0 + height, x0 : x0 + width].copy()
    moved = np.stack([nd_shift(c, (-dy, -dx), order=1, mode="nearest") for c in texture])
    return moved[:, top : top + height, left : left + width].astype(np.float32)


def _block_start(rng: np.random.Generator, room: int, travel: float) -> int:
    """Start offset keeping a block that moves by -travel inside [0, room] when possible."""
    low = max(0, int(np.ceil(travel)))
    high = room + min(0, int(np.floor(travel)))
    if low > high:
        return int(rng.integers(0, room + 1))
    return int(rng.integers(low, high + 1))


def synth_clip(
    recipe: str,
    rng: np.random.Generator,
    frames: int = 7,
    size: Tuple[int, int] = (64, 64),
    velocity: Tuple[float, float] = (2.0, 0.0),
    noise_sigma: float = 0.0,
    channels: int = 3,
) -> SyntheticClip:
    """
    Generate a synthetic clip with known motion.

    Args:
        recipe (str): ``translate`` (textured background moving globally), ``static``
            (fixed background plus per-frame Gaussian noise) or ``rectangle`` (a
            textured block moving over a fixed background).
        rng (np.random.Generator): Source of all randomness.
        frames (int): Number of frames.
        size (Tuple[int, int]): ``(height, width)``.
        velocity (Tuple[float, float]): ``(dx, dy)`` in pixels per frame, flow units:
            ``frame[t](x) = frame[t - 1](x + velocity)``.
        noise_sigma (float): Noise level of the ``static`` recipe.

    Returns:
        SyntheticClip: Frames in [0, 1] and the ground-truth flow.
    """
    if recipe not in RECIPES:
        raise ArgumentError(f"Unknown recipe '{recipe}', expected one of {list(RECIPES)}.")
    if frames < 1:
        raise ArgumentError("A clip needs at least one frame.")
    height, width = size
    vx, vy = (float(v) for v in velocity)
    flow = np.zeros((max(frames - 1, 0), 2, height, width), dtype=np.float32)

    if recipe == "translate":
        span_x = int(np.ceil(abs(vx) * (frames - 1)))
        span_y = int(np.ceil(abs(vy) * (frames - 1)))
        texture = _texture(rng, height + span_y + 1, width + span_x + 1, channels)
        top = span_y if vy < 0 else 0
        left = span_x if vx < 0 else 0
        clip = np.stack([_shifted(texture, vy * t, vx * t, top, left, height, width) for t in range(frames)])
        flow[:, 0] = vx
        flow[:, 1] = vy
    elif recipe == "static":
        background = _texture(rng, height, width, channels)
        clip = np.repeat(background[None], frames, axis=0)
        if noise_sigma > 0:
            clip = np.clip(clip + rng.normal(0.0, noise_sigma, clip.shape), 0.0, 1.0).astype(np.float32)
    else:
        background = _texture(rng, height, width, channels)
        block = _texture(rng, height // 4, width // 4, channels, sigma=1.0) * 0.5 + 0.5
        bh, bw = block.shape[1:]
        start_y = _block_start(rng, height - bh, vy * (frames - 1))
        start_x = _block_start(rng, width - bw, vx * (frames - 1))
        clip = np.repeat(background[None], frames, axis=0).copy()
        prev_y = prev_x = None
        for t in range(frames):
            # content moves by -velocity per frame and stops at the frame edge
            y = int(np.clip(round(start_y - vy * t), 0, height - bh))
            x = int(np.clip(round(start_x - vx * t), 0, width - bw))
            clip[t, :, y : y + bh, x : x + bw] = block
            if t > 0:
                flow[t - 1, 0, y : y + bh, x : x + bw] = prev_x - x
                flow[t - 1, 1, y : y + bh, x : x + bw] = prev_y - y
            prev_y, prev_x = y, x
    return SyntheticClip(frames=clip.astype(np.float32), flow=flow, recipe=recipe)


class ClipDataset(Dataset):
    """
    Clips in a fixed iteration order, materialized on access.

    Each entry is either an array or a zero-argument callable returning one, so a
    large synthetic or on-disk training set costs memory only for the clips in use.

    Args:
        clips: Arrays or clip builders.
        frames (int, optional): Length every clip is known to have; spares
            ``min_frames`` from building each clip.
    """

    def __init__(self, clips: Sequence[Union[np.ndarray, Callable[[], np.ndarray]]], frames: Optional[int] = None):
        self.sources = list(clips)
        self.frames = frames

    def __len__(self) -> int:
        return len(self.sources)

    def __getitem__(self, index: int) -> np.ndarray:
        source = self.sources[index]
        return np.asarray(source() if callable(source) else source, dtype=np.float32)

    @property
    def min_frames(self) -> int:
        if self.frames is not None:
            return self.frames
        return min((self[i].shape[0] for i in range(len(self))), default=0)


def _synthetic_frames(recipe: str, seed: int, **kwargs) -> np.ndarray:
    return synth_clip(recipe, np.random.default_rng(seed), **kwargs).frames


def build_training_clips(data_settings, rng: np.random.Generator, in_channels: int = 3) -> ClipDataset:
    """
    Build the training set from settings: synthetic clips (recipes used in turn)
    followed by septuplet clips when ``septuplet_root`` is set.

    Every synthetic clip gets its own seed drawn from ``rng``, so rebuilding a clip
    on access always yields the same frames.
    """
    clips = []
    recipes = list(data_settings.recipes)
    for i in range(data_settings.synthetic_clips):
        recipe = recipes[i % len(recipes)]
        velocity = tuple(int(v) for v in rng.integers(-3, 4, size=2))
        clips.append(
            partial(
                _synthetic_frames,
                recipe,
                int(rng.integers(0, 2**63 - 1)),
                frames=data_settings.clip_frames,
                size=tuple(data_settings.frame_size),
                velocity=velocity,
                noise_sigma=0.01 if recipe == "static" else 0.0,
                channels=in_channels,
            )
        )
    if data_settings.septuplet_root:
        for clip_dir in septuplet_dirs(data_settings.septuplet_root, frames=data_settings.clip_frames):
            clips.append(partial(_read_clip_dir, clip_dir, data_settings.clip_frames))
    if not clips:
        raise DataError("No training clips: enable synthetic clips or set data.septuplet_root.")
    logger.info(f"Training set: {len(clips)} clips of {data_settings.clip_frames} frames")
    return ClipDataset(clips, frames=data_settings.clip_frames)
