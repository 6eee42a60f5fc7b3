"""Shared pytest fixtures for the codec tests."""

import numpy as np
import pytest
import torch

# =============================================================================
# Settings Fixtures
# =============================================================================

TINY_OVERRIDES = {
    "model.channels": [8, 8, 8],
    "model.mv_channels": 8,
    "model.ctx_channels": 8,
    "model.intra_channels": 8,
    "model.support": 16,
    "trainer.device": "cpu",
    "trainer.batch_size": 2,
    "trainer.epochs": 1,
    "trainer.max_steps_per_epoch": 2,
    "trainer.intra_warmup_epochs": 0,
    "data.crop_size": 32,
    "data.frame_size": [48, 48],
    "data.synthetic_clips": 4,
    "data.clip_frames": 7,
    "data.pad_multiple": 32,
}


@pytest.fixture
def tiny_overrides(tmp_path):
    """Overrides for a model small enough to train a few steps on CPU."""
    return {
        **TINY_OVERRIDES,
        "trainer.ckpt_dir": str(tmp_path / "ckpt"),
        "trainer.log_csv": str(tmp_path / "train_log.csv"),
    }


@pytest.fixture
def tiny_settings(tiny_overrides):
    """Validated settings for the tiny model."""
    from vbr_video_codec.config import load_settings

    return load_settings(overrides=tiny_overrides)


@pytest.fixture
def sampler_config():
    """Rate sampler with the default constants."""
    from vbr_video_codec.rate_control import SamplerConfig

    return SamplerConfig()


# =============================================================================
# Randomness Fixtures
# =============================================================================


@pytest.fixture
def rng():
    """Seeded numpy generator."""
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


# =============================================================================
# Model and Data Fixtures
# =============================================================================


@pytest.fixture
def tiny_model(tiny_settings):
    """Untrained tiny codec in eval mode."""
    from vbr_video_codec.models import VideoCodec

    model = VideoCodec(tiny_settings.model, tiny_settings.rate)
    return model.eval()


@pytest.fixture
def translate_clip(rng):
    """Eight 32x32 frames of a texture moving two pixels per frame."""
    from vbr_video_codec.data_io import synth_clip

    return synth_clip("translate", rng, frames=8, size=(32, 32), velocity=(2, 0))


@pytest.fixture
def tiny_dataset(tiny_settings, rng):
    """Synthetic training clips matching the tiny settings."""
    from vbr_video_codec.data_io import build_training_clips

    return build_training_clips(tiny_settings.data, rng, in_channels=tiny_settings.model.in_channels)


@pytest.fixture
def saved_checkpoint(tiny_model, tiny_settings, tmp_path):
    """Checkpoint directory holding the untrained tiny model."""
    from vbr_video_codec.trainer.checkpoints import save_checkpoint

    manifest = {
        "stage": 0,
        "step": 0,
        "seed": tiny_settings.trainer.seed,
        "config_hash": tiny_settings.config_hash(),
        "config": tiny_settings.as_dict(),
    }
    return save_checkpoint(tiny_model, tmp_path / "ckpt" / "stage00", manifest)
