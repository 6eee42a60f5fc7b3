"""Tests for vbr_video_codec.trainer.batches module."""

import numpy as np
import pytest

# =============================================================================
# TestBuildBatch - 4 tests
# =============================================================================


class TestBuildBatch:
    """Test single training instances."""

    def test_instance_shape_and_rate(self, tiny_dataset, rng, sampler_config):
        """An instance crops the stage's frames and carries one rate index."""
        from vbr_video_codec.rate_control import lambda_for_idx
        from vbr_video_codec.trainer import build_batch, default_schedule

        stage = default_schedule()[6]
        instance = build_batch(tiny_dataset, stage, rng, sampler_config, crop_size=32)
        assert instance.frames.shape == (6, 3, 32, 32)
        assert 0 <= instance.idx < sampler_config.n
        assert instance.lam == pytest.approx(lambda_for_idx(sampler_config, instance.idx))
        assert instance.loss_frames == (2, 3, 4, 5)

    def test_same_window_across_frames(self, rng, sampler_config):
        """All frames of an instance are cropped at the same position."""
        from vbr_video_codec.data_io import ClipDataset
        from vbr_video_codec.trainer import build_batch, default_schedule

        frame = rng.random((3, 48, 48)).astype(np.float32)
        dataset = ClipDataset([np.stack([frame] * 7)])
        instance = build_batch(dataset, default_schedule()[4], rng, sampler_config, crop_size=32)
        for t in range(1, 3):
            np.testing.assert_array_equal(instance.frames[t], instance.frames[0])

    def test_short_clip(self, rng, sampler_config):
        """A clip shorter than the stage needs is rejected."""
        from vbr_video_codec.data_io import ClipDataset
        from vbr_video_codec.exceptions import DataError
        from vbr_video_codec.trainer import build_batch, default_schedule

        dataset = ClipDataset([np.zeros((3, 3, 48, 48), dtype=np.float32)])
        with pytest.raises(DataError):
            build_batch(dataset, default_schedule()[6], rng, sampler_config, crop_size=32)

    def test_empty_dataset(self, rng, sampler_config):
        """An empty dataset is rejected."""
        from vbr_video_codec.data_io import ClipDataset
        from vbr_video_codec.exceptions import DataError
        from vbr_video_codec.trainer import build_batch, default_schedule

        with pytest.raises(DataError):
            build_batch(ClipDataset([]), default_schedule()[0], rng, sampler_config, crop_size=32)


# =============================================================================
# TestEpochBatches - 3 tests
# =============================================================================


class TestEpochBatches:
    """Test batch collation and epoch iteration."""

    def test_batch_tensors(self, tiny_dataset, rng, sampler_config):
        """Batches stack frames and hold one index and lambda per instance."""
        from vbr_video_codec.trainer import default_schedule, epoch_batches

        batches = list(epoch_batches(tiny_dataset, default_schedule()[3], rng, sampler_config, 32, batch_size=2))
        assert len(batches) == 2
        batch = batches[0]
        assert tuple(batch.frames.shape) == (2, 3, 3, 32, 32)
        assert tuple(batch.idx.shape) == (2,)
        assert tuple(batch.lam.shape) == (2,)
        assert batch.size == 2

    def test_max_steps(self, tiny_dataset, rng, sampler_config):
        """max_steps caps the number of batches."""
        from vbr_video_codec.trainer import default_schedule, epoch_batches

        batches = list(
            epoch_batches(tiny_dataset, default_schedule()[0], rng, sampler_config, 32, batch_size=1, max_steps=3)
        )
        assert len(batches) == 3

    def test_seeded_repeatability(self, tiny_dataset, sampler_config):
        """Equal seeds give equal batches."""
        from vbr_video_codec.trainer import default_schedule, epoch_batches

        stage = default_schedule()[8]
        first = list(epoch_batches(tiny_dataset, stage, np.random.default_rng(5), sampler_config, 32, 2))
        second = list(epoch_batches(tiny_dataset, stage, np.random.default_rng(5), sampler_config, 32, 2))
        for a, b in zip(first, second):
            assert a.idx.tolist() == b.idx.tolist()
            assert bool((a.frames == b.frames).all())
