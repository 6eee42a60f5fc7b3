"""Tests for vbr_video_codec.trainer.schedule module."""

import pytest

# Stage rows: (loss type, frames, lr, segment type)
GOLDEN = [
    ("meD", 2, 1e-4, "IP"),
    ("meRD", 2, 1e-4, "IP"),
    ("recD", 2, 5e-5, "IP"),
    ("meRD", 3, 1e-4, "PP"),
    ("recD", 3, 5e-5, "PP"),
    ("recD", 4, 5e-5, "PP"),
    ("recD", 6, 5e-5, "PP"),
    ("recRD", 2, 5e-5, "IP"),
    ("recRD", 3, 5e-5, "PP"),
    ("recRD", 4, 5e-5, "PP"),
    ("recRD", 6, 5e-5, "PP"),
    ("all", 2, 5e-5, "IP"),
    ("all", 3, 5e-5, "PP"),
    ("all", 4, 5e-5, "PP"),
    ("all", 6, 5e-5, "PP"),
    ("all", 6, 1e-5, "PP"),
    ("all", 6, 5e-6, "PP"),
    ("avg", 6, 1e-5, "IPP"),
]

# =============================================================================
# TestDefaultSchedule - 5 tests
# =============================================================================


class TestDefaultSchedule:
    """Test the 18-stage schedule."""

    def test_golden_rows(self):
        """Every stage matches its row field for field."""
        from vbr_video_codec.trainer import default_schedule

        schedule = default_schedule()
        assert [s.id for s in schedule] == list(range(1, 19))
        assert [(s.loss_type, s.frames, s.lr, s.segment_type) for s in schedule] == GOLDEN
        assert all(s.epochs == 20 for s in schedule)

    def test_freezing_plan(self):
        """Stages 1-4 freeze non-motion, 5-11 freeze motion, 12-18 train all."""
        from vbr_video_codec.trainer import MOTION_ALL, NON_MOTION, default_schedule

        for stage in default_schedule():
            if stage.id <= 4:
                assert stage.frozen_groups == {NON_MOTION}
            elif stage.id <= 11:
                assert stage.frozen_groups == {MOTION_ALL}
            else:
                assert stage.frozen_groups == set()

    def test_loss_frames(self):
        """IP penalizes frame 1, PP frames >= 2, IPP every P-frame."""
        from vbr_video_codec.trainer import default_schedule

        schedule = {s.id: s for s in default_schedule()}
        assert schedule[1].loss_frames == (1,)
        assert schedule[4].loss_frames == (2,)
        assert schedule[7].loss_frames == (2, 3, 4, 5)
        assert schedule[18].loss_frames == (1, 2, 3, 4, 5)

    def test_motion_only_and_intra_flags(self):
        """meD/meRD stages are motion-only; IP stages with trainable non-motion train the intra codec."""
        from vbr_video_codec.trainer import default_schedule

        schedule = default_schedule()
        assert [s.id for s in schedule if s.motion_only] == [1, 2, 4]
        assert [s.id for s in schedule if s.trains_intra] == [8, 12]

    def test_invalid_stage(self):
        """Inconsistent rows are rejected."""
        from vbr_video_codec.exceptions import ConfigurationError
        from vbr_video_codec.trainer import StageConfig

        with pytest.raises(ConfigurationError):
            StageConfig(id=1, loss_type="meD", frames=3, lr=1e-4, segment_type="IP")
        with pytest.raises(ConfigurationError):
            StageConfig(id=1, loss_type="mse", frames=2, lr=1e-4, segment_type="IP")


# =============================================================================
# TestOverrides - 3 tests
# =============================================================================


class TestOverrides:
    """Test schedule overrides and stage selection."""

    def test_global_epochs_and_stage_override(self):
        """A global epoch count applies first, then per-stage fields."""
        from vbr_video_codec.trainer import apply_overrides, default_schedule

        schedule = apply_overrides(default_schedule(), [{"id": 7, "lr": 1e-3, "epochs": 5}], epochs=2)
        by_id = {s.id: s for s in schedule}
        assert by_id[7].lr == 1e-3 and by_id[7].epochs == 5
        assert by_id[8].epochs == 2 and by_id[8].lr == 5e-5

    def test_unknown_stage(self):
        """Overrides must name an existing stage."""
        from vbr_video_codec.exceptions import ConfigurationError
        from vbr_video_codec.trainer import apply_overrides, default_schedule

        with pytest.raises(ConfigurationError):
            apply_overrides(default_schedule(), [{"id": 19, "lr": 1e-3}])

    def test_select_range(self):
        """Stage selection is inclusive."""
        from vbr_video_codec.trainer import default_schedule, select_stages

        assert [s.id for s in select_stages(default_schedule(), 3, 5)] == [3, 4, 5]


# =============================================================================
# TestFreezing - 2 tests
# =============================================================================


class TestFreezing:
    """Test requires_grad handling per stage."""

    def test_motion_stage_freezes_rest(self, tiny_model):
        """Stage 1 leaves only motion parameters trainable."""
        from vbr_video_codec.trainer import apply_freezing, default_schedule

        groups = apply_freezing(tiny_model, default_schedule()[0])
        assert all(p.requires_grad for _, p in groups.motion)
        assert not any(p.requires_grad for _, p in groups.non_motion)

    def test_unfreeze_all(self, tiny_model):
        """unfreeze_all restores every parameter."""
        from vbr_video_codec.trainer import apply_freezing, default_schedule, unfreeze_all

        apply_freezing(tiny_model, default_schedule()[4])
        unfreeze_all(tiny_model)
        assert all(p.requires_grad for p in tiny_model.parameters())
