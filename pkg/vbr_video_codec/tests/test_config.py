"""Tests for vbr_video_codec.config module."""

import pytest

# =============================================================================
# TestLoadSettings - 6 tests
# =============================================================================


class TestLoadSettings:
    """Test profile merging and overrides."""

    def test_defaults(self):
        """Without arguments the default profile applies."""
        from vbr_video_codec.config import load_settings

        settings = load_settings()
        assert settings.rate.n == 64
        assert settings.rate.lambda_min == 0.002
        assert settings.rate.lambda_max == 0.25
        assert settings.model.channels == (32, 64, 96)
        assert settings.trainer.distortion_scale == 1.0

    def test_desk_profile(self):
        """The desk profile shrinks widths, crops and epochs."""
        from vbr_video_codec.config import load_settings

        settings = load_settings(desk=True)
        assert settings.model.channels == (16, 32, 48)
        assert settings.model.mv_channels == 32
        assert settings.model.ctx_channels == 48
        assert settings.data.crop_size == 64
        assert settings.trainer.epochs == 2
        assert settings.trainer.intra_warmup_epochs == 2

    def test_user_file_then_overrides(self, tmp_path):
        """A user file is merged before dotted overrides."""
        from vbr_video_codec.config import load_settings

        path = tmp_path / "run.yaml"
        path.write_text("rate:\n  m: 3.0\ntrainer:\n  seed: 5\n")
        settings = load_settings(path, overrides={"trainer.seed": 9})
        assert settings.rate.m == 3.0
        assert settings.trainer.seed == 9

    def test_unknown_key_rejected(self):
        """Misspelled keys are reported with their dotted name."""
        from vbr_video_codec.config import load_settings
        from vbr_video_codec.exceptions import ConfigurationError

        with pytest.raises(ConfigurationError, match="rate.lamda_min"):
            load_settings(overrides={"rate.lamda_min": 0.1})

    @pytest.mark.parametrize(
        "overrides,key",
        [
            ({"rate.n": 30}, "rate.n"),
            ({"rate.train_quant": "fuzzy"}, "rate.train_quant"),
            ({"model.channels": [8, 8]}, "model.channels"),
            ({"trainer.batch_size": 0}, "trainer.batch_size"),
            ({"data.crop_size": 40}, "data.crop_size"),
            ({"trainer.stage_overrides": [{"id": 3, "momentum": 0.9}]}, "trainer.stage_overrides"),
        ],
    )
    def test_invalid_values_rejected(self, overrides, key):
        """Validation names the offending key."""
        from vbr_video_codec.config import load_settings
        from vbr_video_codec.exceptions import ConfigurationError

        with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
            load_settings(overrides=overrides)

    def test_bad_yaml_file(self, tmp_path):
        """A YAML file that is not a mapping is rejected."""
        from vbr_video_codec.config import load_settings
        from vbr_video_codec.exceptions import ConfigurationError

        path = tmp_path / "bad.yaml"
        path.write_text("- just\n- a list\n")
        with pytest.raises(ConfigurationError):
            load_settings(path)


# =============================================================================
# TestCodecSettings - 3 tests
# =============================================================================


class TestCodecSettings:
    """Test serialization and hashing."""

    def test_round_trip_through_dict(self, tiny_settings):
        """as_dict output rebuilds identical settings."""
        from vbr_video_codec.config import settings_from_dict

        assert settings_from_dict(tiny_settings.as_dict()) == tiny_settings

    def test_hash_tracks_changes(self):
        """Equal settings hash equally; any change alters the hash."""
        from vbr_video_codec.config import load_settings

        a = load_settings()
        b = load_settings()
        c = load_settings(overrides={"trainer.seed": 1})
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_sampler_config(self):
        """Rate settings map onto the sampler configuration."""
        from vbr_video_codec.config import load_settings

        cfg = load_settings(overrides={"rate.m": 1.0}).sampler_config()
        assert cfg.m == 1.0
        assert cfg.n == 64
        assert cfg.q_min == (0.5,)
        assert cfg.q_max == (2.0,)
