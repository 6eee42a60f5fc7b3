"""Tests for vbr_video_codec.models.frame_codec and models.lstffm modules."""

import pytest
import torch

# =============================================================================
# TestDecodedState - 5 tests
# =============================================================================


def _marked(value: float) -> torch.Tensor:
    return torch.full((1, 1, 2, 2), float(value))


def _features():
    return (torch.zeros(1, 1, 2, 2),) * 3


class TestDecodedState:
    """Test the rolling decoder memory and the long-term reference rule."""

    def test_long_term_rule_exhaustive(self):
        """Frames 1..12 use x_hat[0] while t < 4 and x_hat[t - 4] afterwards."""
        from vbr_video_codec.models import DecodedState, long_term_ref

        state = DecodedState.from_intra(_marked(0), _features())
        for t in range(1, 13):
            expected = 0 if t < 4 else t - 4
            assert long_term_ref(state, t)[0, 0, 0, 0].item() == expected
            state = state.push(_marked(t), _features())

    def test_ring_keeps_four_frames(self):
        """Only the newest four reconstructions are kept."""
        from vbr_video_codec.models import DecodedState

        state = DecodedState.from_intra(_marked(0), _features())
        for t in range(1, 7):
            state = state.push(_marked(t), _features())
        assert sorted(state.frames) == [3, 4, 5, 6]
        assert state.frame[0, 0, 0, 0].item() == 6
        assert state.x0[0, 0, 0, 0].item() == 0

    def test_empty_state(self):
        """An empty state has no references."""
        from vbr_video_codec.exceptions import StateError
        from vbr_video_codec.models import long_term_ref

        with pytest.raises(StateError):
            long_term_ref(None, 1)

    def test_t_must_be_positive(self):
        """The intra frame has no long-term reference."""
        from vbr_video_codec.exceptions import ArgumentError
        from vbr_video_codec.models import DecodedState, long_term_ref

        with pytest.raises(ArgumentError):
            long_term_ref(DecodedState.from_intra(_marked(0), _features()), 0)

    def test_evicted_frame(self):
        """Asking for a frame that left the ring is a state error."""
        from vbr_video_codec.exceptions import StateError
        from vbr_video_codec.models import DecodedState, long_term_ref

        state = DecodedState.from_intra(_marked(0), _features())
        for t in range(1, 8):
            state = state.push(_marked(t), _features())
        with pytest.raises(StateError):
            long_term_ref(state, 7)


# =============================================================================
# TestLSTFFM - 4 tests
# =============================================================================


class TestLSTFFM:
    """Test the long-short-term feature fusion."""

    def _inputs(self, channels=(4, 6, 8), size=16):
        feat = tuple(torch.rand(1, c, size // 2**i, size // 2**i) for i, c in enumerate(channels))
        return feat, torch.rand(1, 3, size, size), torch.zeros(1, 2, size, size)

    def test_output_scales(self):
        """Context keeps the three feature scales and widths."""
        from vbr_video_codec.models import LSTFFM

        module = LSTFFM(3, (4, 6, 8))
        feat, lt, flow = self._inputs()
        out = module(feat, lt, flow)
        assert [tuple(o.shape) for o in out] == [(1, 4, 16, 16), (1, 6, 8, 8), (1, 8, 4, 4)]

    def test_long_term_branch_matters(self):
        """Changing the long-term reference changes the context."""
        from vbr_video_codec.models import LSTFFM

        module = LSTFFM(3, (4, 6, 8))
        feat, lt, flow = self._inputs()
        a = module(feat, lt, flow)
        b = module(feat, lt + 1.0, flow)
        assert not torch.allclose(a[0], b[0])

    def test_without_long_term(self):
        """The ablation ignores the long-term reference entirely."""
        from vbr_video_codec.models import LSTFFM

        module = LSTFFM(3, (4, 6, 8), use_long_term=False)
        assert module.long_term is None
        feat, lt, flow = self._inputs()
        a = module(feat, lt, flow)
        b = module(feat, lt + 1.0, flow)
        for x, y in zip(a, b):
            assert torch.equal(x, y)

    def test_wrong_feature_shape(self):
        """Features must match the configured widths."""
        from vbr_video_codec.exceptions import ArgumentError
        from vbr_video_codec.models import LSTFFM

        module = LSTFFM(3, (4, 6, 8))
        feat, lt, flow = self._inputs(channels=(4, 6, 6))
        with pytest.raises(ArgumentError):
            module(feat, lt, flow)


# =============================================================================
# TestContextualCoders - 2 tests
# =============================================================================


class TestContextualCoders:
    """Test the conditional encoder, decoder and prior shapes."""

    def test_encoder_decoder_shapes(self):
        """The latent sits at 1/16 scale and the decoder returns three feature scales."""
        from vbr_video_codec.models.frame_codec import ContextPrior, ContextualDecoder, ContextualEncoder

        channels = (4, 6, 8)
        context = tuple(torch.rand(1, c, 32 // 2**i, 32 // 2**i) for i, c in enumerate(channels))
        y = ContextualEncoder(3, channels, 5)(torch.rand(1, 3, 32, 32), context)
        assert y.shape == (1, 5, 2, 2)
        x_hat, feat = ContextualDecoder(3, channels, 5)(y, context)
        assert x_hat.shape == (1, 3, 32, 32)
        assert [f.shape[1] for f in feat] == list(channels)
        means, scales = ContextPrior(8, 5)(context[2])
        assert means.shape == scales.shape == (1, 5, 2, 2)
        assert torch.all(scales >= 0)

    def test_intra_codec_shapes(self):
        """The intra codec emits a 1/16 latent and three-scale features."""
        from vbr_video_codec.models.frame_codec import IntraCodec

        codec = IntraCodec(3, (4, 6, 8), latent_channels=5, support=16)
        idx = torch.tensor([10])
        y = codec.analysis(torch.rand(1, 3, 32, 32), idx)
        assert y.shape == (1, 5, 2, 2)
        x_hat, feat = codec.synthesis(torch.round(y), idx)
        assert x_hat.shape == (1, 3, 32, 32)
        assert [tuple(f.shape[2:]) for f in feat] == [(32, 32), (16, 16), (8, 8)]
