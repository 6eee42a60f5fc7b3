from .codec import InterOutput, InterResult, IntraOutput, IntraResult, VideoCodec, encode_inter, encode_intra
from .frame_codec import CtxLatent, DecodedState, long_term_ref
from .lstffm import LSTFFM, lstffm_fuse
from .motion import MotionCodec, MvLatent, PyramidFlowNet, downscale_flow, estimate_motion, mv_decode, mv_encode, warp

__all__ = [
    "CtxLatent",
    "DecodedState",
    "InterOutput",
    "InterResult",
    "IntraOutput",
    "IntraResult",
    "LSTFFM",
    "MotionCodec",
    "MvLatent",
    "PyramidFlowNet",
    "VideoCodec",
    "downscale_flow",
    "encode_inter",
    "encode_intra",
    "estimate_motion",
    "long_term_ref",
    "lstffm_fuse",
    "mv_decode",
    "mv_encode",
    "warp",
]
