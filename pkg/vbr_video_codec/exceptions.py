"""Exceptions raised by the codec library.

Every exception carries a short machine-readable ``code`` that the command line
prints as a prefix, so scripts can branch on failures without parsing messages.
"""


class CodecError(Exception):
    """Base class for all codec errors."""

    code = "E_CODEC"


class ConfigurationError(CodecError):
    """Invalid or inconsistent settings."""

    code = "E_CONFIG"


class ArgumentError(CodecError, ValueError):
    """A function argument is out of range or has the wrong shape."""

    code = "E_ARGUMENT"


class UsageError(CodecError):
    """Invalid command-line usage."""

    code = "E_USAGE"


class StateError(CodecError):
    """Decoder state is missing or cannot serve the request."""

    code = "E_STATE"


class BitstreamError(CodecError):
    """Malformed, truncated, or mismatched bitstream."""

    code = "E_BITSTREAM"


class ModelError(CodecError):
    """A symbol has zero probability under the entropy model."""

    code = "E_MODEL"


class EncodeError(CodecError):
    """A symbol lies outside the entropy model's support."""

    code = "E_ENCODE"


class DataIOError(CodecError, OSError):
    """Reading or writing raw video data failed."""

    code = "E_IO"


class DataError(CodecError):
    """Training data does not satisfy the stage requirements."""

    code = "E_DATA"


class EvaluationError(CodecError):
    """Metrics cannot be computed for the given curves."""

    code = "E_EVAL"


class TrainingError(CodecError):
    """Training diverged (non-finite loss)."""

    code = "E_TRAINING"


class CheckpointError(CodecError, OSError):
    """Checkpoint could not be written or read."""

    code = "E_CHECKPOINT"
