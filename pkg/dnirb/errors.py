"""
Error hierarchy for DnIRB
=========================

Every library failure is a DnIRBError. The exit_code attribute is what the
command line returns when the error reaches it.
"""

from typing import List, Optional, Sequence

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_CHECKPOINT = 5


class DnIRBError(Exception):
    """Base class for all toolkit errors"""

    exit_code = EXIT_DATA


class ConfigurationError(DnIRBError, ValueError):
    """Invalid hyperparameter or option value"""

    exit_code = EXIT_USAGE


class ShapeMismatchError(DnIRBError, ValueError):
    """An operation received tensors whose shapes do not line up"""

    def __init__(self, op: str, expected: Sequence, actual: Sequence, detail: Optional[str] = None):
        self.op = op
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        message = f"{op}: expected {self.expected}, got {self.actual}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class ChannelMismatchError(ShapeMismatchError):
    """Channel count differs from what the layer was built for"""

    def __init__(self, op: str, expected: int, actual: int):
        self.expected_channels = expected
        self.actual_channels = actual
        super().__init__(op, (expected,), (actual,), detail="channel count")


class ImageFormatError(DnIRBError):
    """Image file could not be decoded"""


class MalformedHeaderError(ImageFormatError):
    pass


class UnsupportedDepthError(ImageFormatError):
    pass


class TruncatedImageError(ImageFormatError):
    pass


class ImageRangeError(DnIRBError, ValueError):
    """Intensities outside the valid [0, 1] range"""


class ImageTooSmallError(DnIRBError, ValueError):
    """Image smaller than the requested patch size"""


class CheckpointError(DnIRBError):
    exit_code = EXIT_CHECKPOINT


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class HyperparameterMismatchError(CheckpointError):
    """Checkpoint hyperparameters differ from the requested network"""

    def __init__(self, field: str, stored, requested):
        self.field = field
        self.stored = stored
        self.requested = requested
        super().__init__(f"checkpoint has {field}={stored}, request asks for {field}={requested}")


class NumericAbortError(DnIRBError):
    """Training produced a non-finite loss"""

    exit_code = EXIT_NUMERIC

    def __init__(self, step: int, loss: float, checkpoints: Optional[List[str]] = None):
        self.step = step
        self.loss = loss
        # step checkpoints written by the aborted run
        self.checkpoints = list(checkpoints or [])
        super().__init__(f"non-finite loss {loss!r} at step {step}")


class GradientCheckError(DnIRBError):
    """Analytic and finite-difference gradients disagree"""

    exit_code = EXIT_NUMERIC
