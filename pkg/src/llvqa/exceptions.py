"""Exception hierarchy shared across the package."""


class LLVQAError(Exception):
    """Base class for every error raised by llvqa."""


class VideoFormatError(LLVQAError, ValueError):
    """Container header or stream layout is malformed."""


class TruncatedVideoError(VideoFormatError):
    """The payload ended before all announced frames were read."""

    def __init__(self, frame_index, message=None):
        self.frame_index = frame_index
        super().__init__(message or f"truncated payload at frame {frame_index}")


class InsufficientFramesError(LLVQAError, ValueError):
    """The video has fewer frames than requested key frames / clips."""


class FeatureFileError(LLVQAError):
    """Base class for LVQF read/write failures. ``code`` is stable per subclass."""

    code = "lvqf"


class FeatureMagicError(FeatureFileError):
    code = "bad-magic"


class FeatureVersionError(FeatureFileError):
    code = "bad-version"


class FeatureDimensionError(FeatureFileError):
    code = "dimension-mismatch"


class FeatureTruncatedError(FeatureFileError):
    code = "truncated"


class FeatureLookupError(LLVQAError, LookupError):
    """A file-backed provider has no entry for the requested frame / clip."""


class ShapeError(LLVQAError, ValueError):
    """Array shapes disagree with the model parameters."""


class CompatibilityError(LLVQAError):
    """Checkpoint or features were produced under an incompatible configuration."""


class CheckpointTruncatedError(CompatibilityError):
    """Checkpoint file ended early."""


class ModelStateError(LLVQAError, RuntimeError):
    """backward() called without a matching forward()."""


class FitError(LLVQAError, ValueError):
    """A least-squares fit could not be computed."""


class UndefinedCorrelationError(LLVQAError, ValueError):
    """Correlation requested for a constant vector."""
