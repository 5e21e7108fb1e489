"""Exception hierarchy for the fault-detection pipeline.

Two broad families matter for the CLI exit codes: input/format problems
(bad files, bad shapes, bad configs) and numeric failures (degenerate
data that makes a computation undefined).
"""


class SoundFaultError(Exception):
    """Base class for all package errors."""


class InputError(SoundFaultError):
    """Malformed or unsupported input data (CLI exit code 2)."""


class AudioFormatError(InputError):
    """Malformed RIFF/WAVE container."""


class UnsupportedCodecError(InputError):
    """WAV encoding other than PCM16 / float32."""


class TruncatedDataError(InputError):
    """WAV data chunk shorter than the header promises."""


class ConfigurationError(InputError):
    """Invalid parameter combination (e.g. mel filter with no support)."""


class ShapeError(InputError):
    """Array dimensions do not match the operation's contract."""


class CorruptArtifactError(InputError):
    """Stored artifact bytes do not match their recorded digest."""


class NumericError(SoundFaultError):
    """Computation undefined for this data (CLI exit code 3)."""


class InsufficientDataError(NumericError):
    """Too few samples for the requested operation."""


class DegenerateLabelsError(NumericError):
    """A single-class label set where both classes are required."""
