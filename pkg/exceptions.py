"""
Error types raised by the correction services.

Every error carries the process exit code the CLI maps it to:
1 for usage/configuration problems, 2 for data problems, 3 for internal faults.
"""


class CorrectionError(ValueError):
    """Base class for all correction errors"""
    exit_code = 3


class ConfigError(CorrectionError):
    exit_code = 1


class LengthMismatch(CorrectionError):
    exit_code = 2


class EmptySource(CorrectionError):
    exit_code = 2


class SliceLengthMismatch(CorrectionError):
    exit_code = 2


class EmptyCorpus(CorrectionError):
    exit_code = 2


class IndexOutOfRange(CorrectionError):
    exit_code = 2


class SpanOutOfRange(CorrectionError):
    exit_code = 2


class NotNormalized(CorrectionError):
    exit_code = 2


class SpanOverflow(CorrectionError):
    exit_code = 2


class CandidateViolation(CorrectionError):
    exit_code = 2


class SearchSpaceTooLarge(CorrectionError):
    exit_code = 2


class NoCompleteHypothesis(CorrectionError):
    # Unreachable while identity characters and single-character tokens exist
    exit_code = 3


class ResourceError(CorrectionError):
    """A resource file is missing or malformed; the message names the path"""
    exit_code = 2


class CorpusFormatError(CorrectionError):
    exit_code = 2


class ModelFormatError(CorrectionError):
    exit_code = 2
