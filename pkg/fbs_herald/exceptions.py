from __future__ import annotations


class FBSError(Exception):
    """Base class for every error raised by fbs_herald."""


class ValidationError(FBSError, ValueError):
    pass


class UsageError(FBSError):
    """Operation called outside its regime (e.g. a lossless formula with gamma > 0)."""


class TruncationError(FBSError):
    """Probability weight reached the highest retained level."""


class NumericError(FBSError):
    pass


class IntegratorError(NumericError):
    pass


class HeraldError(FBSError):
    pass
