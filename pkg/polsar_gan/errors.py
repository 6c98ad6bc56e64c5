"""
Error Types
===========
Every failure the package reports on purpose derives from PolsarGanError.
Each class also subclasses the closest builtin so plain ``except ValueError``
keeps working for callers that do not know this module.
"""


class PolsarGanError(Exception):
    """Base class for all domain errors."""


# ==============================================================================
# TENSORS AND LAYERS
# ==============================================================================

class ShapeMismatchError(PolsarGanError, ValueError):
    pass


class DegenerateOutputError(PolsarGanError, ValueError):
    """Kernel/stride/padding leave no valid output position."""


class MissingCacheError(PolsarGanError, RuntimeError):
    """backward() called before forward()."""


class BatchTooSmallError(PolsarGanError, ValueError):
    pass


# ==============================================================================
# TRAINING
# ==============================================================================

class ConfigError(PolsarGanError, ValueError):
    pass


class LabelRangeError(PolsarGanError, ValueError):
    pass


class EmptyLabeledSetError(PolsarGanError, ValueError):
    pass


# ==============================================================================
# DATA
# ==============================================================================

class NonPsdSigmaError(PolsarGanError, ValueError):
    def __init__(self, message: str, leading_minor: int):
        super().__init__(message)
        self.leading_minor = leading_minor


class LayoutError(PolsarGanError, ValueError):
    pass


class QuotaError(PolsarGanError, ValueError):
    def __init__(self, message: str, class_id: int):
        super().__init__(message)
        self.class_id = class_id


class FileFormatError(PolsarGanError, ValueError):
    pass


class BadMagicError(FileFormatError):
    pass


class TruncatedFileError(FileFormatError):
    def __init__(self, message: str, expected: int, actual: int):
        super().__init__(message)
        self.expected = expected
        self.actual   = actual


class DimensionOverflowError(FileFormatError):
    pass


class CheckpointError(FileFormatError):
    pass


class ModelMismatchError(PolsarGanError, ValueError):
    """Checkpoint and data disagree (class count, patch size)."""


# ==============================================================================
# METRICS
# ==============================================================================

class EmptySampleError(PolsarGanError, ValueError):
    pass


class UndefinedMetricError(PolsarGanError, ValueError):
    pass
