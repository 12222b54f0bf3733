"""Exception hierarchy.

Every error raised by the package derives from :class:`CauchySketchError`.
Where a builtin exception type fits (``ValueError``, ``IndexError``) the
class inherits from it as well, so callers can keep catching the builtins.
"""


class CauchySketchError(Exception):
    """Base class for all package errors."""


# ingestion / core
class ParseError(CauchySketchError, ValueError):
    def __init__(self, row, col, text=""):
        self.row = row
        self.col = col
        super().__init__(f"cannot parse cell at row {row}, column {col}: {text!r}")


class RaggedRowsError(CauchySketchError, ValueError):
    def __init__(self, row, expected, got):
        self.row = row
        super().__init__(f"row {row} has {got} columns, expected {expected}")


class LengthMismatchError(CauchySketchError, ValueError):
    pass


# sampling
class InvalidGeneratorError(CauchySketchError, ValueError):
    pass


class NonPositiveScaleError(CauchySketchError, ValueError):
    pass


# projection / sketch files
class DimensionMismatchError(CauchySketchError, ValueError):
    pass


class IndexOutOfRangeError(CauchySketchError, IndexError):
    pass


class SketchFormatError(CauchySketchError, ValueError):
    """Base for on-disk sketch decoding failures."""


class BadMagicError(SketchFormatError):
    pass


class VersionMismatchError(SketchFormatError):
    pass


class ChecksumMismatchError(SketchFormatError):
    pass


# estimators
class EmptySampleError(CauchySketchError, ValueError):
    pass


class InfiniteBiasError(CauchySketchError, ValueError):
    pass


class EvenKError(CauchySketchError, ValueError):
    pass


class KTooSmallError(CauchySketchError, ValueError):
    pass


class LambdaOutOfRangeError(CauchySketchError, ValueError):
    pass


class ZeroSampleWithNegativeLambdaError(CauchySketchError, ValueError):
    pass


class NoConvergenceError(CauchySketchError, RuntimeError):
    pass


class UnsupportedKindError(CauchySketchError, ValueError):
    pass


class BelowValidityThresholdError(CauchySketchError, ValueError):
    pass


# distributions / bounds
class EpsilonOutOfRangeError(CauchySketchError, ValueError):
    pass


class NonPositiveYError(CauchySketchError, ValueError):
    pass


class KBelowThresholdError(CauchySketchError, ValueError):
    pass


class ConstantTooSmallError(CauchySketchError, ValueError):
    pass


class ParamOutOfRangeError(CauchySketchError, ValueError):
    pass


# simulation / cli
class InvalidSpecError(CauchySketchError, ValueError):
    pass


class EstimatorKindMismatchError(CauchySketchError, ValueError):
    pass
