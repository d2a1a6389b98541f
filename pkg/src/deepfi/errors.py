"""Exception hierarchy shared by all deepfi modules."""


class DeepFiError(Exception):
    """Base class for every error raised by this package."""


class EmptyInput(DeepFiError):
    pass


class DegenerateRange(DeepFiError):
    pass


class ZeroSigma(DeepFiError):
    pass


class ShapeMismatch(DeepFiError):
    pass


class NonFinite(DeepFiError):
    pass


class OutOfRange(DeepFiError):
    pass


class TooLarge(DeepFiError):
    pass


class Divergence(DeepFiError):
    pass


class DegenerateScale(DeepFiError):
    pass


class OutOfRoom(DeepFiError):
    pass


class EmptyDb(DeepFiError):
    pass


class LengthMismatch(DeepFiError):
    pass


class DatasetFormatError(DeepFiError):
    pass


class DbFormatError(DeepFiError):
    """Base for fingerprint database decoding failures."""


class BadMagic(DbFormatError):
    pass


class VersionMismatch(DbFormatError):
    pass


class Truncated(DbFormatError):
    pass


class NonFiniteWeight(DbFormatError):
    pass


class AllZeroLikelihood(UserWarning):
    """Warning category: every likelihood vanished, posterior fell back to uniform."""
