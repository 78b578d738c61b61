"""Exception hierarchy shared across the package."""


class HdcowError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(HdcowError, ValueError):
    """An argument is outside its documented domain."""


class ProtocolError(HdcowError, RuntimeError):
    """A session endpoint observed a classical-channel ordering or
    consistency violation and must abort."""


class UndefinedEstimateError(HdcowError, RuntimeError):
    """An estimator was asked for a value its inputs cannot define
    (empty sample, zero reference counts)."""


class NoThresholdError(HdcowError, RuntimeError):
    """The secure fraction is non-positive already at zero error, so no
    error threshold exists for the given parameters."""


class DecodeError(HdcowError, ValueError):
    """Base class for wire-format decoding failures."""


class TruncatedError(DecodeError):
    """Fewer bytes than the header or declared payload length."""


class BadMagicError(DecodeError):
    """Leading magic bytes are not the protocol magic."""


class UnsupportedVersionError(DecodeError):
    """Unknown wire-format version byte."""


class UnknownTagError(DecodeError):
    """Message type tag outside the defined set."""


class LengthMismatchError(DecodeError):
    """Declared payload length disagrees with the actual payload size or
    with the tag's fixed field layout."""
