"""Exception types shared across the engine.

Errors are split into two families so the CLI can map them onto stable
exit codes: `InputError` (exit 2) for malformed inputs and schema
violations, `NumericError` (exit 3) for numerical failures.
"""


class EngineError(Exception):
    pass


class InputError(EngineError):
    pass


class NumericError(EngineError):
    pass


# tensors / bundle container
class BadMagic(InputError):
    pass


class TruncatedBlob(InputError):
    pass


class OverlappingEntries(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class ZeroTargetSize(InputError):
    pass


class IoFailure(InputError):
    pass


# bags
class BoxOutsideCrop(InputError):
    pass


class DegenerateBox(InputError):
    pass


class EmptyBagSet(InputError):
    pass


class DimMismatch(InputError):
    pass


# transport
class NonFiniteCost(InputError):
    pass


class NumericalUnderflow(NumericError):
    pass


# correspondence
class ChannelMismatch(InputError):
    pass


class NonPositiveGamma(InputError):
    pass


# crf
class NonPositiveZeta(InputError):
    pass


class NonFiniteBelief(NumericError):
    pass


class OutOfRange(InputError):
    pass


# losses / teacher
class NonPositiveTau(InputError):
    pass


class LengthMismatch(InputError):
    pass


class EmptyPredictionSet(InputError):
    pass


class UnknownCategory(InputError):
    pass


class ConfigError(InputError):
    pass
