"""Exception types raised by bellcal."""


class BellcalError(ValueError):
    """Base class for all bellcal errors."""


class ZeroNorm(BellcalError):
    pass


class TagConflict(BellcalError):
    pass


class NonHermitian(BellcalError):
    pass


class FrequencyCollision(BellcalError):
    pass


class InvalidSampleCount(BellcalError):
    pass


class SampleCountMismatch(BellcalError):
    pass


class UnknownChannel(BellcalError, KeyError):
    pass


class MissingChannels(BellcalError):
    pass


class DegenerateQuad(BellcalError):
    pass
