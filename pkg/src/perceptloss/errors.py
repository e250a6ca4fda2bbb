"""Exception types raised across the package.

Names follow the error vocabulary used in reports (``PairReport.error``), so
``error_code(exc)`` gives a stable string for any of them.
"""


class PerceptLossError(Exception):
    """Base class for every error raised by this package."""


# audio / manifest / config
class UnsupportedEncoding(PerceptLossError, ValueError):
    pass


class CorruptFile(PerceptLossError, ValueError):
    pass


class EmptyAudio(PerceptLossError, ValueError):
    pass


class RateTooLow(PerceptLossError, ValueError):
    pass


class MissingColumn(PerceptLossError, ValueError):
    pass


class DuplicatePairId(PerceptLossError, ValueError):
    pass


class EmptyManifest(PerceptLossError, ValueError):
    pass


class ConfigError(PerceptLossError, ValueError):
    pass


# signal analysis
class SignalTooShort(PerceptLossError, ValueError):
    pass


class BandAboveNyquist(PerceptLossError, ValueError):
    pass


class AllFramesSilent(PerceptLossError, ValueError):
    pass


class LengthMismatch(PerceptLossError, ValueError):
    pass


class DegenerateBand(PerceptLossError, ValueError):
    pass


# pitch
class NoVoicedFrames(PerceptLossError, ValueError):
    pass


class ContourTooShort(PerceptLossError, ValueError):
    pass


class DegenerateContour(PerceptLossError, ValueError):
    pass


# scorer weights
class BadChecksum(PerceptLossError, ValueError):
    pass


class ShapeMismatch(PerceptLossError, ValueError):
    pass


class UnsupportedVersion(PerceptLossError, ValueError):
    pass


# objective
class NonFiniteComponent(PerceptLossError, ValueError):
    pass


def error_code(exc: BaseException) -> str:
    """Short name for an exception, e.g. ``FileNotFoundError`` -> ``FileNotFound``."""
    name = type(exc).__name__
    if name.endswith("Error") and name != "Error":
        name = name[: -len("Error")]
    return name
