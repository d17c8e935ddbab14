"""Exception hierarchy for the deconvolution pipeline.

Two roots keep the CLI exit codes simple: ``ConfigError`` for invalid user input or
configuration (exit 2) and ``SignalError`` for failures of the numerical pipeline (exit 3).
Both derive from ``ValueError`` so library callers can catch them generically.
"""


class ConfigError(ValueError):
    """Invalid configuration, preset name, count or schedule."""


class SignalError(ValueError):
    """A signal, disk or video cannot be processed as requested."""


class UnknownPresetError(ConfigError):
    """Preset name is not one of the known harmonic sets."""


class InvalidCountError(ConfigError):
    """A channel, harmonic or sample count is out of range."""


class InvalidHarmonicsError(ConfigError):
    """Harmonic amplitudes and frequencies do not describe a valid periodic signal."""


class EmptyScheduleError(ConfigError):
    """A quasi-periodic schedule has no segments or a non-positive duration."""


class WindowTooLongError(ConfigError):
    """RR window length outside the supported range or longer than the signal."""


class NyquistViolationError(SignalError):
    """Sample rate too low for the highest frequency present."""


class EmptySignalError(SignalError):
    """Signal has no harmonics or no samples."""


class ZeroNormError(SignalError):
    """Normalization requested for an identically zero signal."""


class LengthMismatchError(SignalError):
    """Arrays that must share a length do not."""


class HarmonicMismatchError(SignalError):
    """Channel bank carries fewer harmonic gains than the signal needs."""


class ZeroSignalError(SignalError):
    """Every response or spectrum is identically zero."""


class DegenerateDiskError(SignalError):
    """All projected points collapse onto an axis or the origin."""


class ZeroOrientationError(SignalError):
    """Orientation point is at the origin of the disk."""


class EmptyMembershipError(SignalError):
    """No channel falls inside the selected half-annulus."""


class AllEmptyError(SignalError):
    """Every radius of exclusion in a sweep produced an empty membership."""


class SegmentTooShortError(SignalError):
    """Segment shorter than one fundamental period."""


class ZeroFrameError(SignalError):
    """Reference frame for the proxy signal is all zeros."""


class ProxyRangeError(SignalError):
    """Proxy samples fall outside the cosine range [-1, 1]."""


class NoPeakError(SignalError):
    """Spectrum inside the requested band is numerically flat."""


class TooShortError(SignalError):
    """Signal does not span the required number of periods."""


class DimensionMismatchError(SignalError):
    """Frames in a sequence do not share dimensions."""


class CorruptHeaderError(SignalError):
    """PGM header or raw blob size is inconsistent."""


class TooFewFramesError(SignalError):
    """Video shorter than the frame spacing used for pruning."""


class EmptySelectionError(SignalError):
    """Pixel pruning selected no pixels (static video)."""


class ZeroVarianceError(SignalError):
    """Correlation requested on a constant signal."""
