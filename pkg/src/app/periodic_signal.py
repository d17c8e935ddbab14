"""Periodic generating signals: harmonic descriptions, sampling and normalization.

A generating signal is a finite Fourier sine series ``g(t) = sum_k G_k sin(w_k t + theta)``
with a single phase shared by all harmonics. The seven built-in presets reproduce the signal
set used for the simulation experiments; their frequencies are tabulated in deci-Hz and
converted to Hz here.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from app.quad_basis import time_average_norm
from app.utils.errors import (
    EmptySignalError,
    InvalidHarmonicsError,
    NyquistViolationError,
    UnknownPresetError,
    ZeroNormError,
)
from app.utils.setup_logger import setup_logger
from app.utils.types import NormalizeMode, PresetName, parse_enum
from app.utils.validate_data import as_float_array, validate_positive

logger = setup_logger(__name__)

TWO_PI = 2.0 * np.pi
DEFAULT_SAMPLE_RATE_HZ = 100.0


@dataclass(frozen=True)
class GeneratingSignal:
    """Harmonic description of a periodic source.

    Attributes:
        amplitudes: Harmonic amplitudes ``G_k``.
        frequencies: Angular frequencies ``w_k`` in rad/s, strictly increasing.
        theta: Phase shared by every harmonic, in radians.

    """

    amplitudes: tuple[float, ...]
    frequencies: tuple[float, ...]
    theta: float = 0.0

    def __post_init__(self) -> None:
        """Check the harmonic invariants."""
        if len(self.amplitudes) != len(self.frequencies):
            raise InvalidHarmonicsError(
                f"{len(self.amplitudes)} amplitudes but {len(self.frequencies)} frequencies"
            )
        w = np.asarray(self.frequencies, dtype=float)
        if np.any(w <= 0):
            raise InvalidHarmonicsError("harmonic frequencies must be positive")
        if np.any(np.diff(w) <= 0):
            raise InvalidHarmonicsError("harmonic frequencies must be strictly increasing")

    @classmethod
    def from_hz(
        cls, amplitudes: list[float], frequencies_hz: list[float], theta: float = 0.0
    ) -> "GeneratingSignal":
        """Build a signal from frequencies given in Hz."""
        return cls(
            amplitudes=tuple(float(a) for a in amplitudes),
            frequencies=tuple(TWO_PI * float(f) for f in frequencies_hz),
            theta=float(theta),
        )

    @property
    def n_harmonics(self) -> int:
        """Number of harmonics ``N``."""
        return len(self.amplitudes)

    @property
    def fundamental(self) -> float:
        """Lowest harmonic frequency in rad/s."""
        if not self.frequencies:
            raise EmptySignalError("signal has no harmonics")
        return self.frequencies[0]

    @property
    def fundamental_hz(self) -> float:
        """Lowest harmonic frequency in Hz."""
        return self.fundamental / TWO_PI

    @property
    def max_frequency_hz(self) -> float:
        """Highest harmonic frequency in Hz."""
        if not self.frequencies:
            raise EmptySignalError("signal has no harmonics")
        return self.frequencies[-1] / TWO_PI

    @property
    def harmonic_indices(self) -> tuple[int, ...]:
        """Integer multiple of the fundamental each harmonic sits at."""
        w0 = self.fundamental
        return tuple(int(round(w / w0)) for w in self.frequencies)

    def with_phase(self, theta: float) -> "GeneratingSignal":
        """Return a copy with a different shared phase."""
        return replace(self, theta=float(theta))


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniformly sampled real signal.

    Attributes:
        samples: Sample values.
        sample_rate: Sampling rate in Hz.
        t0: Time of the first sample in seconds.

    """

    samples: NDArray[np.float64]
    sample_rate: float
    t0: float = 0.0
    metadata: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Coerce samples to a finite float array and check the rate."""
        object.__setattr__(self, "samples", as_float_array(self.samples, "samples"))
        validate_positive(self.sample_rate, "sample_rate")

    def __len__(self) -> int:
        """Return the number of samples."""
        return int(self.samples.size)

    @property
    def times(self) -> NDArray[np.float64]:
        """Sample instants in seconds."""
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        """Covered duration in seconds (number of samples over the rate)."""
        return self.samples.size / self.sample_rate


# harmonic sets: (amplitudes, frequencies in deci-Hz)
def _preset_table(name: PresetName) -> tuple[list[float], list[float]]:
    k = np.arange(1, 11)
    odd = 2 * k - 1
    if name is PresetName.SINGLE:
        return [1.0], [50.0]
    if name is PresetName.TWO:
        return [1.0, 1 / 3], [25.0, 75.0]
    if name is PresetName.THREE:
        return [1.0, 1 / 3, 1 / 2], [20.0, 60.0, 120.0]
    if name is PresetName.FOUR:
        return [1.0, 1 / 6, 1 / 8, 1 / 12], [25.0, 50.0, 100.0, 125.0]
    if name is PresetName.SAWTOOTH:
        return list(1.0 / k), list(20.0 * k)
    if name is PresetName.SQUARE:
        return list(1.0 / odd), list(20.0 * odd)
    return list((-1.0) ** (k - 1) / odd.astype(float) ** 2), list(20.0 * odd)


def table1_preset(name: str | PresetName, theta: float = 0.0) -> GeneratingSignal:
    """Return one of the seven built-in harmonic sets.

    Args:
        name (str | PresetName): single, two, three, four, sawtooth, square or triangle.
        theta (float): Shared phase in radians.

    Returns:
        GeneratingSignal: The preset with frequencies converted from deci-Hz to Hz.

    Raises:
        UnknownPresetError: If the name is not a preset.

    """
    try:
        preset = parse_enum(PresetName, name)
    except ValueError as e:
        raise UnknownPresetError(str(e)) from e
    amplitudes, deci_hz = _preset_table(preset)
    return GeneratingSignal.from_hz(amplitudes, [f / 10.0 for f in deci_hz], theta)


def synth(
    sig: GeneratingSignal,
    sample_rate: float = DEFAULT_SAMPLE_RATE_HZ,
    duration: float = 1.0,
    t0: float = 0.0,
) -> SampledSignal:
    """Sample a generating signal on a uniform grid.

    Args:
        sig (GeneratingSignal): Harmonic description.
        sample_rate (float): Sampling rate in Hz.
        duration (float): Length in seconds; ``round(duration * sample_rate)`` samples.
        t0 (float): Time of the first sample.

    Returns:
        SampledSignal: ``sum_k G_k sin(w_k t + theta)`` at ``t0 + m / sample_rate``.

    Raises:
        EmptySignalError: If the signal has no harmonics or the duration yields no samples.
        NyquistViolationError: If the sample rate does not exceed twice the top frequency.

    """
    if sig.n_harmonics == 0:
        raise EmptySignalError("cannot synthesize a signal with no harmonics")
    validate_positive(duration, "duration")
    validate_positive(sample_rate, "sample_rate")
    if sample_rate <= 2.0 * sig.max_frequency_hz:
        raise NyquistViolationError(
            f"sample rate {sample_rate} Hz must exceed {2.0 * sig.max_frequency_hz} Hz"
        )
    n_samples = int(round(duration * sample_rate))
    if n_samples < 1:
        raise EmptySignalError(f"duration {duration} s yields no samples at {sample_rate} Hz")
    t = t0 + np.arange(n_samples) / sample_rate
    values = evaluate(sig, t)
    return SampledSignal(values, float(sample_rate), float(t0))


def evaluate(sig: GeneratingSignal, times: NDArray[np.float64]) -> NDArray[np.float64]:
    """Evaluate the harmonic sum at arbitrary instants."""
    amplitudes = np.asarray(sig.amplitudes, dtype=float)
    w = np.asarray(sig.frequencies, dtype=float)
    phases = np.multiply.outer(np.asarray(times, dtype=float), w) + sig.theta
    return np.asarray(np.sin(phases) @ amplitudes, dtype=np.float64)


def normalize(
    s: SampledSignal, mode: str | NormalizeMode = NormalizeMode.BOTH
) -> SampledSignal:
    """Remove the mean and/or scale to unit time-average norm.

    Args:
        s (SampledSignal): Input signal.
        mode (str | NormalizeMode): zero_mean, unit_norm or both (mean removal first).

    Returns:
        SampledSignal: Normalized copy with the same rate and start time.

    Raises:
        ZeroNormError: If unit_norm is requested for an identically zero signal.

    """
    mode = parse_enum(NormalizeMode, mode)
    values = s.samples.copy()
    scale = float(np.max(np.abs(values)))
    if mode in (NormalizeMode.ZERO_MEAN, NormalizeMode.BOTH):
        values = values - values.mean()
    if mode in (NormalizeMode.UNIT_NORM, NormalizeMode.BOTH):
        norm = time_average_norm(values)
        if norm == 0.0 or norm <= 1e-12 * scale:
            raise ZeroNormError("cannot scale an identically zero signal to unit norm")
        values = values / norm
    return SampledSignal(values, s.sample_rate, s.t0, dict(s.metadata))


def to_frame(s: SampledSignal, value_name: str = "value") -> pd.DataFrame:
    """Return the two-column ``t,<value_name>`` table for a sampled signal."""
    return pd.DataFrame({"t": s.times, value_name: s.samples})


def read_signal_csv(path: str | Path) -> SampledSignal:
    """Load a two-column ``t,<value>`` CSV written by the output writer.

    Args:
        path (str | Path): CSV file.

    Returns:
        SampledSignal: Signal whose rate is inferred from the median time step.

    Raises:
        EmptySignalError: If the file holds fewer than two rows.

    """
    frame = pd.read_csv(path, float_precision="round_trip")
    if len(frame) < 2 or len(frame.columns) < 2:
        raise EmptySignalError(f"{path} needs at least two rows of t,value")
    t = frame.iloc[:, 0].to_numpy(dtype=float)
    values = frame.iloc[:, 1].to_numpy(dtype=float)
    step = float(np.median(np.diff(t)))
    logger.debug("📥 Loaded %d samples from %s", len(values), path)
    return SampledSignal(values, 1.0 / step, float(t[0]))
