"""Proxy signal, basis-frequency estimation and disk orientation.

The proxy is the cosine similarity between every frame and the first one. Its spectral peak
inside the breathing band gives the basis frequency ``w0``; its first period, projected onto
the quadratic basis, gives the point that orients the coefficient disk.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.signal import get_window

from app.periodic_signal import SampledSignal, normalize
from app.quad_basis import CoeffPoint, QuadraticBasis, project, resample_window
from app.utils.errors import ConfigError, NoPeakError, ProxyRangeError, TooShortError, ZeroFrameError
from app.utils.setup_logger import setup_logger

logger = setup_logger(__name__)

RESPIRATORY_BAND_HZ = (0.1, 0.583)
SIMULATION_BAND_PERIODS = 2.5
NFFT_MIN = 16384
PROXY_CHUNK_FRAMES = 128


@dataclass(frozen=True, eq=False)
class ProxySignal(SampledSignal):
    """Per-frame cosine similarity against the first frame; values in [-1, 1]."""

    def __post_init__(self) -> None:
        """Check the cosine range."""
        super().__post_init__()
        if np.any(np.abs(self.samples) > 1.0 + 1e-12):
            raise ProxyRangeError("proxy samples must lie in [-1, 1]")


def proxy(
    frames: ArrayLike, sample_rate: float = 1.0, chunk_size: int = PROXY_CHUNK_FRAMES
) -> ProxySignal:
    """Cosine of the angle between every frame and frame 0.

    Args:
        frames (ArrayLike): Array of shape (T, ...) with one frame (any shape) per row; 8-bit
            frames are converted chunk by chunk.
        sample_rate (float): Frame rate in Hz.
        chunk_size (int): Frames converted to float at a time.

    Returns:
        ProxySignal: ``p[t] = <x_t, x_0> / (|x_t| |x_0|)``; all-zero frames give 0.

    Raises:
        ZeroFrameError: If frame 0 is all zeros.
        TooShortError: If fewer than two frames are given.

    """
    data = np.asarray(frames)
    if data.shape[0] < 2:
        raise TooShortError("proxy needs at least two frames")
    flat = data.reshape(data.shape[0], -1)
    reference = flat[0].astype(np.float64)
    ref_norm = float(np.linalg.norm(reference))
    if ref_norm == 0.0:
        raise ZeroFrameError("reference frame is all zeros")
    values = np.empty(flat.shape[0], dtype=np.float64)
    for start in range(0, flat.shape[0], chunk_size):
        block = flat[start : start + chunk_size].astype(np.float64)
        norms = np.sqrt(np.einsum("ij,ij->i", block, block))
        dots = block @ reference
        with np.errstate(divide="ignore", invalid="ignore"):
            cosines = np.where(norms > 0, dots / (norms * ref_norm), 0.0)
        values[start : start + block.shape[0]] = cosines
    return ProxySignal(np.clip(values, -1.0, 1.0), float(sample_rate))


def proxy_from_channels(channel_streams: ArrayLike, sample_rate: float) -> ProxySignal:
    """Proxy of a channel matrix, treating the channel vector at each instant as a frame."""
    streams = np.atleast_2d(np.asarray(channel_streams, dtype=np.float64))
    return proxy(streams.T, sample_rate)


def _parabolic_offset(y_left: float, y_mid: float, y_right: float) -> float:
    denom = y_left - 2.0 * y_mid + y_right
    if abs(denom) < 1e-300:
        return 0.0
    return float(np.clip(0.5 * (y_left - y_right) / denom, -0.5, 0.5))


def spectral_peak(
    samples: ArrayLike,
    sample_rate: float,
    f_min: float,
    f_max: float,
    window: str | None = "hann",
    nfft_min: int = NFFT_MIN,
    harmonic_safe: bool = False,
) -> float:
    """Frequency of the largest in-band spectral magnitude, refined parabolically.

    The mean is removed, an optional taper applied and the FFT zero-padded to at least
    ``nfft_min`` points (8x the length, rounded up to a power of two). Peaks on a band edge
    are not refined.

    Args:
        samples (ArrayLike): Real samples.
        sample_rate (float): Sampling rate in Hz.
        f_min (float): Lower band edge in Hz.
        f_max (float): Upper band edge in Hz.
        window (str | None): ``scipy.signal.get_window`` name, or None for no taper.
        nfft_min (int): Minimum FFT length.
        harmonic_safe (bool): Prefer f/2 or f/3 when their magnitude is within 85% of the peak.

    Returns:
        float: Peak frequency in Hz.

    Raises:
        ConfigError: If the band is empty or inverted.
        NoPeakError: If the in-band spectrum is numerically flat.

    """
    if not 0.0 <= f_min < f_max:
        raise ConfigError(f"invalid band [{f_min}, {f_max}] Hz")
    x = np.asarray(samples, dtype=np.float64)
    x = x - x.mean()
    n = x.size
    if window:
        x = x * get_window(window, n)
    nfft = int(max(nfft_min, 2 ** int(np.ceil(np.log2(max(n, 1) * 8)))))
    magnitude = np.abs(np.fft.rfft(x, nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    band = np.flatnonzero((freqs >= f_min) & (freqs <= f_max))
    if band.size == 0:
        raise NoPeakError(f"no FFT bins inside [{f_min}, {f_max}] Hz")
    in_band = magnitude[band]
    peak = float(in_band.max())
    if peak == 0.0 or peak - float(in_band.min()) <= 1e-12 * peak:
        raise NoPeakError(f"spectrum is flat inside [{f_min}, {f_max}] Hz")
    k = int(np.argmax(in_band))
    j = int(band[k])
    offset = 0.0
    if 0 < k < band.size - 1:
        offset = _parabolic_offset(magnitude[j - 1], magnitude[j], magnitude[j + 1])
    resolution = sample_rate / nfft
    frequency = (j + offset) * resolution

    if harmonic_safe:

        def local_magnitude(freq: float) -> float:
            idx = int(round(freq / resolution))
            return float(magnitude[max(idx - 1, 0) : idx + 2].max())

        peak_frequency = frequency
        best = local_magnitude(peak_frequency)
        for divisor in (2.0, 3.0):
            candidate = peak_frequency / divisor
            if candidate >= f_min and local_magnitude(candidate) >= 0.85 * best:
                frequency = min(frequency, candidate)
    return float(frequency)


def simulation_band(duration: float, sample_rate: float) -> tuple[float, float]:
    """Band for simulated matrices, from ``SIMULATION_BAND_PERIODS`` cycles up to Nyquist.

    Raises:
        ConfigError: If ``duration`` or ``sample_rate`` is not positive.

    """
    if duration <= 0 or sample_rate <= 0:
        raise ConfigError(f"invalid duration {duration} s or sample rate {sample_rate} Hz")
    return SIMULATION_BAND_PERIODS / duration, sample_rate / 2.0


def fundamental(
    p: SampledSignal,
    f_min: float = RESPIRATORY_BAND_HZ[0],
    f_max: float = RESPIRATORY_BAND_HZ[1],
    harmonic_safe: bool = False,
) -> float:
    """Basis frequency ``w0`` (rad/s) from the proxy's in-band spectral peak.

    Raises:
        ConfigError: If ``f_min >= f_max``.
        TooShortError: If the proxy is not longer than ``2 / f_min`` seconds.
        NoPeakError: If the band is numerically flat.

    """
    if f_min >= f_max or f_min <= 0:
        raise ConfigError(f"invalid band [{f_min}, {f_max}] Hz")
    if p.duration <= 2.0 / f_min:
        raise TooShortError(f"proxy lasts {p.duration:.2f} s, needs more than {2.0 / f_min:.2f} s")
    f_hz = spectral_peak(p.samples, p.sample_rate, f_min, f_max, harmonic_safe=harmonic_safe)
    logger.debug("📊 Proxy fundamental %.4f Hz (%.2f BPM)", f_hz, 60.0 * f_hz)
    return 2.0 * np.pi * f_hz


def orientation_point(p: SampledSignal, basis: QuadraticBasis, start: int = 0) -> CoeffPoint:
    """Project the first basis period of ``p`` (zero-mean, unit-norm) onto the basis.

    Raises:
        TooShortError: If ``p`` spans less than one basis period after ``start``.
        ZeroNormError: If that period is constant.

    """
    window = resample_window(p.samples, p.sample_rate, basis, start=start)
    unit = normalize(SampledSignal(window, basis.n_samples * basis.w0 / (2.0 * np.pi)))
    return project(unit.samples, basis)
