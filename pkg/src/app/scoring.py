"""Agreement and scoring statistics for estimated respiration signals."""

from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from app.periodic_signal import SampledSignal
from app.proxy_freq import RESPIRATORY_BAND_HZ, spectral_peak
from app.utils.errors import ConfigError, LengthMismatchError, WindowTooLongError, ZeroVarianceError
from app.utils.setup_logger import setup_logger

logger = setup_logger(__name__)

DEFAULT_RR_WINDOW_S = 15.0
DEFAULT_CI_HALFWIDTH_BPM = 3.0
RR_WINDOW_RANGE_S = (5.0, 60.0)


@dataclass(frozen=True)
class AgreementReport:
    """Bland-Altman summary of estimated versus reference rates (BPM)."""

    pearson_r: float
    bias: float
    limits_of_agreement: tuple[float, float]
    pct_within_ci: float
    ci_halfwidth: float
    std_difference: float
    median_difference: float
    regression_slope: float
    regression_intercept: float
    n: int

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready form."""
        data = asdict(self)
        data["limits_of_agreement"] = list(self.limits_of_agreement)
        return data


def _values(x: SampledSignal | ArrayLike) -> NDArray[np.float64]:
    if isinstance(x, SampledSignal):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def _corr(a: NDArray[np.float64], b: NDArray[np.float64]) -> float | None:
    a0 = a - a.mean()
    b0 = b - b.mean()
    denom = float(np.sqrt(np.dot(a0, a0) * np.dot(b0, b0)))
    if denom == 0.0:
        return None
    return float(np.clip(np.dot(a0, b0) / denom, -1.0, 1.0))


def ncc(
    x: SampledSignal | ArrayLike, y: SampledSignal | ArrayLike, max_lag: int = 0
) -> float:
    """Maximum normalized cross-correlation over lags in ``[-max_lag, max_lag]``.

    At lag ``l`` the overlapping samples ``x[m]`` and ``y[m + l]`` are compared after
    removing their means and scaling to unit norm.

    Args:
        x (SampledSignal | ArrayLike): First signal.
        y (SampledSignal | ArrayLike): Second signal.
        max_lag (int): Largest shift in samples.

    Returns:
        float: Correlation in [-1, 1].

    Raises:
        ConfigError: If the sample rates differ or ``max_lag`` is negative.
        ZeroVarianceError: If either signal is constant.

    """
    if isinstance(x, SampledSignal) and isinstance(y, SampledSignal):
        if not np.isclose(x.sample_rate, y.sample_rate):
            raise ConfigError(f"sample rates differ: {x.sample_rate} vs {y.sample_rate}")
    if max_lag < 0:
        raise ConfigError("max_lag must be non-negative")
    xv, yv = _values(x), _values(y)
    if np.ptp(xv) == 0.0 or np.ptp(yv) == 0.0:
        raise ZeroVarianceError("cannot correlate a constant signal")
    best = -np.inf
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            n = min(xv.size, yv.size - lag)
            a, b = xv[:n], yv[lag : lag + n]
        else:
            n = min(xv.size + lag, yv.size)
            a, b = xv[-lag : -lag + n], yv[:n]
        if n < 2:
            continue
        value = _corr(a, b)
        if value is not None and value > best:
            best = value
    if not np.isfinite(best):
        raise ZeroVarianceError("no lag has a non-constant overlap")
    return float(best)


def pearson(x: SampledSignal | ArrayLike, y: SampledSignal | ArrayLike) -> float:
    """Lag-free Pearson correlation of two equally long signals."""
    xv, yv = _values(x), _values(y)
    if xv.size != yv.size:
        raise LengthMismatchError(f"lengths differ: {xv.size} vs {yv.size}")
    if np.ptp(xv) == 0.0 or np.ptp(yv) == 0.0:
        raise ZeroVarianceError("cannot correlate a constant signal")
    return float(stats.pearsonr(xv, yv)[0])


def dominant_frequency(signal: SampledSignal) -> float:
    """Frequency (Hz) of the largest non-DC bin of the raw FFT magnitude."""
    magnitude = np.abs(np.fft.rfft(signal.samples))
    magnitude[0] = 0.0
    return float(np.argmax(magnitude) * signal.sample_rate / signal.samples.size)


def frequency_resolution(signal: SampledSignal) -> float:
    """Width of one FFT bin of ``signal`` in Hz."""
    return float(signal.sample_rate / signal.samples.size)


def rr_estimate(
    rp: SampledSignal,
    window_s: float = DEFAULT_RR_WINDOW_S,
    band: tuple[float, float] = RESPIRATORY_BAND_HZ,
) -> pd.DataFrame:
    """Respiration rate per non-overlapping window.

    Args:
        rp (SampledSignal): Respiratory pattern.
        window_s (float): Window length in seconds, within [5, 60].
        band (tuple[float, float]): Search band in Hz, inside (0, Nyquist).

    Returns:
        pd.DataFrame: Columns ``t`` (window centre, s) and ``bpm``.

    Raises:
        WindowTooLongError: If the window is out of range or longer than ``rp``.
        ConfigError: If the band is not inside (0, Nyquist).
        NoPeakError: If a window is silent.

    """
    lo, hi = RR_WINDOW_RANGE_S
    if not lo <= window_s <= hi:
        raise WindowTooLongError(f"window must lie in [{lo}, {hi}] s, got {window_s}")
    if not 0.0 < band[0] < band[1] < rp.sample_rate / 2.0:
        raise ConfigError(f"band {band} must lie inside (0, {rp.sample_rate / 2.0}) Hz")
    win = int(round(window_s * rp.sample_rate))
    n_windows = rp.samples.size // win
    if n_windows == 0:
        raise WindowTooLongError(f"window of {window_s} s exceeds signal of {rp.duration:.2f} s")
    rows = []
    for i in range(n_windows):
        segment = rp.samples[i * win : (i + 1) * win]
        f_hz = spectral_peak(segment, rp.sample_rate, band[0], band[1])
        rows.append({"t": rp.t0 + (i + 0.5) * win / rp.sample_rate, "bpm": 60.0 * f_hz})
    return pd.DataFrame(rows, columns=["t", "bpm"])


def bland_altman(
    est: ArrayLike, ref: ArrayLike, ci_halfwidth: float = DEFAULT_CI_HALFWIDTH_BPM
) -> AgreementReport:
    """Bland-Altman agreement between estimated and reference rates.

    Args:
        est (ArrayLike): Estimated BPM values.
        ref (ArrayLike): Reference BPM values.
        ci_halfwidth (float): Acceptance half-width in BPM.

    Returns:
        AgreementReport: Bias, 1.96-sigma limits (sample std), share within the half-width,
            Pearson r and the regression of est on ref.

    Raises:
        LengthMismatchError: If lengths differ or fewer than two pairs are given.

    """
    e = np.asarray(est, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if e.size != r.size or e.size < 2:
        raise LengthMismatchError(f"need two equally long series of >= 2 values, got {e.size}, {r.size}")
    diff = e - r
    bias = float(np.mean(diff))
    std = float(np.std(diff, ddof=1))
    within = float(100.0 * np.mean(np.abs(diff) <= ci_halfwidth + 1e-12))

    if np.ptp(e) == 0.0 or np.ptp(r) == 0.0:
        if np.array_equal(e, r):
            pearson_r = 1.0
        else:
            pearson_r = float("nan")
            logger.warning("⚠️ Pearson r undefined for constant rate series")
        slope = intercept = float("nan")
    else:
        pearson_r = float(stats.pearsonr(e, r)[0])
        fit = stats.linregress(r, e)
        slope, intercept = float(fit.slope), float(fit.intercept)

    return AgreementReport(
        pearson_r=pearson_r,
        bias=bias,
        limits_of_agreement=(bias - 1.96 * std, bias + 1.96 * std),
        pct_within_ci=within,
        ci_halfwidth=float(ci_halfwidth),
        std_difference=std,
        median_difference=float(np.median(diff)),
        regression_slope=slope,
        regression_intercept=intercept,
        n=int(e.size),
    )
