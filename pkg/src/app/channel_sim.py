"""Random SIMO ensemble of LTI channels driven by one periodic source.

Each channel ``i`` scales harmonic ``k`` by a gain ``F_i(w_k)``, delays every harmonic by
the same phase ``phi_i`` and adds white noise whose time-average norm is ``sigma``:

    x_i(t) = sum_k G_k F_i(w_k) sin(w_k t + phi_i + theta) + n_i(t)

Noise for channel ``i`` is drawn from its own child of ``SeedSequence(noise_seed)``, so the
output does not depend on how channels are batched or threaded.
"""

import json
from collections.abc import Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.periodic_signal import GeneratingSignal
from app.utils.errors import (
    ConfigError,
    CorruptHeaderError,
    EmptyScheduleError,
    HarmonicMismatchError,
    InvalidCountError,
    LengthMismatchError,
    NyquistViolationError,
    ZeroSignalError,
)
from app.utils.setup_logger import setup_logger
from app.utils.types import MatrixSidecar, NoiseKind, parse_enum
from app.utils.validate_data import validate_positive

logger = setup_logger(__name__)


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """One channel: per-harmonic gains, phase lag and noise level."""

    gains: NDArray[np.float64]
    phase: float | NDArray[np.float64]
    noise_sigma: float = 0.0


@dataclass(frozen=True, eq=False)
class ChannelBank:
    """Ensemble of channels stored column-wise for vectorized rendering.

    Attributes:
        gains: (n, K) gains ``F_i(w_k)``.
        phases: (n,) constant phases, or (n, K) when phases differ per harmonic.
        noise_sigmas: (n,) noise period-norms.
        seed: Seed the bank was drawn from (-1 for hand-built banks).
        noise_kind: Distribution of the additive noise.

    """

    gains: NDArray[np.float64]
    phases: NDArray[np.float64]
    noise_sigmas: NDArray[np.float64]
    seed: int = -1
    noise_kind: NoiseKind = NoiseKind.GAUSSIAN

    def __post_init__(self) -> None:
        """Validate shapes."""
        gains = np.atleast_2d(np.asarray(self.gains, dtype=np.float64))
        n = gains.shape[0]
        phases = np.asarray(self.phases, dtype=np.float64)
        sigmas = np.broadcast_to(np.asarray(self.noise_sigmas, dtype=np.float64), (n,)).copy()
        if n < 1:
            raise InvalidCountError("a bank needs at least one channel")
        if phases.shape not in ((n,), gains.shape):
            raise LengthMismatchError(
                f"phases shape {phases.shape} does not fit gains {gains.shape}"
            )
        if np.any(sigmas < 0):
            raise ConfigError("noise sigma must be non-negative")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "noise_sigmas", sigmas)
        object.__setattr__(self, "noise_kind", parse_enum(NoiseKind, self.noise_kind))

    @classmethod
    def from_specs(cls, specs: Sequence[ChannelSpec], seed: int = -1) -> "ChannelBank":
        """Assemble a bank from individual channel specs sharing one harmonic count."""
        if not specs:
            raise InvalidCountError("a bank needs at least one channel")
        gains = np.vstack([np.atleast_1d(np.asarray(s.gains, dtype=float)) for s in specs])
        phase_list = [np.asarray(s.phase, dtype=float) for s in specs]
        if all(p.ndim == 0 for p in phase_list):
            phases = np.array([float(p) for p in phase_list])
        else:
            phases = np.vstack([np.broadcast_to(p, (gains.shape[1],)) for p in phase_list])
        sigmas = np.array([s.noise_sigma for s in specs], dtype=float)
        return cls(gains, phases, sigmas, seed)

    @property
    def n_channels(self) -> int:
        """Number of channels."""
        return int(self.gains.shape[0])

    @property
    def n_harmonics(self) -> int:
        """Number of gains per channel."""
        return int(self.gains.shape[1])

    @property
    def independent_phases(self) -> bool:
        """True when every harmonic carries its own phase."""
        return bool(self.phases.ndim == 2)

    @property
    def channels(self) -> list[ChannelSpec]:
        """Per-channel view of the bank."""
        return [
            ChannelSpec(self.gains[i], self.phases[i], float(self.noise_sigmas[i]))
            for i in range(self.n_channels)
        ]

    def phase_matrix(self, n_harmonics: int) -> NDArray[np.float64]:
        """Return (n, n_harmonics) phases, repeating a constant phase across harmonics."""
        if self.independent_phases:
            return np.asarray(self.phases[:, :n_harmonics], dtype=np.float64)
        return np.repeat(self.phases[:, np.newaxis], n_harmonics, axis=1)

    def with_noise(self, sigma: float) -> "ChannelBank":
        """Return a copy whose channels all carry noise of period-norm ``sigma``."""
        return replace(self, noise_sigmas=np.full(self.n_channels, float(sigma)))


def random_bank(
    n_channels: int,
    n_harmonics: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
    independent_phases: bool = False,
    noise_kind: str | NoiseKind = NoiseKind.GAUSSIAN,
) -> ChannelBank:
    """Draw gains from U[0, 1] and phases from U[-pi, pi].

    Args:
        n_channels (int): Number of channels (>= 1).
        n_harmonics (int): Gains per channel (>= 1).
        noise_sigma (float): Noise period-norm shared by every channel.
        seed (int): Seed for ``numpy.random.default_rng``.
        independent_phases (bool): Draw one phase per harmonic instead of one per channel.
            This breaks the constant-phase channel model and degrades the estimate.
        noise_kind (str | NoiseKind): Noise distribution.

    Returns:
        ChannelBank: Reproducible bank.

    Raises:
        InvalidCountError: If a count is below 1.
        ConfigError: If ``noise_sigma`` is negative.

    """
    if n_channels < 1 or n_harmonics < 1:
        raise InvalidCountError(
            f"need at least one channel and harmonic, got {n_channels} x {n_harmonics}"
        )
    if noise_sigma < 0:
        raise ConfigError(f"noise sigma must be non-negative, got {noise_sigma}")
    rng = np.random.default_rng(seed)
    gains = rng.uniform(0.0, 1.0, size=(n_channels, n_harmonics))
    phase_shape = (n_channels, n_harmonics) if independent_phases else (n_channels,)
    phases = rng.uniform(-np.pi, np.pi, size=phase_shape)
    logger.debug("🎲 Drew bank of %d channels x %d harmonics (seed=%d)", n_channels, n_harmonics, seed)
    return ChannelBank(gains, phases, np.full(n_channels, float(noise_sigma)), seed, noise_kind)


def _check_harmonics(bank: ChannelBank, sig: GeneratingSignal) -> None:
    if bank.n_harmonics < sig.n_harmonics:
        raise HarmonicMismatchError(
            f"bank has {bank.n_harmonics} gains per channel, signal has {sig.n_harmonics} harmonics"
        )


def clean_response(
    bank: ChannelBank, sig: GeneratingSignal, tau: ArrayLike
) -> NDArray[np.float64]:
    """Noiseless channel outputs evaluated at (possibly warped) times ``tau``.

    Returns:
        NDArray[np.float64]: (n_channels, len(tau)) matrix.

    """
    _check_harmonics(bank, sig)
    tau_arr = np.asarray(tau, dtype=np.float64)
    n_h = sig.n_harmonics
    weights = bank.gains[:, :n_h] * np.asarray(sig.amplitudes, dtype=np.float64)
    angles = bank.phase_matrix(n_h) + sig.theta
    out = np.zeros((bank.n_channels, tau_arr.size), dtype=np.float64)
    for k, w_k in enumerate(sig.frequencies):
        # sin(w t + p) = sin(w t) cos(p) + cos(w t) sin(p)
        out += np.outer(weights[:, k] * np.cos(angles[:, k]), np.sin(w_k * tau_arr))
        out += np.outer(weights[:, k] * np.sin(angles[:, k]), np.cos(w_k * tau_arr))
    return out


def _unit_noise(kind: NoiseKind, rng: np.random.Generator, n_samples: int) -> NDArray[np.float64]:
    if kind is NoiseKind.UNIFORM:
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), n_samples)
    if kind is NoiseKind.LAPLACE:
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), n_samples)
    return rng.standard_normal(n_samples)


def channel_noise(bank: ChannelBank, n_samples: int, noise_seed: int) -> NDArray[np.float64]:
    """Additive noise matrix with row ``i`` scaled to period-norm ``noise_sigmas[i]``.

    Under the time-average norm the period-norm of unit-variance white noise is 1, so sigma
    is applied directly as the standard deviation.
    """
    out = np.zeros((bank.n_channels, n_samples), dtype=np.float64)
    if not np.any(bank.noise_sigmas > 0):
        return out
    children = np.random.SeedSequence(noise_seed).spawn(bank.n_channels)
    for i, child in enumerate(children):
        sigma = bank.noise_sigmas[i]
        if sigma > 0:
            out[i] = sigma * _unit_noise(bank.noise_kind, np.random.default_rng(child), n_samples)
    return out


def _check_nyquist(sig: GeneratingSignal, sample_rate: float, max_scale: float = 1.0) -> None:
    top = sig.max_frequency_hz * max_scale
    if sample_rate <= 2.0 * top:
        raise NyquistViolationError(f"sample rate {sample_rate} Hz must exceed {2.0 * top} Hz")


def respond_components(
    bank: ChannelBank,
    sig: GeneratingSignal,
    sample_rate: float,
    duration: float,
    noise_seed: int = 0,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return the noiseless responses and the noise separately, both (n, L)."""
    validate_positive(sample_rate, "sample_rate")
    validate_positive(duration, "duration")
    _check_harmonics(bank, sig)
    _check_nyquist(sig, sample_rate)
    n_samples = int(round(duration * sample_rate))
    t = np.arange(n_samples) / sample_rate
    return clean_response(bank, sig, t), channel_noise(bank, n_samples, noise_seed)


def respond(
    bank: ChannelBank,
    sig: GeneratingSignal,
    sample_rate: float,
    duration: float,
    noise_seed: int = 0,
) -> NDArray[np.float64]:
    """Render every channel's output for ``duration`` seconds starting at t = 0.

    Args:
        bank (ChannelBank): Channel ensemble.
        sig (GeneratingSignal): Source signal.
        sample_rate (float): Sampling rate in Hz.
        duration (float): Length in seconds.
        noise_seed (int): Root seed of the per-channel noise streams.

    Returns:
        NDArray[np.float64]: (n_channels, round(duration * sample_rate)) outputs.

    Raises:
        HarmonicMismatchError: If the bank has fewer gains than the signal has harmonics.
        NyquistViolationError: If the sample rate is too low.

    """
    clean, noise = respond_components(bank, sig, sample_rate, duration, noise_seed)
    return clean + noise


def respond_at(
    bank: ChannelBank, sig: GeneratingSignal, times: ArrayLike, noise_seed: int | None = None
) -> NDArray[np.float64]:
    """Channel outputs at arbitrary instants; noise is added only when a seed is given."""
    times_arr = np.asarray(times, dtype=np.float64)
    out = clean_response(bank, sig, times_arr)
    if noise_seed is not None:
        out += channel_noise(bank, times_arr.size, noise_seed)
    return out


def snr_to_sigma(sig: GeneratingSignal, bank: ChannelBank, target_snr_db: float) -> float:
    """Noise period-norm giving a bank-average SNR of ``target_snr_db``.

    The response norm uses the closed form ``||f_i||^2 = 0.5 * sum_k (G_k F_ik)^2``, exact
    over whole periods because distinct harmonics are orthogonal.

    Args:
        sig (GeneratingSignal): Source signal.
        bank (ChannelBank): Channel ensemble.
        target_snr_db (float): Desired mean of ``||f_i|| / sigma`` in dB (``inf`` allowed).

    Returns:
        float: ``mean_i ||f_i|| / 10^(target/20)``.

    Raises:
        ZeroSignalError: If every response is identically zero.

    """
    _check_harmonics(bank, sig)
    norms = response_norms(sig, bank)
    mean_norm = float(np.mean(norms))
    if mean_norm == 0.0:
        raise ZeroSignalError("every channel response is identically zero")
    if np.isinf(target_snr_db) and target_snr_db > 0:
        return 0.0
    return mean_norm / 10.0 ** (target_snr_db / 20.0)


def response_norms(sig: GeneratingSignal, bank: ChannelBank) -> NDArray[np.float64]:
    """Closed-form time-average norm of each noiseless channel response."""
    weights = bank.gains[:, : sig.n_harmonics] * np.asarray(sig.amplitudes, dtype=np.float64)
    return np.asarray(np.sqrt(0.5 * np.sum(weights**2, axis=1)), dtype=np.float64)


def measured_snr(clean: ArrayLike, noise: ArrayLike) -> NDArray[np.float64]:
    """Per-channel ratio of measured response norm to measured noise norm."""
    clean_arr = np.atleast_2d(np.asarray(clean, dtype=np.float64))
    noise_arr = np.atleast_2d(np.asarray(noise, dtype=np.float64))
    signal_norm = np.sqrt(np.mean(clean_arr**2, axis=1))
    noise_norm = np.sqrt(np.mean(noise_arr**2, axis=1))
    return np.asarray(signal_norm / noise_norm, dtype=np.float64)


def schedule_time_warp(
    schedule: Sequence[tuple[float, float]], sample_rate: float
) -> NDArray[np.float64]:
    """Warped time ``tau(t)`` whose slope in each segment is that segment's frequency scale.

    Args:
        schedule (Sequence[tuple[float, float]]): (duration s, frequency scale) segments.
        sample_rate (float): Sampling rate in Hz.

    Returns:
        NDArray[np.float64]: ``tau`` at every output sample; continuous at the boundaries.

    Raises:
        EmptyScheduleError: If the schedule is empty or holds a non-positive entry.

    """
    if not schedule:
        raise EmptyScheduleError("schedule has no segments")
    durations = np.array([float(d) for d, _ in schedule])
    scales = np.array([float(s) for _, s in schedule])
    if np.any(durations <= 0) or np.any(scales <= 0):
        raise EmptyScheduleError("schedule durations and scales must be positive")
    knots_t = np.concatenate([[0.0], np.cumsum(durations)])
    knots_tau = np.concatenate([[0.0], np.cumsum(durations * scales)])
    n_samples = int(round(knots_t[-1] * sample_rate))
    t = np.arange(n_samples) / sample_rate
    return np.asarray(np.interp(t, knots_t, knots_tau), dtype=np.float64)


def quasi_periodic_respond(
    bank: ChannelBank,
    sig: GeneratingSignal,
    schedule: Sequence[tuple[float, float]],
    sample_rate: float,
    noise_seed: int = 0,
) -> NDArray[np.float64]:
    """Render outputs whose harmonic frequencies change segment by segment.

    Every harmonic frequency of segment ``j`` is multiplied by ``schedule[j][1]``; the phase is
    integrated through the segments so the waveform stays continuous.

    Raises:
        EmptyScheduleError: If the schedule is empty or invalid.
        NyquistViolationError: If the fastest segment exceeds the Nyquist limit.

    """
    validate_positive(sample_rate, "sample_rate")
    tau = schedule_time_warp(schedule, sample_rate)
    _check_harmonics(bank, sig)
    _check_nyquist(sig, sample_rate, max(float(s) for _, s in schedule))
    return clean_response(bank, sig, tau) + channel_noise(bank, tau.size, noise_seed)


def save_matrix(
    path: str | Path, matrix: ArrayLike, sample_rate: float, seed: int = -1
) -> tuple[Path, Path]:
    """Write a channel-major little-endian float64 matrix and its JSON sidecar.

    Returns:
        tuple[Path, Path]: Paths of the binary file and the sidecar.

    """
    data = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(data, dtype="<f8").tofile(target)
    sidecar: MatrixSidecar = {
        "n_channels": int(data.shape[0]),
        "n_samples": int(data.shape[1]),
        "sample_rate": float(sample_rate),
        "seed": int(seed),
    }
    sidecar_path = target.with_suffix(".json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return target, sidecar_path


def load_matrix(path: str | Path) -> tuple[NDArray[np.float64], dict[str, Any]]:
    """Read a matrix written by :func:`save_matrix`.

    Raises:
        CorruptHeaderError: If the sidecar is missing keys or disagrees with the file size.

    """
    target = Path(path)
    sidecar = json.loads(target.with_suffix(".json").read_text())
    try:
        n_channels = int(sidecar["n_channels"])
        n_samples = int(sidecar["n_samples"])
        float(sidecar["sample_rate"])
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptHeaderError(f"sidecar for {target} is incomplete: {e}") from e
    flat = np.fromfile(target, dtype="<f8")
    if flat.size != n_channels * n_samples:
        raise CorruptHeaderError(
            f"{target} holds {flat.size} values, sidecar expects {n_channels} x {n_samples}"
        )
    return flat.reshape(n_channels, n_samples).astype(np.float64), sidecar
