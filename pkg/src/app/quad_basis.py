"""Quadratic basis over one symmetric period and least-squares projection onto it.

The inner product is the time average over one period ``[-pi/w0, pi/w0)``, discretized as a
midpoint sum on ``M`` points so that odd and even functions stay exactly orthogonal. The
basis spans ``{1, t, t^2}``:

    psi1 ~ (w0 t)^2 - const   (even, zero mean)
    psi2 ~ w0 t               (odd)
    psi3 = 1

By default psi1 and psi2 are scaled with the grid's own moments, which makes the discrete
Gram matrix the identity to machine precision and converges to the analytic constants
``3*sqrt(5)/(2*pi^2)``, ``sqrt(5)/2`` and ``sqrt(3)/pi`` as O(1/M^2). ``analytic=True`` uses
the analytic constants directly.

Projecting ``sin(k w0 t + phi)`` gives

    a = (3*sqrt(5)/pi^2) * sin(phi) * (-1)^k / k^2
    b = (sqrt(3)/pi)     * cos(phi) * (-1)^(k+1) / k

so pure tones of varying phase trace an axis-aligned ellipse and gain-weighted harmonic sums
fill it.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.utils.errors import InvalidCountError, LengthMismatchError, TooShortError
from app.utils.validate_data import validate_positive

MIN_BASIS_SAMPLES = 64
DEFAULT_BASIS_SAMPLES = 256

# semi-axes of the pure-tone ellipse
ELLIPSE_A = 3.0 * np.sqrt(5.0) / np.pi**2
ELLIPSE_B = np.sqrt(3.0) / np.pi

_PSI1_SCALE = 3.0 * np.sqrt(5.0) / (2.0 * np.pi**2)
_PSI1_OFFSET = np.sqrt(5.0) / 2.0
_PSI2_SCALE = np.sqrt(3.0) / np.pi


@dataclass(frozen=True)
class CoeffPoint:
    """Projection coefficients of one period onto (psi1, psi2, psi3)."""

    a: float
    b: float
    c: float = 0.0

    @property
    def ab(self) -> NDArray[np.float64]:
        """The (a, b) pair as an array."""
        return np.array([self.a, self.b], dtype=np.float64)


class QuadraticBasis:
    """Orthonormal quadratic basis sampled on the midpoint grid of one period.

    Args:
        w0 (float): Basis frequency in rad/s.
        n_samples (int): Grid size ``M`` (at least 64).
        analytic (bool): Use the analytic constants instead of grid-moment scaling.

    Raises:
        InvalidCountError: If ``n_samples`` is below 64.
        ConfigError: If ``w0`` is not positive.

    """

    def __init__(
        self, w0: float, n_samples: int = DEFAULT_BASIS_SAMPLES, analytic: bool = False
    ) -> None:
        self.w0 = validate_positive(w0, "w0")
        if int(n_samples) < MIN_BASIS_SAMPLES:
            raise InvalidCountError(
                f"basis needs at least {MIN_BASIS_SAMPLES} samples, got {n_samples}"
            )
        self.n_samples = int(n_samples)
        self.analytic = bool(analytic)

        step = 2.0 * np.pi / self.n_samples
        # (m - (M-1)/2) is exact, so the grid is symmetric to the last bit
        self._u = (np.arange(self.n_samples) - (self.n_samples - 1) / 2.0) * step
        u2 = self._u**2
        self._u2_mean = float(np.mean(u2))
        self._u2_std = float(np.sqrt(np.mean((u2 - self._u2_mean) ** 2)))
        self._psi = self._evaluate_u(self._u)
        self._psi.setflags(write=False)

    def __repr__(self) -> str:
        """Return a short description."""
        kind = "analytic" if self.analytic else "moment-matched"
        return f"QuadraticBasis(w0={self.w0:.6g}, n_samples={self.n_samples}, {kind})"

    @property
    def period(self) -> float:
        """Basis period ``2*pi/w0`` in seconds."""
        return 2.0 * np.pi / self.w0

    @property
    def grid_times(self) -> NDArray[np.float64]:
        """Midpoint grid ``t_m = -pi/w0 + (m + 0.5) * period / M``."""
        return self._u / self.w0

    @property
    def matrix(self) -> NDArray[np.float64]:
        """Read-only (3, M) array with rows psi1, psi2, psi3."""
        return self._psi

    def _evaluate_u(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.analytic:
            psi1 = _PSI1_SCALE * u**2 - _PSI1_OFFSET
            psi2 = _PSI2_SCALE * u
        else:
            psi1 = (u**2 - self._u2_mean) / self._u2_std
            psi2 = u / np.sqrt(self._u2_mean)
        return np.vstack([psi1, psi2, np.ones_like(u)])

    def evaluate(self, t: ArrayLike) -> NDArray[np.float64]:
        """Evaluate the three basis functions at arbitrary basis times.

        Args:
            t (ArrayLike): Times in seconds on the basis axis (0 is the period centre).

        Returns:
            NDArray[np.float64]: Array of shape (3, len(t)).

        """
        u = self.w0 * np.atleast_1d(np.asarray(t, dtype=np.float64))
        return self._evaluate_u(u)

    def gram(self) -> NDArray[np.float64]:
        """Return the 3x3 matrix of pairwise discrete inner products."""
        return np.asarray(self._psi @ self._psi.T / self.n_samples, dtype=np.float64)


def time_average_norm(x: ArrayLike) -> float:
    """Norm induced by the time-average inner product: ``sqrt(mean(x**2))``."""
    values = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean(values**2)))


def _check_length(x: NDArray[np.float64], basis: QuadraticBasis, name: str) -> None:
    if x.shape[-1] != basis.n_samples:
        raise LengthMismatchError(
            f"{name} has {x.shape[-1]} samples, basis grid has {basis.n_samples}"
        )


def inner_product(x: ArrayLike, y: ArrayLike, basis: QuadraticBasis) -> float:
    """Time-average inner product of two one-period grid samplings.

    Args:
        x (ArrayLike): ``M`` samples on the basis grid.
        y (ArrayLike): ``M`` samples on the basis grid.
        basis (QuadraticBasis): Basis defining the grid.

    Returns:
        float: ``(1/M) * sum(x * y)``.

    Raises:
        LengthMismatchError: If either input is not ``M`` samples long.

    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    _check_length(xa, basis, "x")
    _check_length(ya, basis, "y")
    return float(np.dot(xa, ya) / basis.n_samples)


def eval_basis(
    basis: QuadraticBasis,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Return psi1, psi2 and psi3 sampled on the basis grid."""
    psi = basis.matrix
    return psi[0].copy(), psi[1].copy(), psi[2].copy()


def project(s: ArrayLike, basis: QuadraticBasis) -> CoeffPoint:
    """Project one period of a signal onto the basis.

    Args:
        s (ArrayLike): ``M`` samples on the basis grid.
        basis (QuadraticBasis): Target basis.

    Returns:
        CoeffPoint: ``(<s, psi1>, <s, psi2>, <s, psi3>)``.

    Raises:
        LengthMismatchError: If ``s`` is not ``M`` samples long.

    """
    values = np.asarray(s, dtype=np.float64)
    _check_length(values, basis, "signal")
    a, b, c = project_many(values[np.newaxis, :], basis)[0]
    return CoeffPoint(float(a), float(b), float(c))


def project_many(windows: ArrayLike, basis: QuadraticBasis) -> NDArray[np.float64]:
    """Project every row of an (n, M) array; returns an (n, 3) array of (a, b, c)."""
    values = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    _check_length(values, basis, "windows")
    return np.asarray(values @ basis.matrix.T / basis.n_samples, dtype=np.float64)


def resample_window(
    streams: ArrayLike, sample_rate: float, basis: QuadraticBasis, start: int = 0
) -> NDArray[np.float64]:
    """Map one basis period of measured samples onto the basis grid.

    The sample at index ``start`` is placed at ``t = -pi/w0`` and the streams are linearly
    interpolated onto the ``M`` midpoints. Works on a single stream or an (n, L) matrix; the
    interpolation weights are shared by every row.

    Args:
        streams (ArrayLike): Samples of shape (L,) or (n, L).
        sample_rate (float): Sampling rate in Hz.
        basis (QuadraticBasis): Target basis.
        start (int): Index of the first window sample.

    Returns:
        NDArray[np.float64]: Resampled windows of shape (M,) or (n, M).

    Raises:
        TooShortError: If the streams do not cover one basis period after ``start``.

    """
    values = np.asarray(streams, dtype=np.float64)
    positions = (basis.grid_times + basis.period / 2.0) * sample_rate + start
    lower = np.floor(positions).astype(np.int64)
    needed = int(lower[-1]) + 2
    if values.shape[-1] < needed:
        raise TooShortError(
            f"window needs {needed} samples for one basis period, stream has {values.shape[-1]}"
        )
    frac = positions - lower
    return np.asarray(
        values[..., lower] * (1.0 - frac) + values[..., lower + 1] * frac, dtype=np.float64
    )


def harmonic_coefficients(
    amplitudes: ArrayLike, harmonic_indices: ArrayLike, phases: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Closed-form (a, b) of ``sum_k amp_k sin(k w0 t + phase_k)`` on the centred period.

    Args:
        amplitudes (ArrayLike): Amplitudes, shape (..., K).
        harmonic_indices (ArrayLike): Integer harmonic numbers ``k``, shape (K,).
        phases (ArrayLike): Phases broadcastable to ``amplitudes``.

    Returns:
        tuple[NDArray, NDArray]: Continuum values of a and b, shape (...).

    """
    amp = np.asarray(amplitudes, dtype=np.float64)
    k = np.asarray(harmonic_indices, dtype=np.float64)
    phase = np.broadcast_to(np.asarray(phases, dtype=np.float64), amp.shape)
    sign = np.where(np.asarray(harmonic_indices) % 2 == 0, 1.0, -1.0)
    a = ELLIPSE_A * np.sum(amp * np.sin(phase) * sign / k**2, axis=-1)
    b = ELLIPSE_B * np.sum(amp * np.cos(phase) * (-sign) / k, axis=-1)
    return np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)


def perturbation_bound(rho: float) -> tuple[float, float]:
    """Region a noisy, unit-normalized projection can reach.

    With noise orthogonal to the response and SNR ``rho``, the noisy coefficient lies within
    ``radius`` of ``scale * clean_coefficient``.

    Args:
        rho (float): Ratio of response norm to noise norm (may be ``inf``).

    Returns:
        tuple[float, float]: ``(rho / sqrt(rho^2 + 1), 1 / sqrt(rho^2 + 1))``.

    """
    if np.isinf(rho):
        return 1.0, 0.0
    denom = float(np.sqrt(rho * rho + 1.0))
    return float(rho) / denom, 1.0 / denom
