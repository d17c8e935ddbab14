"""Coefficient disk, half-annulus membership, GoE scoring and the ensemble estimate.

Every channel's first basis period is projected onto the quadratic basis. In coordinates
normalized by ``A = max|a|`` and ``B = max|b|`` the points fill a unit elliptical disk whose
angle encodes the channel's phase lag and whose radius encodes how strongly the fundamental
dominates. The membership set keeps the channels that lie on the side of the disk facing the
orientation point and outside the inner ellipse of radius ``r_e``; their normalized streams
are averaged. The radius is chosen by the GoE score: the inverse count of significant
spectral lines of the resulting estimate.
"""

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.periodic_signal import SampledSignal
from app.quad_basis import CoeffPoint, QuadraticBasis, project_many
from app.utils.errors import (
    AllEmptyError,
    ConfigError,
    DegenerateDiskError,
    EmptyMembershipError,
    LengthMismatchError,
    ZeroOrientationError,
    ZeroSignalError,
)
from app.utils.metrics import record_membership_metrics
from app.utils.setup_logger import setup_logger
from app.utils.types import CurveRow
from app.utils.validate_data import validate_fraction, validate_positive

logger = setup_logger(__name__)

DEGENERATE_AXIS = 1e-12
RADIUS_SLACK = 1e-9
DEFAULT_GOE_EPSILON = 0.05
DEFAULT_RADIUS_GRID: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(20))
MIN_MEMBERS = 10
MIN_MEMBER_FRACTION = 0.01


def normalize_rows(streams: ArrayLike) -> NDArray[np.float64]:
    """Zero-mean, unit time-average-norm copy of every row; all-zero rows stay zero."""
    values = np.atleast_2d(np.asarray(streams, dtype=np.float64))
    centered = values - values.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.mean(centered**2, axis=1))
    scale = np.max(np.abs(values), axis=1)
    valid = norms > DEGENERATE_AXIS * np.maximum(scale, 1e-300)
    out = np.zeros_like(centered)
    out[valid] = centered[valid] / norms[valid, np.newaxis]
    return out


@dataclass(frozen=True, eq=False)
class CoeffDisk:
    """Projected channel points and the oriented normalization of the disk.

    Attributes:
        coefficients: (n, 3) projections (a, b, c) of the normalized windows.
        channel_ids: (n,) identifiers; row positions in the stream matrix.
        A: ``max |a|``, enlarged when needed so no point lies outside the unit ellipse.
        B: ``max |b|``, scaled with ``A``.
        u: Unit orientation vector in (a/A, b/B) coordinates.

    """

    coefficients: NDArray[np.float64]
    channel_ids: NDArray[np.int64]
    A: float
    B: float
    u: NDArray[np.float64]

    @property
    def normalized(self) -> NDArray[np.float64]:
        """(n, 2) points in (a/A, b/B) coordinates."""
        return np.column_stack([self.coefficients[:, 0] / self.A, self.coefficients[:, 1] / self.B])

    @property
    def radii(self) -> NDArray[np.float64]:
        """Normalized elliptical radius of every point."""
        norm = self.normalized
        return np.asarray(np.hypot(norm[:, 0], norm[:, 1]), dtype=np.float64)

    @property
    def alignment(self) -> NDArray[np.float64]:
        """Dot product of every normalized point with the orientation vector."""
        return np.asarray(self.normalized @ self.u, dtype=np.float64)

    @property
    def points(self) -> list[tuple[int, CoeffPoint]]:
        """Per-channel (id, CoeffPoint) pairs."""
        return [
            (int(cid), CoeffPoint(float(a), float(b), float(c)))
            for cid, (a, b, c) in zip(self.channel_ids, self.coefficients)
        ]

    def __len__(self) -> int:
        """Return the number of points."""
        return int(self.channel_ids.size)


@dataclass(frozen=True)
class MembershipSet:
    """Channels selected between two concentric half-ellipses."""

    channel_ids: tuple[int, ...]
    r_e: float

    @property
    def cardinality(self) -> int:
        """Number of selected channels."""
        return len(self.channel_ids)

    def to_dict(self) -> dict[str, Any]:
        """JSON form ``{r_e, channel_ids}``."""
        return {"r_e": self.r_e, "channel_ids": list(self.channel_ids)}


@dataclass(frozen=True, eq=False)
class EstimateResult:
    """Ensemble estimate with its score and the membership that produced it."""

    signal: SampledSignal
    goe: float
    r_e: float
    membership: MembershipSet
    w0_used: float


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Best estimate over a radius grid plus the full curve."""

    best: EstimateResult
    curve: list[CurveRow]
    estimates: dict[float, SampledSignal] = field(default_factory=dict)


def build_disk(
    channel_windows: ArrayLike,
    basis: QuadraticBasis,
    orientation_point: CoeffPoint,
    channel_ids: Sequence[int] | None = None,
) -> CoeffDisk:
    """Project one basis period of every channel and orient the disk.

    Windows are brought to zero mean and unit norm first, so scaling a channel does not move
    its point.

    Args:
        channel_windows (ArrayLike): (n, M) windows on the basis grid.
        basis (QuadraticBasis): Projection basis.
        orientation_point (CoeffPoint): Point whose direction marks the in-phase half.
        channel_ids (Sequence[int] | None): Identifiers; defaults to row positions.

    Returns:
        CoeffDisk: Oriented disk.

    Raises:
        DegenerateDiskError: If ``A`` or ``B`` is below 1e-12.
        ZeroOrientationError: If the orientation point is at the origin.

    """
    windows = normalize_rows(channel_windows)
    coefficients = project_many(windows, basis)
    ids = (
        np.arange(windows.shape[0], dtype=np.int64)
        if channel_ids is None
        else np.asarray(channel_ids, dtype=np.int64)
    )
    if ids.size != windows.shape[0]:
        raise LengthMismatchError(f"{ids.size} channel ids for {windows.shape[0]} windows")
    a_max = float(np.max(np.abs(coefficients[:, 0])))
    b_max = float(np.max(np.abs(coefficients[:, 1])))
    if a_max < DEGENERATE_AXIS or b_max < DEGENERATE_AXIS:
        raise DegenerateDiskError(f"disk collapsed: A={a_max:.3g}, B={b_max:.3g}")
    # the outermost point lies on the unit ellipse
    r_max = float(np.max(np.hypot(coefficients[:, 0] / a_max, coefficients[:, 1] / b_max)))
    if r_max > 1.0:
        a_max *= r_max
        b_max *= r_max
    direction = np.array([orientation_point.a / a_max, orientation_point.b / b_max])
    length = float(np.hypot(direction[0], direction[1]))
    if length < DEGENERATE_AXIS:
        raise ZeroOrientationError("orientation point is at the origin of the disk")
    logger.debug("📊 Disk of %d points, A=%.4g, B=%.4g", ids.size, a_max, b_max)
    return CoeffDisk(coefficients, ids, a_max, b_max, direction / length)


def select_members(disk: CoeffDisk, r_e: float, half_disk: bool = True) -> MembershipSet:
    """Select channels with ``r_e < r <= 1`` on the oriented half of the disk.

    Args:
        disk (CoeffDisk): Oriented disk.
        r_e (float): Radius of exclusion in [0, 1).
        half_disk (bool): Apply the half-plane test; False keeps the full annulus.

    Returns:
        MembershipSet: Selected channel ids in ascending order.

    Raises:
        ConfigError: If ``r_e`` is outside [0, 1).
        EmptyMembershipError: If nothing qualifies.

    """
    r_e = validate_fraction(r_e, "r_e")
    radii = disk.radii
    mask = (radii > r_e) & (radii <= 1.0 + RADIUS_SLACK)
    if half_disk:
        mask &= disk.alignment >= 0.0
    if not np.any(mask):
        raise EmptyMembershipError(f"no channel between r_e={r_e} and the disk edge")
    return MembershipSet(tuple(int(i) for i in np.sort(disk.channel_ids[mask])), r_e)


def _average_rows(normalized: NDArray[np.float64], rows: Sequence[int]) -> NDArray[np.float64]:
    mean = normalized[np.asarray(rows, dtype=np.int64)].mean(axis=0)
    return np.asarray(mean - mean.mean(), dtype=np.float64)


def estimate(
    channel_streams: ArrayLike,
    membership: MembershipSet,
    sample_rate: float = 1.0,
    t0: float = 0.0,
) -> SampledSignal:
    """Average the normalized streams of the member channels.

    Args:
        channel_streams (ArrayLike): (n, L) full-length channel outputs.
        membership (MembershipSet): Rows to average.
        sample_rate (float): Sampling rate of the streams in Hz.
        t0 (float): Time of the first sample.

    Returns:
        SampledSignal: Zero-mean estimate.

    Raises:
        EmptyMembershipError: If the membership is empty.

    """
    if membership.cardinality == 0:
        raise EmptyMembershipError("cannot estimate from an empty membership")
    streams = np.atleast_2d(np.asarray(channel_streams, dtype=np.float64))
    members = streams[np.asarray(membership.channel_ids, dtype=np.int64)]
    return SampledSignal(_average_rows(normalize_rows(members), range(members.shape[0])), sample_rate, t0)


def goe_score(signal: SampledSignal | ArrayLike, epsilon_rel: float = DEFAULT_GOE_EPSILON) -> float:
    """Inverse count of FFT magnitude bins above ``epsilon_rel`` times the largest bin.

    The DC bin is excluded and no window is applied. Higher means more line-like.

    Raises:
        ConfigError: If ``epsilon_rel`` is outside (0, 1).
        ZeroSignalError: If every non-DC bin is zero.

    """
    if not 0.0 < epsilon_rel < 1.0:
        raise ConfigError(f"epsilon_rel must lie in (0, 1), got {epsilon_rel}")
    values = signal.samples if isinstance(signal, SampledSignal) else np.asarray(signal, dtype=float)
    magnitude = np.abs(np.fft.rfft(values))[1:]
    peak = float(magnitude.max()) if magnitude.size else 0.0
    if peak == 0.0:
        raise ZeroSignalError("spectrum is identically zero")
    return 1.0 / int(np.count_nonzero(magnitude > epsilon_rel * peak))


def sweep_radius(
    disk: CoeffDisk,
    channel_streams: ArrayLike,
    grid: Sequence[float] = DEFAULT_RADIUS_GRID,
    sample_rate: float = 1.0,
    epsilon_rel: float = DEFAULT_GOE_EPSILON,
    w0: float = 0.0,
    workers: int = 1,
    half_disk: bool = True,
    t0: float = 0.0,
    min_members: int | None = None,
) -> SweepResult:
    """Evaluate membership, estimate and GoE for every radius of exclusion.

    Grid points with an empty membership are skipped. The best point maximizes GoE over the
    grid points holding at least ``min_members`` channels; ties go to the larger ``r_e``. When
    no point reaches the floor, every non-empty point competes. Results do not depend on
    ``workers``.

    ``min_members`` defaults to ``max(MIN_MEMBERS, ceil(MIN_MEMBER_FRACTION * len(disk)))``.

    Raises:
        ConfigError: If the grid is empty, holds values outside [0, 1), or ``min_members`` is
            not positive.
        AllEmptyError: If every grid point is empty.

    """
    if len(grid) == 0:
        raise ConfigError("radius grid is empty")
    radii = [validate_fraction(r, "r_e") for r in grid]
    floor = (
        max(MIN_MEMBERS, math.ceil(MIN_MEMBER_FRACTION * len(disk)))
        if min_members is None
        else int(validate_positive(min_members, "min_members"))
    )
    normalized = normalize_rows(channel_streams)

    def evaluate_one(r_e: float) -> tuple[MembershipSet, SampledSignal, float] | None:
        try:
            membership = select_members(disk, r_e, half_disk=half_disk)
        except EmptyMembershipError:
            logger.debug("⚠️ Empty membership at r_e=%.2f, skipped", r_e)
            return None
        signal = SampledSignal(_average_rows(normalized, membership.channel_ids), sample_rate, t0)
        try:
            goe = goe_score(signal, epsilon_rel)
        except ZeroSignalError:
            logger.debug("⚠️ Zero estimate at r_e=%.2f, skipped", r_e)
            return None
        return membership, signal, goe

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(evaluate_one, radii))
    else:
        outcomes = [evaluate_one(r) for r in radii]

    curve: list[CurveRow] = []
    estimates: dict[float, SampledSignal] = {}
    best: EstimateResult | None = None
    fallback: EstimateResult | None = None
    for r_e, outcome in zip(radii, outcomes):
        if outcome is None:
            curve.append({"r_e": r_e, "goe": float("nan"), "n_members": 0})
            continue
        membership, signal, goe = outcome
        curve.append({"r_e": r_e, "goe": goe, "n_members": membership.cardinality})
        estimates[r_e] = signal
        candidate = EstimateResult(signal, goe, r_e, membership, w0)
        if fallback is None or (goe, r_e) >= (fallback.goe, fallback.r_e):
            fallback = candidate
        if membership.cardinality < floor:
            continue
        if best is None or (goe, r_e) >= (best.goe, best.r_e):
            best = candidate

    if fallback is None:
        raise AllEmptyError(f"every r_e in {radii} produced an empty membership")
    if best is None:
        logger.warning("⚠️ No r_e keeps %d members; selecting among smaller memberships", floor)
        best = fallback
    record_membership_metrics(best.membership.cardinality, best.goe)
    logger.debug(
        "✅ Selected r_e=%.2f (goe=%.4g, %d members)", best.r_e, best.goe, best.membership.cardinality
    )
    return SweepResult(best, curve, estimates)
