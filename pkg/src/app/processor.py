"""Runs the deconvolution pipeline on channel matrices and videos.

The pipeline is: basis frequency (forced or from the proxy) -> quadratic basis -> disk of
first-period projections -> radius sweep scored by GoE -> ensemble estimate. Long or
quasi-periodic recordings are processed segment by segment.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, cast

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.disk_membership import (
    DEFAULT_GOE_EPSILON,
    DEFAULT_RADIUS_GRID,
    CoeffDisk,
    EstimateResult,
    SweepResult,
    build_disk,
    normalize_rows,
    sweep_radius,
)
from app.periodic_signal import SampledSignal, normalize
from app.proxy_freq import (
    RESPIRATORY_BAND_HZ,
    ProxySignal,
    fundamental,
    orientation_point,
    proxy,
    proxy_from_channels,
    spectral_peak,
)
from app.quad_basis import DEFAULT_BASIS_SAMPLES, CoeffPoint, QuadraticBasis, project, resample_window
from app.utils.errors import ConfigError, SegmentTooShortError, TooShortError
from app.utils.setup_logger import setup_logger
from app.utils.track_stage_metrics import track_stage
from app.utils.types import OrientationSource, parse_enum
from app.utils.validate_data import as_float_array, validate_positive
from app.video_io import (
    DEFAULT_MIN_RR_HZ,
    DEFAULT_PERCENTILE,
    FrameSequence,
    PixelSelection,
    extract_pts,
    prune,
)

logger = setup_logger(__name__)


@dataclass(frozen=True, eq=False)
class PipelineResult:
    """Outcome of one pipeline run over a channel matrix."""

    sweep: SweepResult
    disk: CoeffDisk
    basis: QuadraticBasis
    orientation: CoeffPoint

    @property
    def best(self) -> EstimateResult:
        """GoE-selected estimate."""
        return self.sweep.best


@dataclass(frozen=True, eq=False)
class VideoResult:
    """Outcome of the video pipeline."""

    estimate: SampledSignal
    selection: PixelSelection
    proxy: ProxySignal
    pipeline: PipelineResult | None = None
    segments: list[dict[str, Any]] = field(default_factory=list)


def _window_point(samples: NDArray[np.float64], sample_rate: float, basis: QuadraticBasis, start: int) -> CoeffPoint:
    window = resample_window(samples, sample_rate, basis, start=start)
    unit = normalize(SampledSignal(window, basis.n_samples / basis.period))
    return project(unit.samples, basis)


def orientation_from_source(
    channel_streams: ArrayLike,
    sample_rate: float,
    basis: QuadraticBasis,
    source: str | OrientationSource = OrientationSource.PROXY,
    truth: SampledSignal | None = None,
    start: int = 0,
) -> CoeffPoint:
    """Point that orients the disk, taken from the ground truth, the channel mean or the proxy.

    Raises:
        ConfigError: If ``truth`` is requested but not given.

    """
    source = parse_enum(OrientationSource, source)
    streams = np.atleast_2d(np.asarray(channel_streams, dtype=np.float64))
    if source is OrientationSource.TRUTH:
        if truth is None:
            raise ConfigError("orientation 'truth' needs the ground-truth signal")
        return _window_point(truth.samples, truth.sample_rate, basis, start)
    if source is OrientationSource.CHANNEL_MEAN:
        return _window_point(normalize_rows(streams).mean(axis=0), sample_rate, basis, start)
    return orientation_point(proxy_from_channels(streams, sample_rate), basis, start=start)


def run_pipeline(
    channel_streams: ArrayLike,
    sample_rate: float,
    w0: float | None = None,
    orientation: CoeffPoint | None = None,
    m_basis_samples: int = DEFAULT_BASIS_SAMPLES,
    grid: Sequence[float] = DEFAULT_RADIUS_GRID,
    goe_epsilon: float = DEFAULT_GOE_EPSILON,
    workers: int = 1,
    half_disk: bool = True,
    band: tuple[float, float] = RESPIRATORY_BAND_HZ,
    proxy_signal: SampledSignal | None = None,
    t0: float = 0.0,
    harmonic_safe: bool = False,
) -> PipelineResult:
    """Estimate the generating signal from an (n, L) channel matrix.

    Args:
        channel_streams (ArrayLike): Channel outputs, one row per channel.
        sample_rate (float): Sampling rate in Hz.
        w0 (float | None): Basis frequency in rad/s; estimated from the proxy when None.
        orientation (CoeffPoint | None): Disk orientation; the proxy's projection when None.
        m_basis_samples (int): Basis grid size.
        grid (Sequence[float]): Radii of exclusion to try.
        goe_epsilon (float): Relative GoE threshold.
        workers (int): Threads for the radius sweep.
        half_disk (bool): Keep only the oriented half of the disk.
        band (tuple[float, float]): Search band for the proxy fundamental in Hz.
        proxy_signal (SampledSignal | None): Proxy to use instead of the channel-vector proxy.
        t0 (float): Time of the first sample.
        harmonic_safe (bool): Let the proxy peak fall back to f/2 or f/3 (see ``spectral_peak``).

    Returns:
        PipelineResult: Sweep, disk, basis and orientation used.

    """
    streams = as_float_array(channel_streams, "channel_streams", ndim=2)
    validate_positive(sample_rate, "sample_rate")
    if w0 is None or orientation is None:
        with track_stage("proxy"):
            p = proxy_signal if proxy_signal is not None else proxy_from_channels(streams, sample_rate)
        if w0 is None:
            w0 = fundamental(p, band[0], band[1], harmonic_safe=harmonic_safe)
        basis = QuadraticBasis(w0, m_basis_samples)
        if orientation is None:
            orientation = orientation_point(p, basis)
    else:
        basis = QuadraticBasis(w0, m_basis_samples)

    with track_stage("disk"):
        windows = resample_window(streams, sample_rate, basis)
        disk = build_disk(windows, basis, orientation)
    with track_stage("sweep"):
        sweep = sweep_radius(
            disk,
            streams,
            grid,
            sample_rate,
            goe_epsilon,
            w0=w0,
            workers=workers,
            half_disk=half_disk,
            t0=t0,
        )
    logger.debug(
        "📊 w0=%.4f rad/s, r_e=%.2f, %d members",
        w0,
        sweep.best.r_e,
        sweep.best.membership.cardinality,
    )
    return PipelineResult(sweep, disk, basis, orientation)


def _segment_bounds(n_samples: int, segment_samples: int) -> list[tuple[int, int]]:
    n_segments = max(1, n_samples // segment_samples)
    bounds = [(i * segment_samples, (i + 1) * segment_samples) for i in range(n_segments)]
    # the remainder joins the last segment
    bounds[-1] = (bounds[-1][0], n_samples)
    return bounds


def segmented_estimate(
    channel_streams: ArrayLike,
    sample_rate: float,
    segment_len: float,
    bases: Sequence[QuadraticBasis] | None = None,
    band: tuple[float, float] = RESPIRATORY_BAND_HZ,
    proxy_signal: SampledSignal | None = None,
    m_basis_samples: int = DEFAULT_BASIS_SAMPLES,
    grid: Sequence[float] = DEFAULT_RADIUS_GRID,
    goe_epsilon: float = DEFAULT_GOE_EPSILON,
    workers: int = 1,
    t0: float = 0.0,
) -> SampledSignal:
    """Run the pipeline on consecutive segments and join the normalized estimates.

    Each segment takes its basis frequency from ``bases`` or from the in-band peak of its slice
    of the proxy, and its orientation from that proxy slice. The proxy is computed once over
    the whole recording so every segment is oriented against the same reference frame.

    Args:
        channel_streams (ArrayLike): (n, L) channel outputs.
        sample_rate (float): Sampling rate in Hz.
        segment_len (float): Segment length in seconds; the remainder joins the last segment.
        bases (Sequence[QuadraticBasis] | None): One basis per segment, or None to estimate.
        band (tuple[float, float]): Proxy search band in Hz.
        proxy_signal (SampledSignal | None): Proxy of the whole recording, if already known.
        m_basis_samples (int): Basis grid size for estimated bases.
        grid (Sequence[float]): Radii of exclusion.
        goe_epsilon (float): Relative GoE threshold.
        workers (int): Threads for each radius sweep.
        t0 (float): Time of the first sample.

    Returns:
        SampledSignal: Concatenated zero-mean, unit-norm segment estimates; ``metadata``
            lists per-segment ``start``, ``w0``, ``r_e``, ``goe`` and ``n_members``.

    Raises:
        SegmentTooShortError: If a segment is shorter than one period at ``band[0]`` or than
            one basis period.
        ConfigError: If ``bases`` does not hold one basis per segment.

    """
    streams = as_float_array(channel_streams, "channel_streams", ndim=2)
    validate_positive(segment_len, "segment_len")
    segment_samples = int(round(segment_len * sample_rate))
    if segment_samples < sample_rate / band[0]:
        raise SegmentTooShortError(
            f"segments of {segment_len} s are shorter than one period at {band[0]} Hz"
        )
    bounds = _segment_bounds(streams.shape[1], segment_samples)
    if bases is not None and len(bases) != len(bounds):
        raise ConfigError(f"{len(bases)} bases for {len(bounds)} segments")
    p = proxy_signal if proxy_signal is not None else proxy_from_channels(streams, sample_rate)

    pieces = []
    segments: list[dict[str, Any]] = []
    for index, (lo, hi) in enumerate(bounds):
        piece = SampledSignal(p.samples[lo:hi], p.sample_rate, t0 + lo / sample_rate)
        if bases is not None:
            w0 = bases[index].w0
        else:
            w0 = 2.0 * np.pi * spectral_peak(piece.samples, sample_rate, band[0], band[1])
        try:
            basis = QuadraticBasis(w0, m_basis_samples)
            result = run_pipeline(
                streams[:, lo:hi],
                sample_rate,
                w0=w0,
                orientation=orientation_point(piece, basis),
                m_basis_samples=m_basis_samples,
                grid=grid,
                goe_epsilon=goe_epsilon,
                workers=workers,
                t0=piece.t0,
            )
        except TooShortError as e:
            raise SegmentTooShortError(f"segment {index} is shorter than one basis period") from e
        pieces.append(normalize(result.best.signal).samples)
        segments.append(
            {
                "start": piece.t0,
                "w0": w0,
                "r_e": result.best.r_e,
                "goe": result.best.goe,
                "n_members": result.best.membership.cardinality,
            }
        )
        logger.debug("📊 Segment %d at %.1f s: w0=%.4f rad/s", index, piece.t0, w0)
    return SampledSignal(np.concatenate(pieces), sample_rate, t0, {"segments": segments})


def process_video(
    seq: FrameSequence,
    min_rr_hz: float = DEFAULT_MIN_RR_HZ,
    threshold_percentile: float = DEFAULT_PERCENTILE,
    band: tuple[float, float] = RESPIRATORY_BAND_HZ,
    segment_len: float | None = None,
    m_basis_samples: int = DEFAULT_BASIS_SAMPLES,
    grid: Sequence[float] = DEFAULT_RADIUS_GRID,
    goe_epsilon: float = DEFAULT_GOE_EPSILON,
    workers: int = 1,
) -> VideoResult:
    """Estimate the respiratory pattern of a video.

    Pixels are pruned once, their time series extracted, and the frame proxy supplies the basis
    frequency and disk orientation. With ``segment_len`` the estimate is recomputed per segment.

    Raises:
        TooFewFramesError: If the video is shorter than the pruning spacing.
        EmptySelectionError: If nothing moves between the pruning frames.

    """
    with track_stage("prune"):
        selection = prune(seq, min_rr_hz, threshold_percentile)
    with track_stage("extract"):
        pts = extract_pts(seq, selection)
    with track_stage("proxy"):
        p = proxy(seq.frames, seq.fps)
    logger.info("📊 %d pixels selected from %d frames", len(selection), seq.n_frames)

    if segment_len is not None:
        signal = segmented_estimate(
            pts,
            seq.fps,
            segment_len,
            band=band,
            proxy_signal=p,
            m_basis_samples=m_basis_samples,
            grid=grid,
            goe_epsilon=goe_epsilon,
            workers=workers,
        )
        segments = cast(list[dict[str, Any]], signal.metadata["segments"])
        return VideoResult(signal, selection, p, None, segments)

    result = run_pipeline(
        pts,
        seq.fps,
        m_basis_samples=m_basis_samples,
        grid=grid,
        goe_epsilon=goe_epsilon,
        workers=workers,
        band=band,
        proxy_signal=p,
    )
    return VideoResult(result.best.signal, selection, p, result)
