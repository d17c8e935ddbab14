from unittest.mock import patch

import numpy as np
import pytest

from app.channel_sim import quasi_periodic_respond, random_bank, respond, schedule_time_warp
from app.periodic_signal import GeneratingSignal, SampledSignal, synth, table1_preset
from app.processor import (
    PipelineResult,
    orientation_from_source,
    process_video,
    run_pipeline,
    segmented_estimate,
)
from app.quad_basis import QuadraticBasis
from app.scoring import bland_altman, ncc, rr_estimate
from app.utils.errors import ConfigError, SegmentTooShortError
from app.utils.types import OrientationSource
from app.video_io import breathing_pattern, render_synthetic

BREATH_HZ = 0.25


def _breathing_channels(n=500, fs=10.0, duration=60.0, sigma=0.3, seed=0):
    # sources share the cosine phase the frame proxy reports
    sig = GeneratingSignal.from_hz([1.0, 0.3], [BREATH_HZ, 2 * BREATH_HZ], theta=np.pi / 2)
    bank = random_bank(n, 2, noise_sigma=sigma, seed=seed)
    return sig, respond(bank, sig, fs, duration, noise_seed=seed + 1), synth(sig, fs, duration)


@pytest.mark.unit
def test_run_pipeline_with_known_frequency_and_truth():
    sig = table1_preset("single")
    bank = random_bank(1000, 1, noise_sigma=0.3, seed=2)
    streams = respond(bank, sig, 100.0, 2.0, noise_seed=3)
    truth = synth(sig, 100.0, 2.0)
    basis = QuadraticBasis(sig.fundamental, 256)
    point = orientation_from_source(streams, 100.0, basis, OrientationSource.TRUTH, truth=truth)
    result = run_pipeline(streams, 100.0, w0=sig.fundamental, orientation=point, grid=[0.0, 0.5])
    assert isinstance(result, PipelineResult)
    assert result.best.w0_used == sig.fundamental
    assert result.basis.w0 == sig.fundamental
    assert len(result.sweep.curve) == 2
    assert ncc(result.best.signal, truth, max_lag=5) > 0.95


@pytest.mark.unit
def test_run_pipeline_blind():
    _, streams, truth = _breathing_channels()
    result = run_pipeline(streams, 10.0)
    assert result.best.w0_used == pytest.approx(2 * np.pi * BREATH_HZ, rel=1e-2)
    assert ncc(result.best.signal, truth, max_lag=3) > 0.9


@pytest.mark.unit
def test_run_pipeline_records_stages():
    _, streams, _ = _breathing_channels(n=100)
    with patch("app.utils.track_stage_metrics.record_stage_metrics") as record:
        run_pipeline(streams, 10.0, grid=[0.0])
    stages = [call.args[0] for call in record.call_args_list]
    assert stages == ["proxy", "disk", "sweep"]


@pytest.mark.unit
def test_orientation_sources():
    _, streams, truth = _breathing_channels(n=200)
    basis = QuadraticBasis(2 * np.pi * BREATH_HZ, 128)
    for source in OrientationSource:
        point = orientation_from_source(streams, 10.0, basis, source, truth=truth)
        assert np.hypot(point.a, point.b) > 0
    with pytest.raises(ConfigError):
        orientation_from_source(streams, 10.0, basis, "truth")


@pytest.mark.unit
def test_segmented_estimate_tracks_rate_change():
    fs = 10.0
    schedule = [(30.0, 1.0), (30.0, 1.5)]
    sig = GeneratingSignal.from_hz([1.0], [BREATH_HZ], theta=np.pi / 2)
    bank = random_bank(400, 1, noise_sigma=0.1, seed=4)
    streams = quasi_periodic_respond(bank, sig, schedule, fs, noise_seed=5)
    result = segmented_estimate(streams, fs, 30.0)

    segments = result.metadata["segments"]
    assert len(result) == streams.shape[1]
    assert [s["start"] for s in segments] == [0.0, 30.0]
    assert segments[0]["w0"] == pytest.approx(2 * np.pi * BREATH_HZ, rel=3e-2)
    assert segments[1]["w0"] == pytest.approx(2 * np.pi * 1.5 * BREATH_HZ, rel=3e-2)
    reference = np.cos(2 * np.pi * BREATH_HZ * schedule_time_warp(schedule, fs))
    assert ncc(result, SampledSignal(reference, fs), max_lag=3) > 0.9


@pytest.mark.unit
def test_segmented_estimate_errors():
    _, streams, _ = _breathing_channels(n=50)
    with pytest.raises(SegmentTooShortError):
        segmented_estimate(streams, 10.0, 5.0)
    with pytest.raises(ConfigError):
        segmented_estimate(streams, 10.0, 30.0, bases=[QuadraticBasis(1.0, 64)])


@pytest.mark.unit
def test_segmented_estimate_with_given_bases():
    _, streams, _ = _breathing_channels(n=200)
    bases = [QuadraticBasis(2 * np.pi * BREATH_HZ, 128)] * 2
    result = segmented_estimate(streams, 10.0, 30.0, bases=bases, m_basis_samples=128)
    assert [s["w0"] for s in result.metadata["segments"]] == [bases[0].w0] * 2


def _small_video(duration=60.0, fps=10.0):
    rp = breathing_pattern("normal", duration, fps=fps, rate_hz=BREATH_HZ)
    return render_synthetic(64, 48, fps, duration, rp, texture_seed=1, noise_sigma=1.0)


@pytest.mark.unit
def test_process_video_small_render():
    render = _small_video()
    result = process_video(render.frames, min_rr_hz=0.1, threshold_percentile=80.0)
    assert result.pipeline is not None
    assert len(result.estimate) == render.frames.n_frames
    assert len(result.proxy) == render.frames.n_frames
    assert result.pipeline.best.w0_used == pytest.approx(2 * np.pi * BREATH_HZ, rel=2e-2)
    assert ncc(result.estimate, render.rp, max_lag=10) >= 0.85


@pytest.mark.unit
def test_process_video_segmented():
    render = _small_video()
    result = process_video(render.frames, segment_len=30.0)
    assert result.pipeline is None
    assert len(result.segments) == 2
    assert len(result.estimate) == render.frames.n_frames


@pytest.mark.integration
@pytest.mark.parametrize("pattern", ["normal", "normal_deep_normal"])
def test_process_video_acceptance_render(pattern):
    fps = 30.0
    rp = breathing_pattern(pattern, 60.0, fps=fps, rate_hz=BREATH_HZ)
    render = render_synthetic(320, 240, fps, 60.0, rp, texture_seed=0, noise_sigma=1.0)
    result = process_video(render.frames)
    assert ncc(result.estimate, render.rp, max_lag=int(fps / (4 * BREATH_HZ))) >= 0.9

    rr = rr_estimate(result.estimate, window_s=15.0)
    rr_truth = rr_estimate(render.rp, window_s=15.0)
    assert len(rr) == len(rr_truth) == 4
    assert np.all(np.abs(rr["bpm"].to_numpy() - rr_truth["bpm"].to_numpy()) <= 1.0)
    assert abs(bland_altman(rr["bpm"], rr_truth["bpm"]).bias) <= 0.5
