"""Command bodies: simulation sweeps, GoE curves, the video pipeline and artifact helpers.

Every command takes a validated ``RunConfig`` and an ``OutputWriter``, writes its CSV/JSON
artifacts through the writer and returns a ``CommandOutcome`` whose ``extra`` block goes into
the run manifest. Seeds are derived from ``config.seed`` only, so reruns are byte-identical.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from app.channel_sim import ChannelBank, load_matrix, random_bank, respond, snr_to_sigma
from app.config import RunConfig
from app.disk_membership import sweep_radius
from app.output_handler import OutputWriter
from app.periodic_signal import GeneratingSignal, SampledSignal, read_signal_csv, synth, table1_preset
from app.processor import PipelineResult, orientation_from_source, process_video, run_pipeline
from app.proxy_freq import simulation_band
from app.quad_basis import QuadraticBasis
from app.scoring import bland_altman, dominant_frequency, frequency_resolution, ncc, rr_estimate
from app.utils.errors import ConfigError
from app.utils.setup_logger import setup_logger
from app.utils.types import ArtifactKind, OrientationSource
from app.video_io import breathing_pattern, load_frames, render_synthetic, save_frames

logger = setup_logger(__name__)

BASISFREQ_RATIOS: tuple[float, ...] = (0.05, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)


@dataclass
class CommandOutcome:
    """Main table of a command plus manifest details."""

    table: pd.DataFrame
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Simulation:
    """Channel outputs rendered from a preset with their ground truth."""

    streams: np.ndarray
    truth: SampledSignal
    signal: GeneratingSignal
    bank: ChannelBank
    noise_sigma: float


def derive_seeds(seed: int) -> tuple[int, int]:
    """Independent (bank, noise) seeds derived from one root seed."""
    bank_seed, noise_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(bank_seed), int(noise_seed)


def simulate(
    config: RunConfig, preset: str, snr_db: float, seed: int, periods: float | None = None
) -> Simulation:
    """Render ``config.n_channels`` random channels driven by a preset at a target SNR.

    Args:
        config (RunConfig): Sampling rate, channel count and noise kind.
        preset (str): Harmonic preset name.
        snr_db (float): Bank-average SNR in dB (``inf`` for noiseless).
        seed (int): Root seed for the bank and the noise.
        periods (float | None): Length in fundamental periods; ``config.periods`` when None.

    Returns:
        Simulation: Streams of shape (n_channels, L) and the noiseless source.

    """
    sig = table1_preset(preset)
    bank_seed, noise_seed = derive_seeds(seed)
    bank = random_bank(config.n_channels, sig.n_harmonics, seed=bank_seed, noise_kind=config.noise)
    sigma = snr_to_sigma(sig, bank, snr_db)
    bank = bank.with_noise(sigma)
    duration = (periods if periods is not None else config.periods) / sig.fundamental_hz
    streams = respond(bank, sig, config.sample_rate, duration, noise_seed=noise_seed)
    truth = synth(sig, config.sample_rate, duration)
    logger.debug("🎲 Simulated %s at %.1f dB: sigma=%.4g, %d samples", preset, snr_db, sigma, truth.samples.size)
    return Simulation(streams, truth, sig, bank, sigma)


def quarter_period_lag(sample_rate: float, f0_hz: float) -> int:
    """Lag search range of a quarter fundamental period, in samples."""
    return max(0, int(round(sample_rate / (4.0 * f0_hz))))


def estimate_simulation(
    config: RunConfig, sim: Simulation, w0: float | None = None, half_disk: bool = True
) -> PipelineResult:
    """Run the pipeline on a simulation with the configured orientation source."""
    w = w0 if w0 is not None else sim.signal.fundamental
    basis = QuadraticBasis(w, config.m_basis_samples)
    point = orientation_from_source(
        sim.streams, config.sample_rate, basis, config.orientation_source, truth=sim.truth
    )
    return run_pipeline(
        sim.streams,
        config.sample_rate,
        w0=w,
        orientation=point,
        m_basis_samples=config.m_basis_samples,
        grid=config.r_e_grid,
        goe_epsilon=config.goe_epsilon,
        workers=config.workers,
        half_disk=half_disk,
    )


def _score(config: RunConfig, estimate: SampledSignal, sim: Simulation) -> float:
    return ncc(estimate, sim.truth, quarter_period_lag(config.sample_rate, sim.signal.fundamental_hz))


def _seeds(config: RunConfig, n_seeds: int) -> list[int]:
    if n_seeds < 1:
        raise ConfigError(f"n_seeds must be at least 1, got {n_seeds}")
    return [config.seed + i for i in range(n_seeds)]


def cmd_sweep_snr(
    config: RunConfig,
    writer: OutputWriter,
    presets: Sequence[str],
    snr_db_list: Sequence[float],
    n_seeds: int = 1,
) -> CommandOutcome:
    """NCC of the GoE-selected estimate for every (preset, SNR, seed) cell.

    Raises:
        ConfigError: If no preset or SNR is given, or a preset is unknown.

    """
    if not presets:
        raise ConfigError("sweep-snr needs at least one preset")
    if not snr_db_list:
        raise ConfigError("sweep-snr needs at least one SNR value")
    for name in presets:
        table1_preset(name)

    rows = []
    for preset in presets:
        for snr_db in snr_db_list:
            for seed in _seeds(config, n_seeds):
                sim = simulate(config, preset, snr_db, seed)
                result = estimate_simulation(config, sim)
                score = _score(config, result.best.signal, sim)
                rows.append(
                    {
                        "preset": preset,
                        "snr_db": float(snr_db),
                        "seed": seed,
                        "ncc": score,
                        "r_e": result.best.r_e,
                        "n_members": result.best.membership.cardinality,
                    }
                )
                logger.info("📊 %s @ %+.1f dB (seed %d): NCC %.4f", preset, snr_db, seed, score)
    table = pd.DataFrame(rows)
    writer.write(ArtifactKind.TABLE, "sweep_snr.csv", table)
    return CommandOutcome(table, {"presets": list(presets), "snr_db": [float(s) for s in snr_db_list]})


def cmd_sweep_basisfreq(
    config: RunConfig,
    writer: OutputWriter,
    preset: str,
    ratios: Sequence[float] = BASISFREQ_RATIOS,
    two_step: bool = False,
    n_seeds: int = 1,
) -> CommandOutcome:
    """Force the basis frequency to ``ratio * w0`` and record NCC and the estimate's frequency.

    The stream is extended to at least ``ceil(1 / min(ratio)) + 1`` periods so that one basis
    period fits. In two-step mode the pipeline is re-run at the recovered fundamental.

    Raises:
        ConfigError: If a ratio lies outside (0, 2].

    """
    if not ratios or any(not 0.0 < r <= 2.0 for r in ratios):
        raise ConfigError(f"ratios must be non-empty and lie in (0, 2], got {list(ratios)}")
    periods = max(config.periods, math.ceil(1.0 / min(ratios)) + 1)

    rows = []
    for seed in _seeds(config, n_seeds):
        sim = simulate(config, preset, config.snr_db, seed, periods=periods)
        w0 = sim.signal.fundamental
        for ratio in ratios:
            result = estimate_simulation(config, sim, w0=ratio * w0)
            est = result.best.signal
            row: dict[str, Any] = {
                "ratio": float(ratio),
                "seed": seed,
                "ncc": _score(config, est, sim),
                "est_fundamental_hz": dominant_frequency(est),
                "true_fundamental_hz": sim.signal.fundamental_hz,
                "bin_hz": frequency_resolution(est),
            }
            if two_step:
                recovered = 2.0 * np.pi * row["est_fundamental_hz"]
                row["two_step_ncc"] = _score(config, estimate_simulation(config, sim, w0=recovered).best.signal, sim)
            rows.append(row)
            logger.info("📊 w_e/w0=%.2f: NCC %.4f, f=%.4f Hz", ratio, row["ncc"], row["est_fundamental_hz"])
    table = pd.DataFrame(rows)
    writer.write(ArtifactKind.TABLE, "sweep_basisfreq.csv", table)
    return CommandOutcome(table, {"preset": preset, "periods": periods, "two_step": two_step})


def cmd_goe_curve(
    config: RunConfig, writer: OutputWriter, preset: str, snr_db: float | None = None
) -> CommandOutcome:
    """Full (r_e, goe, ncc) curve with the half-disk and full-disk NCC per radius.

    The row with the highest GoE is flagged in the ``selected`` column.
    """
    snr = config.snr_db if snr_db is None else snr_db
    sim = simulate(config, preset, snr, config.seed)
    result = estimate_simulation(config, sim)
    full = sweep_radius(
        result.disk,
        sim.streams,
        config.r_e_grid,
        config.sample_rate,
        config.goe_epsilon,
        w0=result.basis.w0,
        workers=config.workers,
        half_disk=False,
    )

    rows = []
    for point in result.sweep.curve:
        r_e = point["r_e"]
        half_est = result.sweep.estimates.get(r_e)
        full_est = full.estimates.get(r_e)
        rows.append(
            {
                "r_e": r_e,
                "goe": point["goe"],
                "n_members": point["n_members"],
                "ncc": _score(config, half_est, sim) if half_est is not None else float("nan"),
                "ncc_full_disk": _score(config, full_est, sim) if full_est is not None else float("nan"),
                "selected": r_e == result.best.r_e,
            }
        )
    table = pd.DataFrame(rows)
    writer.write(ArtifactKind.CURVE, "goe_curve.csv", table)
    writer.write(ArtifactKind.MEMBERSHIP, "membership.json", result.best.membership)
    selected = table.loc[table["selected"]].iloc[0]
    logger.info("📊 %s @ %+.1f dB: r_e=%.2f, NCC %.4f", preset, snr, selected["r_e"], selected["ncc"])
    return CommandOutcome(
        table, {"preset": preset, "snr_db": snr, "selected_r_e": float(selected["r_e"])}
    )


def cmd_video(
    config: RunConfig,
    writer: OutputWriter,
    input_path: str | Path,
    ground_truth_csv: str | Path | None = None,
    fps: float | None = None,
) -> CommandOutcome:
    """Estimate RP and windowed RR from a video; score against a ground-truth RP if given."""
    seq = load_frames(input_path, fps=fps, workers=config.workers)
    result = process_video(
        seq,
        min_rr_hz=config.min_rr_hz,
        threshold_percentile=config.percentile,
        band=config.video_band,
        segment_len=config.segment_len,
        m_basis_samples=config.m_basis_samples,
        grid=config.r_e_grid,
        goe_epsilon=config.goe_epsilon,
        workers=config.workers,
    )
    rp = result.estimate
    rr = rr_estimate(rp, config.rr_window_s, config.video_band)
    writer.write(ArtifactKind.SIGNAL, "rp.csv", rp, value_name="rp")
    writer.write(ArtifactKind.TABLE, "rr.csv", rr)

    extra: dict[str, Any] = {
        "n_frames": seq.n_frames,
        "fps": seq.fps,
        "n_pixels": len(result.selection),
    }
    if result.pipeline is not None:
        best = result.pipeline.best
        extra.update({"r_e": best.r_e, "n_members": best.membership.cardinality, "w0": best.w0_used})
        writer.write(ArtifactKind.MEMBERSHIP, "membership.json", best.membership)
    else:
        extra["segments"] = result.segments

    if ground_truth_csv is not None:
        truth = read_signal_csv(ground_truth_csv)
        reference = SampledSignal(np.interp(rp.times, truth.times, truth.samples), rp.sample_rate, rp.t0)
        rr_ref = rr_estimate(reference, config.rr_window_s, config.video_band)
        f0_hz = float(np.median(rr_ref["bpm"])) / 60.0
        agreement = bland_altman(rr["bpm"], rr_ref["bpm"], config.ci_halfwidth)
        report = {
            "ncc": ncc(rp, reference, quarter_period_lag(rp.sample_rate, f0_hz)),
            "agreement": agreement.to_dict(),
        }
        writer.write(ArtifactKind.REPORT, "report.json", report)
        extra["ncc"] = report["ncc"]
        logger.info("📊 Video NCC %.4f, RR bias %.3f BPM", report["ncc"], agreement.bias)
    return CommandOutcome(rr, extra)


def cmd_render(
    config: RunConfig,
    writer: OutputWriter,
    pattern: str = "normal",
    width: int = 320,
    height: int = 240,
    fps: float = 30.0,
    duration: float = 60.0,
    rate_hz: float = 0.25,
    noise_sigma: float = 1.0,
    patch_fraction: float = 0.6,
    amplitude_px: float = 1.0,
    raw: bool = False,
) -> CommandOutcome:
    """Render a synthetic breathing video plus its ground-truth RP."""
    rp = breathing_pattern(pattern, duration, fps, rate_hz)
    render = render_synthetic(
        width,
        height,
        fps,
        duration,
        rp,
        texture_seed=config.seed,
        noise_sigma=noise_sigma,
        patch_fraction=patch_fraction,
        amplitude_px=amplitude_px,
    )
    name = "frames.raw" if raw else "frames"
    target = save_frames(render.frames, writer.output_dir / name, raw=raw)
    writer.artifacts.append(name)
    if raw:
        writer.artifacts.append("frames.json")
    table = pd.DataFrame({"t": render.rp.times, "rp": render.rp.samples})
    writer.write(ArtifactKind.SIGNAL, "ground_truth.csv", render.rp, value_name="rp")
    logger.info("🎞️ Rendered %d frames to %s", render.frames.n_frames, target)
    return CommandOutcome(
        table,
        {
            "pattern": pattern,
            "width": width,
            "height": height,
            "fps": fps,
            "duration": duration,
            "noise_sigma": noise_sigma,
            "moving_pixels": int(render.mask.sum()),
        },
    )


def cmd_simulate(
    config: RunConfig, writer: OutputWriter, preset: str, snr_db: float | None = None
) -> CommandOutcome:
    """Write a simulated channel matrix with its ground truth."""
    snr = config.snr_db if snr_db is None else snr_db
    sim = simulate(config, preset, snr, config.seed)
    writer.write(
        ArtifactKind.MATRIX, "channels.f64", sim.streams, sample_rate=config.sample_rate, seed=config.seed
    )
    writer.artifacts.append("channels.json")
    writer.write(ArtifactKind.SIGNAL, "ground_truth.csv", sim.truth)
    table = pd.DataFrame({"t": sim.truth.times, "value": sim.truth.samples})
    return CommandOutcome(
        table,
        {"preset": preset, "snr_db": snr, "noise_sigma": sim.noise_sigma, "f0_hz": sim.signal.fundamental_hz},
    )


def cmd_estimate(
    config: RunConfig,
    writer: OutputWriter,
    matrix_path: str | Path,
    w0_hz: float | None = None,
    ground_truth_csv: str | Path | None = None,
) -> CommandOutcome:
    """Run the pipeline on a stored channel matrix.

    Without ``w0_hz`` the basis frequency comes from the channel-vector proxy, searched over
    ``config.band`` or, when unset, from a few cycles of the recording up to Nyquist. A ground truth,
    when given, can orient the disk (``orientation = truth``) and is scored by NCC.
    """
    streams, sidecar = load_matrix(matrix_path)
    sample_rate = float(sidecar["sample_rate"])
    truth = read_signal_csv(ground_truth_csv) if ground_truth_csv is not None else None
    band = config.band or simulation_band(streams.shape[1] / sample_rate, sample_rate)

    w0 = 2.0 * np.pi * w0_hz if w0_hz is not None else None
    orientation = None
    if truth is not None and config.orientation_source is not OrientationSource.PROXY:
        if w0 is None:
            w0 = 2.0 * np.pi * dominant_frequency(truth)
        basis = QuadraticBasis(w0, config.m_basis_samples)
        orientation = orientation_from_source(
            streams, sample_rate, basis, config.orientation_source, truth=truth
        )
    result = run_pipeline(
        streams,
        sample_rate,
        w0=w0,
        orientation=orientation,
        m_basis_samples=config.m_basis_samples,
        grid=config.r_e_grid,
        goe_epsilon=config.goe_epsilon,
        workers=config.workers,
        band=band,
        harmonic_safe=config.band is None,
    )
    best = result.best
    writer.write(ArtifactKind.SIGNAL, "estimate.csv", best.signal)
    writer.write(ArtifactKind.CURVE, "goe_curve.csv", result.sweep.curve)
    writer.write(ArtifactKind.MEMBERSHIP, "membership.json", best.membership)
    extra: dict[str, Any] = {"w0": best.w0_used, "r_e": best.r_e, "n_members": best.membership.cardinality}
    if truth is not None:
        reference = SampledSignal(np.interp(best.signal.times, truth.times, truth.samples), sample_rate)
        extra["ncc"] = ncc(best.signal, reference, quarter_period_lag(sample_rate, best.w0_used / (2.0 * np.pi)))
    return CommandOutcome(pd.DataFrame(result.sweep.curve), extra)
