import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from app.config import RunConfig
from app.experiments import (
    CommandOutcome,
    cmd_estimate,
    cmd_goe_curve,
    cmd_render,
    cmd_simulate,
    cmd_sweep_basisfreq,
    cmd_sweep_snr,
    cmd_video,
    derive_seeds,
    quarter_period_lag,
    simulate,
)
from app.output_handler import OutputWriter
from app.utils.errors import ConfigError, UnknownPresetError
from app.utils.types import PresetName


def _config(tmp_path, **overrides):
    values = dict(
        seed=0,
        n_channels=300,
        m_basis_samples=128,
        r_e_grid=(0.0, 0.3, 0.6),
        snr_db=10.0,
        workers=1,
        output_dir=str(tmp_path),
    )
    values.update(overrides)
    return RunConfig(**values)


@pytest.mark.unit
def test_derive_seeds_is_deterministic():
    assert derive_seeds(7) == derive_seeds(7)
    bank_seed, noise_seed = derive_seeds(7)
    assert bank_seed != noise_seed
    assert derive_seeds(8) != derive_seeds(7)


@pytest.mark.unit
def test_quarter_period_lag():
    assert quarter_period_lag(100.0, 5.0) == 5
    assert quarter_period_lag(30.0, 0.25) == 30
    assert quarter_period_lag(1.0, 5.0) == 0


@pytest.mark.unit
def test_simulate_shapes_and_noise(tmp_path):
    config = _config(tmp_path, n_channels=50)
    sim = simulate(config, "single", 0.0, seed=3)
    assert sim.streams.shape == (50, 200)
    assert len(sim.truth) == 200
    assert sim.noise_sigma > 0
    assert simulate(config, "single", float("inf"), seed=3).noise_sigma == 0.0
    again = simulate(config, "single", 0.0, seed=3)
    assert np.array_equal(again.streams, sim.streams)


@pytest.mark.unit
def test_cmd_sweep_snr_table(tmp_path):
    config = _config(tmp_path)
    writer = OutputWriter(tmp_path)
    outcome = cmd_sweep_snr(config, writer, ["single"], [10.0], n_seeds=2)
    assert isinstance(outcome, CommandOutcome)
    table = pd.read_csv(tmp_path / "sweep_snr.csv", float_precision="round_trip")
    assert list(table.columns) == ["preset", "snr_db", "seed", "ncc", "r_e", "n_members"]
    assert table["seed"].tolist() == [0, 1]
    assert (table["ncc"] > 0.8).all()
    assert (table["n_members"] > 0).all()
    assert writer.artifacts == ["sweep_snr.csv"]


@pytest.mark.unit
def test_cmd_sweep_snr_is_reproducible(tmp_path):
    for name in ("a", "b"):
        config = _config(tmp_path / name)
        cmd_sweep_snr(config, OutputWriter(tmp_path / name), ["two"], [0.0])
    first = (tmp_path / "a" / "sweep_snr.csv").read_bytes()
    assert first == (tmp_path / "b" / "sweep_snr.csv").read_bytes()


@pytest.mark.unit
def test_cmd_sweep_snr_rejects_bad_input(tmp_path):
    config = _config(tmp_path)
    writer = OutputWriter(tmp_path)
    with pytest.raises(ConfigError):
        cmd_sweep_snr(config, writer, [], [0.0])
    with pytest.raises(ConfigError):
        cmd_sweep_snr(config, writer, ["single"], [])
    with pytest.raises(UnknownPresetError):
        cmd_sweep_snr(config, writer, ["bogus"], [0.0])
    with pytest.raises(ConfigError):
        cmd_sweep_snr(config, writer, ["single"], [0.0], n_seeds=0)


@pytest.mark.unit
def test_cmd_sweep_basisfreq(tmp_path):
    config = _config(tmp_path)
    outcome = cmd_sweep_basisfreq(config, OutputWriter(tmp_path), "single", ratios=(0.5, 1.0))
    table = outcome.table
    assert table["ratio"].tolist() == [0.5, 1.0]
    assert outcome.extra["periods"] == 10
    matched = table.loc[table["ratio"] == 1.0].iloc[0]
    assert matched["ncc"] > 0.8
    assert abs(matched["est_fundamental_hz"] - matched["true_fundamental_hz"]) <= matched["bin_hz"]
    assert (tmp_path / "sweep_basisfreq.csv").exists()


@pytest.mark.unit
def test_cmd_sweep_basisfreq_two_step(tmp_path):
    config = _config(tmp_path)
    outcome = cmd_sweep_basisfreq(config, OutputWriter(tmp_path), "single", ratios=(1.0,), two_step=True)
    assert "two_step_ncc" in outcome.table.columns
    with pytest.raises(ConfigError):
        cmd_sweep_basisfreq(config, OutputWriter(tmp_path), "single", ratios=(2.5,))
    with pytest.raises(ConfigError):
        cmd_sweep_basisfreq(config, OutputWriter(tmp_path), "single", ratios=())


@pytest.mark.unit
def test_cmd_goe_curve(tmp_path):
    config = _config(tmp_path)
    writer = OutputWriter(tmp_path)
    outcome = cmd_goe_curve(config, writer, "single")
    table = pd.read_csv(tmp_path / "goe_curve.csv", float_precision="round_trip")
    assert list(table.columns) == ["r_e", "goe", "n_members", "ncc", "ncc_full_disk", "selected"]
    assert table["r_e"].tolist() == [0.0, 0.3, 0.6]
    assert int(table["selected"].sum()) == 1
    assert outcome.extra["selected_r_e"] in (0.0, 0.3, 0.6)
    membership = json.loads((tmp_path / "membership.json").read_text())
    assert membership["r_e"] == outcome.extra["selected_r_e"]
    assert writer.artifacts == ["goe_curve.csv", "membership.json"]


@pytest.mark.unit
def test_cmd_simulate_then_estimate(tmp_path):
    config = _config(tmp_path / "sim")
    sim_writer = OutputWriter(tmp_path / "sim")
    outcome = cmd_simulate(config, sim_writer, "single")
    assert sim_writer.artifacts == ["channels.f64", "channels.json", "ground_truth.csv"]
    assert outcome.extra["f0_hz"] == pytest.approx(5.0)

    est_writer = OutputWriter(tmp_path / "est")
    result = cmd_estimate(
        _config(tmp_path / "est"),
        est_writer,
        tmp_path / "sim" / "channels.f64",
        ground_truth_csv=tmp_path / "sim" / "ground_truth.csv",
    )
    assert result.extra["w0"] == pytest.approx(2 * np.pi * 5.0)
    assert result.extra["ncc"] > 0.9
    assert est_writer.artifacts == ["estimate.csv", "goe_curve.csv", "membership.json"]
    estimate = pd.read_csv(tmp_path / "est" / "estimate.csv", float_precision="round_trip")
    assert list(estimate.columns) == ["t", "value"]
    assert len(estimate) == 200


@pytest.mark.unit
def test_cmd_estimate_with_given_frequency(tmp_path):
    config = _config(tmp_path)
    cmd_simulate(config, OutputWriter(tmp_path), "single")
    result = cmd_estimate(config, OutputWriter(tmp_path / "est"), tmp_path / "channels.f64", w0_hz=5.0)
    assert result.extra["w0"] == pytest.approx(2 * np.pi * 5.0)
    assert "ncc" not in result.extra


@pytest.mark.unit
def test_cmd_render_then_video(tmp_path):
    config = RunConfig(seed=0, output_dir=str(tmp_path), workers=1)
    render_writer = OutputWriter(tmp_path / "render")
    rendered = cmd_render(config, render_writer, width=64, height=48, fps=10.0, duration=60.0, raw=True)
    assert render_writer.artifacts == ["frames.raw", "frames.json", "ground_truth.csv"]
    assert rendered.extra["moving_pixels"] > 0
    assert len(rendered.table) == 600

    video_writer = OutputWriter(tmp_path / "video")
    outcome = cmd_video(
        config,
        video_writer,
        tmp_path / "render" / "frames.raw",
        ground_truth_csv=tmp_path / "render" / "ground_truth.csv",
    )
    assert video_writer.artifacts == ["rp.csv", "rr.csv", "membership.json", "report.json"]
    assert outcome.extra["n_frames"] == 600
    assert outcome.extra["ncc"] >= 0.8
    assert list(outcome.table.columns) == ["t", "bpm"]
    report = json.loads((tmp_path / "video" / "report.json").read_text())
    assert set(report) == {"agreement", "ncc"}


@pytest.mark.unit
def test_cmd_render_pgm_directory(tmp_path):
    config = RunConfig(seed=0, output_dir=str(tmp_path), workers=1)
    writer = OutputWriter(tmp_path)
    cmd_render(config, writer, width=16, height=16, fps=10.0, duration=2.0)
    assert writer.artifacts == ["frames", "ground_truth.csv"]
    assert len(list((tmp_path / "frames").glob("frame_*.pgm"))) == 20


@pytest.mark.unit
def test_cmd_estimate_blind_searches_up_to_nyquist(tmp_path):
    config = _config(tmp_path / "sim")
    cmd_simulate(config, OutputWriter(tmp_path / "sim"), "single")
    matrix = tmp_path / "sim" / "channels.f64"
    result = cmd_estimate(_config(tmp_path / "est"), OutputWriter(tmp_path / "est"), matrix)
    assert result.extra["w0"] == pytest.approx(2 * np.pi * 5.0, rel=2e-2)
    assert "ncc" not in result.extra


@pytest.mark.unit
def test_cmd_estimate_honours_an_explicit_band(tmp_path):
    config = _config(tmp_path, band=(1.5, 20.0))
    cmd_simulate(config, OutputWriter(tmp_path), "single")
    result = cmd_estimate(config, OutputWriter(tmp_path / "est"), tmp_path / "channels.f64")
    assert result.extra["w0"] == pytest.approx(2 * np.pi * 5.0, rel=2e-2)


ALL_PRESETS = [p.value for p in PresetName]


@pytest.mark.integration
def test_sweep_snr_acceptance(tmp_path):
    config = RunConfig(seed=0, output_dir=str(tmp_path))
    outcome = cmd_sweep_snr(config, OutputWriter(tmp_path), ALL_PRESETS, [-2.0, 10.0], n_seeds=5)
    medians = outcome.table.groupby(["preset", "snr_db"])["ncc"].median()
    for preset in ALL_PRESETS:
        assert medians[(preset, -2.0)] >= 0.85, preset
        assert medians[(preset, 10.0)] >= 0.95, preset


@pytest.mark.integration
def test_sweep_basisfreq_acceptance(tmp_path):
    config = RunConfig(seed=0, snr_db=0.0, output_dir=str(tmp_path))
    cells = []
    for preset in ALL_PRESETS:
        table = cmd_sweep_basisfreq(config, OutputWriter(tmp_path / preset), preset, two_step=True).table
        matched_ncc = float(table.loc[table["ratio"] == 1.0, "ncc"].iloc[0])
        for _, row in table.iterrows():
            within_bin = abs(row["est_fundamental_hz"] - row["true_fundamental_hz"]) <= row["bin_hz"]
            cells.append(within_bin)
            if within_bin:
                assert row["two_step_ncc"] >= matched_ncc - 0.05, (preset, row["ratio"])
    assert np.mean(cells) >= 0.95


@pytest.mark.integration
@pytest.mark.parametrize("preset", ["sawtooth", "square", "triangle"])
def test_goe_selection_acceptance(preset, tmp_path):
    base = RunConfig(seed=0, snr_db=-5.0, output_dir=str(tmp_path))
    gaps = []
    for seed in range(5):
        table = cmd_goe_curve(replace(base, seed=seed), OutputWriter(tmp_path / str(seed)), preset).table
        selected = float(table.loc[table["selected"], "ncc"].iloc[0])
        gaps.append(float(table["ncc"].max()) - selected)
    assert np.median(gaps) <= 0.05
