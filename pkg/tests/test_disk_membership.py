import numpy as np
import pytest

from app.channel_sim import ChannelBank, random_bank, respond, respond_at, snr_to_sigma
from app.disk_membership import (
    DEFAULT_RADIUS_GRID,
    CoeffDisk,
    MembershipSet,
    build_disk,
    estimate,
    goe_score,
    normalize_rows,
    select_members,
    sweep_radius,
)
from app.periodic_signal import SampledSignal, synth, table1_preset
from app.quad_basis import CoeffPoint, QuadraticBasis, harmonic_coefficients, project, resample_window
from app.scoring import ncc
from app.utils.errors import (
    AllEmptyError,
    ConfigError,
    DegenerateDiskError,
    EmptyMembershipError,
    ZeroOrientationError,
    ZeroSignalError,
)


def _grid_windows(bank, sig, basis):
    return respond_at(bank, sig, basis.grid_times + basis.period / 2.0)


def _truth_point(sig, basis, phase=0.0):
    truth = _grid_windows(ChannelBank(np.ones((1, sig.n_harmonics)), np.array([phase]), np.zeros(1)), sig, basis)
    return project(normalize_rows(truth)[0], basis)


def _ring(n=5000, seed=0, theta=0.0):
    sig = table1_preset("single", theta=theta)
    phases = np.random.default_rng(seed).uniform(-np.pi, np.pi, n)
    bank = ChannelBank(np.ones((n, 1)), phases, np.zeros(n))
    basis = QuadraticBasis(sig.fundamental, 256)
    return sig, bank, basis


def _wrap(x):
    return np.angle(np.exp(1j * x))


def _simulated(preset, n, seed, snr_db=float("inf"), fs=100.0, periods=10.0):
    sig = table1_preset(preset)
    bank = random_bank(n, sig.n_harmonics, seed=seed)
    bank = bank.with_noise(snr_to_sigma(sig, bank, snr_db))
    duration = periods / sig.fundamental_hz
    streams = respond(bank, sig, fs, duration, noise_seed=seed + 1)
    truth = synth(sig, fs, duration)
    basis = QuadraticBasis(sig.fundamental, 256)
    window = resample_window(truth.samples, fs, basis)
    point = project(normalize_rows(window)[0], basis)
    disk = build_disk(resample_window(streams, fs, basis), basis, point)
    return streams, truth, disk


@pytest.mark.unit
def test_normalize_rows():
    rows = normalize_rows(np.array([[1.0, 3.0, 1.0, 3.0], [2.0, 2.0, 2.0, 2.0]]))
    assert np.allclose(rows[0], [-1.0, 1.0, -1.0, 1.0])
    assert np.all(rows[1] == 0.0)


@pytest.mark.unit
def test_ring_selects_in_phase_half():
    sig, bank, basis = _ring()
    disk = build_disk(_grid_windows(bank, sig, basis), basis, _truth_point(sig, basis))
    members = np.zeros(bank.n_channels, dtype=bool)
    members[list(select_members(disk, 0.0).channel_ids)] = True
    expected = np.cos(bank.phases) >= 0.0
    violations = np.count_nonzero(members != expected)
    assert violations <= 0.005 * bank.n_channels


@pytest.mark.unit
def test_ring_with_source_phase():
    theta = 0.7
    sig, bank, basis = _ring(theta=theta)
    reference = table1_preset("single")
    disk = build_disk(_grid_windows(bank, sig, basis), basis, _truth_point(reference, basis))
    members = np.zeros(bank.n_channels, dtype=bool)
    members[list(select_members(disk, 0.0).channel_ids)] = True
    expected = np.abs(_wrap(bank.phases + theta)) <= np.pi / 2
    assert np.count_nonzero(members != expected) <= 0.005 * bank.n_channels


@pytest.mark.unit
def test_ring_points_lie_on_unit_ellipse():
    sig, bank, basis = _ring(n=2000, seed=3)
    disk = build_disk(_grid_windows(bank, sig, basis), basis, _truth_point(sig, basis))
    assert np.all(disk.radii <= 1.0 + 1e-9)
    assert np.all(disk.radii > 0.999)
    assert select_members(disk, 0.99).channel_ids == select_members(disk, 0.0).channel_ids


@pytest.mark.unit
def test_filled_disk_matches_closed_form():
    sig = table1_preset("three")
    bank = random_bank(2000, 3, seed=1)
    basis = QuadraticBasis(sig.fundamental, 512)
    disk = build_disk(_grid_windows(bank, sig, basis), basis, _truth_point(sig, basis))

    k = np.asarray(sig.harmonic_indices)
    weights = bank.gains * np.asarray(sig.amplitudes)
    norms = np.sqrt(0.5 * np.sum(weights**2, axis=1, keepdims=True))
    phases = bank.phases[:, np.newaxis] + np.pi * k
    a, b = harmonic_coefficients(weights / norms, k, phases)
    assert np.allclose(disk.coefficients[:, 0], a, atol=2e-4)
    assert np.allclose(disk.coefficients[:, 1], b, atol=2e-4)
    assert np.all(disk.radii <= 1.0 + 1e-9)


@pytest.mark.unit
def test_scaling_streams_changes_nothing():
    streams, _, _ = _simulated("two", 300, seed=4, snr_db=0.0)
    basis = QuadraticBasis(table1_preset("two").fundamental, 256)
    point = CoeffPoint(0.0, -1.0)
    disk_a = build_disk(resample_window(streams, 100.0, basis), basis, point)
    disk_b = build_disk(resample_window(8.0 * streams, 100.0, basis), basis, point)
    assert np.array_equal(disk_a.coefficients, disk_b.coefficients)
    members_a = select_members(disk_a, 0.3)
    members_b = select_members(disk_b, 0.3)
    assert members_a == members_b
    est_a = estimate(streams, members_a, 100.0)
    est_b = estimate(8.0 * streams, members_b, 100.0)
    assert np.array_equal(est_a.samples, est_b.samples)


@pytest.mark.unit
def test_membership_shrinks_with_radius():
    _, _, disk = _simulated("square", 1000, seed=2, snr_db=5.0)
    previous = None
    for r_e in DEFAULT_RADIUS_GRID:
        try:
            current = set(select_members(disk, r_e).channel_ids)
        except EmptyMembershipError:
            current = set()
        if previous is not None:
            assert current <= previous
        previous = current


@pytest.mark.unit
def test_full_annulus_is_superset():
    _, _, disk = _simulated("two", 500, seed=6, snr_db=0.0)
    half = set(select_members(disk, 0.2).channel_ids)
    full = set(select_members(disk, 0.2, half_disk=False).channel_ids)
    assert half < full


@pytest.mark.unit
def test_select_members_rejects_bad_radius():
    _, _, disk = _simulated("single", 50, seed=0)
    with pytest.raises(ConfigError):
        select_members(disk, 1.0)
    with pytest.raises(ConfigError):
        select_members(disk, -0.1)


@pytest.mark.unit
def test_single_member_estimate_is_normalized_stream():
    streams, _, _ = _simulated("two", 20, seed=8, snr_db=10.0)
    est = estimate(streams, MembershipSet((5,), 0.0), 100.0, t0=1.5)
    assert np.allclose(est.samples, normalize_rows(streams)[5])
    assert est.t0 == 1.5


@pytest.mark.unit
def test_estimate_empty_membership():
    with pytest.raises(EmptyMembershipError):
        estimate(np.ones((2, 10)), MembershipSet((), 0.0))


@pytest.mark.unit
def test_noiseless_pure_tone_estimate():
    streams, truth, disk = _simulated("single", 5000, seed=0)
    est = estimate(streams, select_members(disk, 0.0), 100.0)
    assert ncc(est, truth) >= 0.999


@pytest.mark.unit
@pytest.mark.parametrize("preset", ["two", "three"])
def test_noiseless_multi_harmonic_estimate(preset):
    streams, truth, disk = _simulated(preset, 5000, seed=0)
    est = estimate(streams, select_members(disk, 0.0), 100.0)
    assert ncc(est, truth, max_lag=5) >= 0.98


@pytest.mark.unit
def test_half_disk_beats_full_disk_under_noise():
    streams, truth, disk = _simulated("three", 2000, seed=5, snr_db=-5.0)
    half = estimate(streams, select_members(disk, 0.0), 100.0)
    full = estimate(streams, select_members(disk, 0.0, half_disk=False), 100.0)
    assert ncc(half, truth) > ncc(full, truth) + 0.2


@pytest.mark.unit
def test_goe_of_pure_tone_is_one():
    tone = synth(table1_preset("single"), 100.0, 2.0)
    assert goe_score(tone) == 1.0


@pytest.mark.unit
def test_goe_of_noise_is_small_and_monotone_in_epsilon():
    noise = SampledSignal(np.random.default_rng(0).standard_normal(1024), 100.0)
    coarse = goe_score(noise, 0.05)
    fine = goe_score(noise, 0.025)
    assert coarse < 0.05
    assert fine <= coarse


@pytest.mark.unit
def test_goe_invalid():
    with pytest.raises(ZeroSignalError):
        goe_score(np.zeros(16))
    with pytest.raises(ConfigError):
        goe_score(np.arange(16.0), 0.0)


@pytest.mark.unit
def test_sweep_ties_go_to_largest_radius():
    sig, bank, _ = _ring(n=500, seed=1)
    fs = 500.0
    streams = respond(bank, sig, fs, 2.0)
    basis = QuadraticBasis(sig.fundamental, 256)
    disk = build_disk(resample_window(streams, fs, basis), basis, _truth_point(sig, basis))
    result = sweep_radius(disk, streams, DEFAULT_RADIUS_GRID, fs, w0=sig.fundamental)
    assert len(result.curve) == len(DEFAULT_RADIUS_GRID)
    assert all(row["goe"] == 1.0 for row in result.curve)
    assert result.best.r_e == DEFAULT_RADIUS_GRID[-1]
    assert result.best.w0_used == sig.fundamental
    assert set(result.estimates) == set(DEFAULT_RADIUS_GRID)


@pytest.mark.unit
def test_sweep_is_independent_of_workers():
    streams, _, disk = _simulated("sawtooth", 800, seed=3, snr_db=0.0)
    serial = sweep_radius(disk, streams, DEFAULT_RADIUS_GRID, 100.0, workers=1)
    threaded = sweep_radius(disk, streams, DEFAULT_RADIUS_GRID, 100.0, workers=4)
    assert [r["n_members"] for r in serial.curve] == [r["n_members"] for r in threaded.curve]
    assert np.array_equal(
        [r["goe"] for r in serial.curve], [r["goe"] for r in threaded.curve], equal_nan=True
    )
    assert serial.best.r_e == threaded.best.r_e
    assert np.array_equal(serial.best.signal.samples, threaded.best.signal.samples)


@pytest.mark.unit
def test_sweep_all_empty():
    sig = table1_preset("single")
    bank = ChannelBank(np.ones((3, 1)), np.array([0.0, 0.1, -0.1]), np.zeros(3))
    basis = QuadraticBasis(sig.fundamental, 256)
    windows = _grid_windows(bank, sig, basis)
    disk = build_disk(windows, basis, _truth_point(sig, basis, phase=np.pi))
    with pytest.raises(AllEmptyError):
        sweep_radius(disk, windows, [0.0, 0.5])
    with pytest.raises(ConfigError):
        sweep_radius(disk, windows, [])


def _two_ring_disk(n_inner=995, n_outer=5):
    # inner ring at r=0.48, a few outliers on the rim, all on the oriented half
    n = n_inner + n_outer
    angles = np.linspace(-1.2, 1.2, n)
    radius = np.r_[np.full(n_inner, 0.48), np.ones(n_outer)]
    coefficients = np.column_stack([radius * np.cos(angles), radius * np.sin(angles), np.zeros(n)])
    return CoeffDisk(coefficients, np.arange(n, dtype=np.int64), 1.0, 1.0, np.array([1.0, 0.0]))


@pytest.mark.unit
def test_sweep_skips_radii_with_too_few_members():
    disk = _two_ring_disk()
    t = np.arange(200) / 100.0
    streams = np.tile(np.sin(2 * np.pi * 5.0 * t), (len(disk), 1))
    result = sweep_radius(disk, streams, DEFAULT_RADIUS_GRID, 100.0)
    assert all(row["goe"] == 1.0 for row in result.curve)
    assert result.curve[-1]["n_members"] == 5
    assert result.best.r_e == 0.45
    assert result.best.membership.cardinality == 1000

    relaxed = sweep_radius(disk, streams, DEFAULT_RADIUS_GRID, 100.0, min_members=1)
    assert relaxed.best.r_e == DEFAULT_RADIUS_GRID[-1]


@pytest.mark.unit
def test_sweep_falls_back_when_no_radius_reaches_the_floor():
    disk = _two_ring_disk(n_inner=4, n_outer=2)
    t = np.arange(200) / 100.0
    streams = np.tile(np.sin(2 * np.pi * 5.0 * t), (len(disk), 1))
    result = sweep_radius(disk, streams, [0.0, 0.6], 100.0)
    assert result.best.r_e == 0.6
    assert result.best.membership.cardinality == 2
    with pytest.raises(ConfigError):
        sweep_radius(disk, streams, [0.0], 100.0, min_members=0)


@pytest.mark.unit
def test_degenerate_disk_and_zero_orientation():
    sig = table1_preset("single")
    basis = QuadraticBasis(sig.fundamental, 256)
    same_phase = ChannelBank(np.ones((4, 1)), np.zeros(4), np.zeros(4))
    with pytest.raises(DegenerateDiskError):
        build_disk(_grid_windows(same_phase, sig, basis), basis, CoeffPoint(0.0, 1.0))
    sig2, bank, basis2 = _ring(n=50)
    with pytest.raises(ZeroOrientationError):
        build_disk(_grid_windows(bank, sig2, basis2), basis2, CoeffPoint(0.0, 0.0))


@pytest.mark.unit
def test_membership_to_dict():
    assert MembershipSet((1, 4), 0.35).to_dict() == {"r_e": 0.35, "channel_ids": [1, 4]}
