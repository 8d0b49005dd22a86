from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from conftest import complex_gaussian
from whitespace_modules.blocksparse import BlockSparseSignal, SensingMatrix
from whitespace_modules.config import BenchmarkConfig
from whitespace_modules.errors import ArtifactError, SignalError, ValidationError
from whitespace_modules.nuws import build_dictionary, greedy_select
from whitespace_modules.rfsim import (
    ChannelPlan,
    ErrorCurve,
    LinkBudget,
    NoiseSpec,
    Scenario,
    average_snr_db,
    dbm_to_watts,
    draw_scenario,
    free_space_loss_db,
    measure,
    nyquist_observation,
    path_loss_db,
    received_power_dbm,
    run_sweep,
    synthesize_signal,
    target_noise_variance,
    transmitter_noise,
)

PLAN = ChannelPlan()
TARGET = NoiseSpec()


def identity_matrices(m=200):
    return {m: SensingMatrix(np.eye(PLAN.N)[:m], PLAN.partition)}


def sweep_config(**changes):
    return replace(BenchmarkConfig(), **changes).validate()


# ------------------------------------------
# channel plan and link budget
# ------------------------------------------

def test_channel_plan_defaults():
    assert PLAN.N == 200
    assert PLAN.channel_bw_hz == pytest.approx(5e6)
    assert PLAN.bin_bw_hz == pytest.approx(5e5)
    assert PLAN.partition.num_blocks == 20
    assert PLAN.channel_bw_hz * PLAN.num_channels == pytest.approx(PLAN.band_stop_hz - PLAN.band_start_hz)


def test_path_loss_examples():
    budget = LinkBudget().at_carrier(PLAN)
    assert budget.carrier_hz == pytest.approx(2.45e9)
    reference = budget.resolved_reference_loss_db
    assert reference == pytest.approx(free_space_loss_db(1.0, 2.45e9))
    assert reference == pytest.approx(40.23, abs=0.01)
    assert path_loss_db(1.0, budget) == pytest.approx(reference)
    assert path_loss_db(10.0, budget) == pytest.approx(reference + 35.0)
    assert received_power_dbm(1.0, budget) - received_power_dbm(280.0, budget) == pytest.approx(
        35.0 * np.log10(280.0))


def test_reference_loss_follows_the_band_centre(rng):
    high_band = ChannelPlan(band_start_hz=5.7e9, band_stop_hz=5.8e9)
    budget = LinkBudget().at_carrier(high_band)
    assert budget.carrier_hz == pytest.approx(5.75e9)
    low = LinkBudget().at_carrier(PLAN).resolved_reference_loss_db
    assert budget.resolved_reference_loss_db - low == pytest.approx(20 * np.log10(5.75 / 2.45))

    scenario = draw_scenario(rng, high_band, 1)
    expected = 30.0 - free_space_loss_db(1.0, 5.75e9) - 35.0 * np.log10(scenario.distances_m[0])
    assert scenario.rx_powers_dbm[0] == pytest.approx(expected)

    assert LinkBudget(carrier_hz=2.0e9).at_carrier(high_band).carrier_hz == 2.0e9
    with pytest.raises(ValidationError):
        LinkBudget().resolved_reference_loss_db


def test_path_loss_is_monotone_and_checks_distance():
    budget = LinkBudget(reference_loss_db=30.0, path_loss_exponent=2.0)
    losses = [path_loss_db(d, budget) for d in (1, 2, 50, 280)]
    assert losses == sorted(losses)
    assert losses[0] == 30.0
    with pytest.raises(ValidationError):
        path_loss_db(0.5, budget)


def test_dbm_conversion():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)


# ------------------------------------------
# scenarios and signals
# ------------------------------------------

def test_single_transmitter_scenario(rng):
    for _ in range(50):
        assert draw_scenario(rng, PLAN, 1).K == 1


def test_scenario_contract(rng):
    for _ in range(500):
        s = draw_scenario(rng, PLAN, 5)
        assert 1 <= s.K <= 5
        assert len(set(s.active_channels)) == s.K
        assert all(1.0 <= d <= 280.0 for d in s.distances_m)
        assert all(0 <= c < 20 for c in s.active_channels)


def test_mean_number_of_transmitters():
    rng = np.random.default_rng(2)
    counts = [draw_scenario(rng, PLAN, 5).K for _ in range(100_000)]
    assert np.mean(counts) == pytest.approx(3.0, abs=0.02)


def test_scenario_k_max_range(rng):
    with pytest.raises(ValidationError):
        draw_scenario(rng, PLAN, 0)
    with pytest.raises(ValidationError):
        draw_scenario(rng, PLAN, 21)


def test_synthesized_block_powers(rng):
    scenario = draw_scenario(rng, PLAN, 5)
    x = synthesize_signal(scenario, PLAN, rng)
    assert len(x.unused_set) == 20 - scenario.K
    for channel, power in zip(scenario.active_channels, scenario.rx_powers_dbm):
        assert x.block_norms[channel] ** 2 == pytest.approx(dbm_to_watts(power), rel=1e-10)
    for channel in x.unused_set:
        assert x.block_norms[channel] == 0.0

    total = np.sum(np.abs(x.values) ** 2)
    assert total == pytest.approx(sum(dbm_to_watts(p) for p in scenario.rx_powers_dbm), rel=1e-10)


def test_synthesized_bins_are_qpsk(rng):
    scenario = draw_scenario(rng, PLAN, 3)
    x = synthesize_signal(scenario, PLAN, rng)
    block = x.block(scenario.active_channels[0])
    phases = np.mod(np.angle(block) - np.pi / 4, np.pi / 2)
    assert_allclose(np.minimum(phases, np.pi / 2 - phases), 0, atol=1e-12)
    assert_allclose(np.abs(block), np.abs(block[0]))


def test_equal_distances_give_equal_norms(rng):
    budget = LinkBudget().at_carrier(PLAN)
    power = received_power_dbm(40.0, budget)
    scenario = Scenario((3, 11), (40.0, 40.0), (power, power))
    x = synthesize_signal(scenario, PLAN, rng)
    assert x.block_norms[3] == pytest.approx(x.block_norms[11], rel=1e-12)


# ------------------------------------------
# measurements
# ------------------------------------------

@pytest.fixture
def signal(rng):
    return synthesize_signal(draw_scenario(rng, PLAN, 5), PLAN, rng)


def test_noiseless_measurement(rng, signal):
    A = SensingMatrix(complex_gaussian(rng, 50, 200), PLAN.partition)
    y = measure(A, signal, TARGET, np.inf, rng)
    assert_allclose(y.values, A.entries @ signal.values)
    assert y.noise_norm == 0.0


def test_noise_energy_matches_variance(rng, signal):
    A = SensingMatrix(complex_gaussian(rng, 50, 200), PLAN.partition)
    sigma2 = target_noise_variance(signal, 50, 10.0)
    energies = [measure(A, signal, TARGET, 10.0, rng).noise_norm ** 2 for _ in range(10_000)]
    assert np.mean(energies) == pytest.approx(50 * sigma2, rel=0.01)


def test_target_snr_calibration(rng):
    scenario = Scenario((7,), (25.0,), (received_power_dbm(25.0, LinkBudget().at_carrier(PLAN)),))
    x = synthesize_signal(scenario, PLAN, rng)
    A = SensingMatrix(complex_gaussian(rng, 50, 200), PLAN.partition)
    energies = [measure(A, x, TARGET, 15.0, rng).noise_norm ** 2 for _ in range(10_000)]
    assert average_snr_db(x, np.mean(energies)) == pytest.approx(15.0, abs=0.1)


def test_target_snr_needs_an_active_channel(rng):
    A = SensingMatrix(np.eye(200)[:50], PLAN.partition)
    empty = BlockSparseSignal(np.zeros(200), PLAN.partition)
    with pytest.raises(SignalError):
        measure(A, empty, TARGET, 10.0, rng)


def test_physical_noise_follows_thermal_floor(rng, signal):
    physical = NoiseSpec(mode="physical")
    floor = physical.bin_noise_power_w(PLAN)
    assert floor == pytest.approx(1.380649e-23 * 290 * 5e5 * 10 ** 0.5)

    A = SensingMatrix(np.eye(200)[:100], PLAN.partition)
    energies = [measure(A, signal, physical, rng=rng).noise_norm ** 2 for _ in range(2000)]
    assert np.mean(energies) == pytest.approx(100 * floor, rel=0.02)


def test_nyquist_observation(rng, signal):
    assert_allclose(nyquist_observation(signal, TARGET, np.inf, rng), signal.values)
    noisy = nyquist_observation(signal, TARGET, 0.0, rng)
    assert noisy.shape == (200,)
    assert not np.allclose(noisy, signal.values)


def test_transmitter_noise_level(rng, signal):
    leaky = NoiseSpec(tx_noise_db=20.0)
    total = np.sum(np.abs(signal.values) ** 2)
    draws = [transmitter_noise(signal, leaky, 10.0, rng) for _ in range(5000)]
    assert np.mean([np.sum(np.abs(e) ** 2) for e in draws]) == pytest.approx(total / 100, rel=0.02)
    per_bin = np.mean([np.abs(e) ** 2 for e in draws], axis=0)
    assert_allclose(per_bin, total / 100 / 200, rtol=0.15)


def test_transmitter_noise_is_off_for_ideal_or_noiseless_runs(rng, signal):
    assert not transmitter_noise(signal, TARGET, 10.0, rng).any()
    assert not transmitter_noise(signal, NoiseSpec(tx_noise_db=20.0), np.inf, rng).any()
    physical = NoiseSpec(mode="physical", tx_noise_db=20.0)
    assert transmitter_noise(signal, physical, None, rng).any()


def test_transmitter_noise_passes_through_the_sensing_matrix(rng, signal):
    A = SensingMatrix(complex_gaussian(rng, 50, 200), PLAN.partition)
    emission = transmitter_noise(signal, NoiseSpec(tx_noise_db=20.0), 10.0, rng)
    y = measure(A, signal, TARGET, np.inf, rng, emission=emission)
    assert_allclose(y.values, A.entries @ (signal.values + emission))
    assert y.noise_norm == 0.0
    assert_allclose(nyquist_observation(signal, TARGET, np.inf, rng, emission=emission),
                    signal.values + emission)


def test_unknown_snr_mode():
    with pytest.raises(ValidationError):
        NoiseSpec(mode="measured")
    with pytest.raises(ValidationError):
        NoiseSpec(tx_noise_db=0.0)


# ------------------------------------------
# error curves
# ------------------------------------------

def test_error_curve_file_format(tmp_path):
    curve = ErrorCurve.from_counts({
        ("zd-groth", 10.0, 50): (3, 1),
        ("lmp", 10.0, 50): (3, 0),
        ("lmp", 5.0, 50): (3, 2),
    })
    path = curve.to_csv(tmp_path / "out" / "results.csv")
    assert path.read_text().splitlines() == [
        "method,snr_db,m,trials,errors,error_rate",
        "lmp,5,50,3,2,0.666667",
        "lmp,10,50,3,0,0.000000",
        "zd-groth,10,50,3,1,0.333333",
    ]
    back = ErrorCurve.read_csv(path)
    assert back.rate("lmp", 5.0, 50) == pytest.approx(2 / 3)
    assert back.std_error("lmp", 10.0, 50) == 0.0


def test_error_curve_rejects_bad_tables(tmp_path):
    with pytest.raises(ArtifactError):
        ErrorCurve(pd.DataFrame({"method": ["lmp"]}))
    with pytest.raises(ArtifactError):
        ErrorCurve.from_counts({("lmp", 0.0, 50): (0, 0)})
    with pytest.raises(ArtifactError):
        ErrorCurve.read_csv(tmp_path / "missing.csv")


# ------------------------------------------
# sweeps
# ------------------------------------------

def test_noiseless_square_system_has_no_zd_errors():
    config = sweep_config(m_values=(200,), snr_grid_db=(float("inf"),), methods=("zd-groth", "lmp"),
                          trials_per_cell=200)
    curve = run_sweep(config, seed=3, matrices=identity_matrices())
    assert curve.rate("zd-groth", np.inf, 200) == 0.0
    assert curve.rate("lmp", np.inf, 200) == 0.0


def test_sweep_counts_every_trial():
    config = sweep_config(m_values=(200,), snr_grid_db=(0, 20), methods=("nyquist", "random"),
                          trials_per_cell=60)
    curve = run_sweep(config, matrices=identity_matrices())
    assert len(curve) == 4
    assert (curve.table["trials"] == 60).all()
    assert ((curve.table["errors"] >= 0) & (curve.table["errors"] <= 60)).all()


def test_snr_cells_share_trial_streams():
    config = sweep_config(m_values=(200,), snr_grid_db=(0, 20), methods=("random",), trials_per_cell=300)
    curve = run_sweep(config, seed=4, matrices=identity_matrices())
    assert curve.rate("random", 0.0, 200) == curve.rate("random", 20.0, 200)


def test_sweep_needs_matrices(tmp_path):
    config = sweep_config(artifacts=replace(BenchmarkConfig().artifacts, output_dir=str(tmp_path)))
    with pytest.raises(ArtifactError):
        run_sweep(config)


def test_physical_mode_reports_rounded_snr_bins():
    config = sweep_config(m_values=(200,), methods=("zd-groth",), snr_mode="physical", trials_per_cell=40)
    curve = run_sweep(config, matrices=identity_matrices())
    assert curve.table["trials"].sum() == 40
    snrs = curve.table["snr_db"].to_numpy()
    assert_allclose(snrs, np.round(snrs))


@pytest.mark.slow
def test_random_baseline_calibration():
    config = sweep_config(m_values=(200,), snr_grid_db=(10,), methods=("random",), trials_per_cell=20_000)
    curve = run_sweep(config, matrices=identity_matrices())
    assert curve.rate("random", 10.0, 200) == pytest.approx(0.15, abs=0.01)


@pytest.mark.slow
def test_sweep_is_independent_of_worker_count(tmp_path):
    rng = np.random.default_rng(0)
    matrices = {60: SensingMatrix(complex_gaussian(rng, 60, 200), PLAN.partition)}
    config = sweep_config(m_values=(60,), snr_grid_db=(5, 20), methods=("zd-groth", "lmp", "random"),
                          trials_per_cell=600)
    serial = run_sweep(config, seed=9, matrices=matrices, workers=1).to_csv(tmp_path / "w1.csv")
    parallel = run_sweep(config, seed=9, matrices=matrices, workers=8).to_csv(tmp_path / "w8.csv")
    assert serial.read_bytes() == parallel.read_bytes()


@pytest.mark.slow
def test_desk_scale_error_trends():
    dictionary = build_dictionary(200)
    matrix = greedy_select(dictionary, PLAN.partition, 150, candidates_per_step=256, seed=1).matrix
    snr_grid = (10, 15, 20, 30)
    # default transmitter noise (25 dB below each signal) bounds the effective SNR
    config = sweep_config(m_values=(150,), snr_grid_db=snr_grid,
                          methods=("lmp", "zd-groth", "bomp-elim", "random"), trials_per_cell=2000)
    curve = run_sweep(config, matrices={150: matrix}, workers=4)

    for snr in snr_grid:
        lmp_rate, zd_rate = curve.rate("lmp", snr, 150), curve.rate("zd-groth", snr, 150)
        assert lmp_rate <= zd_rate + curve.std_error("zd-groth", snr, 150)
        assert zd_rate < curve.rate("bomp-elim", snr, 150)
        assert lmp_rate < curve.rate("random", snr, 150)

    for method in ("lmp", "zd-groth"):
        for low, high in zip(snr_grid, snr_grid[1:]):
            slack = curve.std_error(method, low, 150) + curve.std_error(method, high, 150)
            assert curve.rate(method, high, 150) <= curve.rate(method, low, 150) + slack
