from dataclasses import replace

import numpy as np
import pytest
import yaml

from whitespace_modules.blocksparse import BlockPartition, SensingMatrix, write_matrix
from whitespace_modules.cli import run_command
from whitespace_modules.config import (
    BenchmarkConfig,
    apply_override,
    dump_config,
    load_config,
    resolve_config_path,
)
from whitespace_modules.errors import ConfigError, ValidationError
from whitespace_modules.nuws import read_selection


def small_run_flags(output_dir):
    """Overrides for a tiny 4-channel setup that runs in seconds."""
    return [
        "--set", "n=40", "--set", "b=4", "--set", "m_values=[12, 20]",
        "--set", "p=2", "--set", "k_max=2", "--set", "trials_per_cell=40",
        "--set", "snr_grid_db=[10, 20]",
        "--set", "dictionary.rho_set=[5, 10, 20, 40]",
        "--set", "dictionary.halfperiod_set=[1, 2, 5, 10]",
        "--set", "selection.candidates_per_step=30",
        "--set", f"artifacts.output_dir={output_dir}",
        "--quiet",
    ]


# ------------------------------------------
# configuration
# ------------------------------------------

def test_shipped_default_matches_dataclass_defaults():
    assert load_config("default") == BenchmarkConfig()


def test_full_scale_config_only_scales_up():
    full = load_config("full_scale")
    assert full.trials_per_cell == 50_000
    assert full.selection.candidates_per_step is None
    assert full.m_values == (50, 100, 150)


def test_config_round_trip():
    config = replace(BenchmarkConfig(), snr_grid_db=(0, 10, float("inf")), bomp_k=7)
    assert BenchmarkConfig.from_dict(config.to_dict()) == config
    assert BenchmarkConfig.from_dict(yaml.safe_load(dump_config(config))) == config


@pytest.mark.parametrize("data", [{"trials": 5}, {"dictionary": {"tau": 2}}, {"link_budget": 3}])
def test_unknown_or_malformed_keys(data):
    with pytest.raises(ConfigError):
        BenchmarkConfig.from_dict(data)


def test_overrides_are_applied_after_the_file():
    config = load_config("default", ["dictionary.tau_step=4", "m_values=[20, 40]", "seed=3"], seed=11)
    assert config.dictionary.tau_step == 4
    assert config.m_values == (20, 40)
    assert config.seed == 11


def test_override_syntax():
    with pytest.raises(ConfigError):
        apply_override({}, "p")
    with pytest.raises(ConfigError):
        apply_override({"band": 3}, "band.start_hz=1")
    assert apply_override({}, "noise.temperature_k=300") == {"noise": {"temperature_k": 300}}


@pytest.mark.parametrize("override", ["p=20", "m_values=[250]", "methods=[neural]", "n=45",
                                      "snr_grid_db=[]", "snr_mode=measured", "k_max=0",
                                      "distance_range_m=[0.5, 280]", "p=two", "band.start_hz=abc",
                                      "link_budget.tx_power_dbm=abc", "noise.noise_figure_db=[1]",
                                      "distance_range_m=[1, far]", "distance_range_m=[1, 2, 3]",
                                      "link_budget.carrier_hz=true", "band.stop_hz=.nan",
                                      "noise.tx_noise_db=-3", "band.start_hz=null"])
def test_validation_failures(override):
    with pytest.raises(ValidationError):
        load_config("default", [override])


def test_numeric_strings_become_floats():
    # YAML 1.1 reads 2.3e9 (no sign in the exponent) as a string
    config = load_config("default", ["band.start_hz=2.3e9", "link_budget.tx_power_dbm=17",
                                     "noise.temperature_k='300'", "distance_range_m=[2, 1e2]"])
    assert config.band.start_hz == 2.3e9
    assert config.link_budget.tx_power_dbm == 17.0
    assert config.noise.temperature_k == 300.0
    assert config.distance_range_m == (2.0, 100.0)
    assert all(isinstance(v, float) for v in (config.band.start_hz, config.link_budget.tx_power_dbm,
                                              config.noise.temperature_k, *config.distance_range_m))
    assert load_config("default").band.start_hz == 2.4e9


def test_nullable_floats():
    config = load_config("default", ["noise.tx_noise_db=null", "link_budget.carrier_hz=5.75e9"])
    assert config.noise_spec().tx_noise_db is None
    assert config.link_budget.carrier_hz == 5.75e9


def test_config_directory_from_environment(tmp_path, monkeypatch):
    (tmp_path / "tiny.yaml").write_text("trials_per_cell: 7\n")
    monkeypatch.setenv("WHITESPACE_CONFIG_DIR", str(tmp_path))
    assert resolve_config_path("tiny") == tmp_path / "tiny.yaml"
    assert load_config("tiny").trials_per_cell == 7


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
    broken = tmp_path / "broken.yaml"
    broken.write_text("n: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(broken)


# ------------------------------------------
# command line
# ------------------------------------------

def test_print_config_shows_overrides(capsys):
    assert run_command(["sweep", "--print-config", "--set", "p=3"]) == 0
    dumped = yaml.safe_load(capsys.readouterr().out)
    assert dumped["p"] == 3
    assert dumped["m_values"] == [50, 100, 150]


def test_exit_statuses(tmp_path, caplog):
    assert run_command(["calibrate"]) == 2
    assert "usage error" in caplog.text
    assert run_command(["sweep", "--config", str(tmp_path / "none.yaml")]) == 3
    assert "config error" in caplog.text
    assert run_command(["sweep", "--set", "p=99"]) == 4
    assert run_command(["sweep", "--set", "link_budget.tx_power_dbm=abc"]) == 4
    assert run_command(["sweep", "--set", "band.start_hz=2.4e9", "--set", "band.stop_hz=abc"]) == 4
    assert "validation error" in caplog.text
    assert run_command(["sweep", "--set", f"artifacts.output_dir={tmp_path}"]) == 5
    assert "artifact error" in caplog.text
    assert run_command(["guarantee"]) == 2


def test_pipeline_end_to_end(tmp_path):
    flags = small_run_flags(tmp_path)
    assert run_command(["dict-gen", *flags]) == 0
    assert run_command(["matrix-select", *flags]) == 0

    for m in (12, 20):
        chosen = read_selection(tmp_path / f"selection_M{m}.txt")
        assert len(chosen) == m
        assert (tmp_path / f"matrix_M{m}.txt").exists()
        trajectory = (tmp_path / f"coherence_M{m}.csv").read_text().splitlines()
        assert trajectory[0] == "step,row,block_coherence"
        assert len(trajectory) == m + 1

    assert run_command(["sweep", *flags, "--out", str(tmp_path / "first.csv")]) == 0
    assert run_command(["sweep", *flags, "--seed", "1", "--out", str(tmp_path / "again.csv")]) == 0
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "again.csv").read_bytes()

    assert run_command(["report", *flags, "--results", str(tmp_path / "first.csv")]) == 0
    assert (tmp_path / "error_curves.svg").read_text().lstrip().startswith("<?xml")


def test_matrix_select_needs_a_dictionary(tmp_path):
    assert run_command(["matrix-select", *small_run_flags(tmp_path)]) == 5


def test_guarantee_on_orthonormal_equal_power_instance(tmp_path, capsys):
    rng = np.random.default_rng(5)
    blocks = [np.linalg.qr(rng.standard_normal((40, 2)) + 1j * rng.standard_normal((40, 2)))[0]
              for _ in range(4)]
    A = SensingMatrix(np.hstack(blocks), BlockPartition.uniform(4, 2))
    write_matrix(A, tmp_path / "a.txt")

    signal = np.zeros(8, dtype=complex)
    signal[0:2] = [1.0, 0.0]
    signal[4:6] = [0.0, 1.0j]
    instance = {
        "matrix": "a.txt",
        "signal": [[float(v.real), float(v.imag)] for v in signal],
        "noise_norm": 0.0,
    }
    (tmp_path / "instance.yaml").write_text(yaml.safe_dump(instance))

    assert run_command(["guarantee", "--instance", str(tmp_path / "instance.yaml")]) == 0
    out = capsys.readouterr().out
    values = dict(line.split("=", 1) for line in out.splitlines() if "=" in line)
    values = {k.strip(): v.strip() for k, v in values.items()}
    assert float(values["lhs (delta)"]) == pytest.approx(2.0)
    threshold = float(values["bomp threshold"].split()[0])
    assert float(values["rhs"]) == pytest.approx(threshold, rel=1e-5)
    assert values["holds"] == str(2.0 < threshold).lower()


def test_guarantee_instance_errors(tmp_path):
    (tmp_path / "bad.yaml").write_text("matrix: a.txt\nsignal: [[1, 0]]\nextra: 1\n")
    assert run_command(["guarantee", "--instance", str(tmp_path / "bad.yaml")]) == 5
    assert run_command(["guarantee", "--instance", str(tmp_path / "none.yaml")]) == 5
