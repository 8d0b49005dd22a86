"""
Module: rfsim.py
Description:
    Monte-Carlo RF whitespace benchmark.
    Draws transmitter scenarios in a 20-channel band, turns distances into
    received powers with a log-distance link budget, synthesises the
    block-sparse spectrum directly in the DFT domain, takes noisy NUWS
    measurements and scores every detector on identical (A, y).
    Results are aggregated into an ErrorCurve table (pandas).
"""

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from .blocksparse import BlockPartition, BlockSparseSignal, MeasurementVector
from .detectors import (
    Method,
    bomp_elimination,
    lmp,
    nyquist_min_power,
    random_unused,
    zd_groth,
)
from .errors import ArtifactError, DimensionError, SignalError, ValidationError
from .nuws import effective_matrix, read_dictionary, read_selection

logger = logging.getLogger(__name__)

# ==========================================
# CONFIGURATION
# ==========================================
SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
QPSK_PHASES = np.pi / 4 + np.pi / 2 * np.arange(4)
TRIALS_PER_CHUNK = 250
RESULT_COLUMNS = ["method", "snr_db", "m", "trials", "errors", "error_rate"]
SNR_MODES = ("target_snr", "physical")


# ==========================================
# DOMAIN TYPES
# ==========================================

@dataclass(frozen=True)
class ChannelPlan:
    num_channels: int = 20
    bins_per_channel: int = 10
    band_start_hz: float = 2.4e9
    band_stop_hz: float = 2.5e9

    def __post_init__(self):
        if self.num_channels < 2 or self.bins_per_channel < 1:
            raise ValidationError(
                f"need >= 2 channels and >= 1 bin each, got {self.num_channels}x{self.bins_per_channel}"
            )
        if self.band_stop_hz <= self.band_start_hz:
            raise ValidationError("band_stop_hz must exceed band_start_hz")

    @property
    def N(self):
        return self.num_channels * self.bins_per_channel

    @property
    def span_hz(self):
        return self.band_stop_hz - self.band_start_hz

    @property
    def channel_bw_hz(self):
        return self.span_hz / self.num_channels

    @property
    def bin_bw_hz(self):
        return self.span_hz / self.N

    @property
    def center_hz(self):
        return 0.5 * (self.band_start_hz + self.band_stop_hz)

    @cached_property
    def partition(self):
        return BlockPartition.uniform(self.num_channels, self.bins_per_channel)


@dataclass(frozen=True)
class LinkBudget:
    """
    Log-distance path loss. reference_loss_db defaults to free space at d0
    and carrier_hz; an unset carrier_hz is taken from the band centre (at_carrier).
    """

    tx_power_dbm: float = 20.0
    rx_gain_dbi: float = 10.0
    path_loss_exponent: float = 3.5
    reference_distance_m: float = 1.0
    reference_loss_db: float = None
    carrier_hz: float = None

    def at_carrier(self, plan):
        if self.carrier_hz is not None:
            return self
        return replace(self, carrier_hz=plan.center_hz)

    @property
    def resolved_reference_loss_db(self):
        if self.reference_loss_db is not None:
            return self.reference_loss_db
        if self.carrier_hz is None:
            raise ValidationError("carrier_hz is unset; resolve it from the channel plan with at_carrier()")
        return free_space_loss_db(self.reference_distance_m, self.carrier_hz)


@dataclass(frozen=True)
class NoiseSpec:
    temperature_k: float = 290.0
    noise_figure_db: float = 5.0
    mode: str = "target_snr"
    # transmitter wideband noise, total power in dB below each signal; None = ideal transmitters
    tx_noise_db: float = None

    def __post_init__(self):
        if self.mode not in SNR_MODES:
            raise ValidationError(f"snr mode must be one of {SNR_MODES}, got '{self.mode}'")
        if self.tx_noise_db is not None and self.tx_noise_db <= 0:
            raise ValidationError(f"tx_noise_db must be positive (dB below the signal), got {self.tx_noise_db}")

    def bin_noise_power_w(self, plan):
        """k T B F for one DFT bin (B = sample rate / N)."""
        return BOLTZMANN * self.temperature_k * plan.bin_bw_hz * db_to_linear(self.noise_figure_db)


@dataclass(frozen=True)
class Scenario:
    active_channels: tuple
    distances_m: tuple
    rx_powers_dbm: tuple

    @property
    def K(self):
        return len(self.active_channels)


class ErrorCurve:
    """
    Error counts per (method, snr_db, m) cell, held in a pandas DataFrame with
    columns method, snr_db, m, trials, errors, error_rate.
    """

    def __init__(self, table):
        missing = set(RESULT_COLUMNS[:-1]) - set(table.columns)
        if missing:
            raise ArtifactError(f"results table lacks columns {sorted(missing)}")
        table = table[RESULT_COLUMNS[:-1]].copy()
        table["snr_db"] = table["snr_db"].astype(float)
        table["m"] = table["m"].astype(int)
        table["trials"] = table["trials"].astype(int)
        table["errors"] = table["errors"].astype(int)
        if (table["trials"] <= 0).any():
            raise ArtifactError("every reported cell needs trials > 0")
        table["error_rate"] = table["errors"] / table["trials"]
        self.table = table.sort_values(["method", "m", "snr_db"], kind="mergesort").reset_index(drop=True)

    @classmethod
    def from_counts(cls, counts):
        """counts: {(method, snr_db, m): (trials, errors)}"""
        rows = [
            {"method": method, "snr_db": snr, "m": m, "trials": trials, "errors": errors}
            for (method, snr, m), (trials, errors) in counts.items()
        ]
        return cls(pd.DataFrame(rows, columns=RESULT_COLUMNS[:-1]))

    def __len__(self):
        return len(self.table)

    @property
    def methods(self):
        return sorted(self.table["method"].unique())

    @property
    def m_values(self):
        return sorted(int(m) for m in self.table["m"].unique())

    def cell(self, method, snr_db, m):
        rows = self.table[(self.table["method"] == method) & (self.table["snr_db"] == snr_db)
                          & (self.table["m"] == m)]
        if rows.empty:
            raise KeyError((method, snr_db, m))
        return rows.iloc[0]

    def rate(self, method, snr_db, m):
        return float(self.cell(method, snr_db, m)["error_rate"])

    def std_error(self, method, snr_db, m):
        row = self.cell(method, snr_db, m)
        p = row["error_rate"]
        return float(np.sqrt(p * (1 - p) / row["trials"]))

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        out = self.table.copy()
        out["snr_db"] = out["snr_db"].map(lambda v: format(v, "g"))
        out["error_rate"] = out["error_rate"].map(lambda v: f"{v:.6f}")
        out.to_csv(path, index=False, lineterminator="\n")
        return path

    @classmethod
    def read_csv(cls, path):
        path = Path(path)
        if not path.exists():
            raise ArtifactError(f"results file not found: {path}")
        try:
            table = pd.read_csv(path)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ArtifactError(f"{path}: cannot parse results table ({e})") from e
        return cls(table)


# ==========================================
# LINK BUDGET
# ==========================================

def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def free_space_loss_db(distance_m, frequency_hz):
    return 20.0 * np.log10(4.0 * np.pi * distance_m * frequency_hz / SPEED_OF_LIGHT)


def path_loss_db(d_m, budget):
    """PL(d) = PL(d0) + 10 n log10(d / d0)."""
    if d_m < budget.reference_distance_m:
        raise ValidationError(
            f"distance {d_m} m is below the reference distance {budget.reference_distance_m} m"
        )
    return float(budget.resolved_reference_loss_db
                 + 10.0 * budget.path_loss_exponent * np.log10(d_m / budget.reference_distance_m))


def received_power_dbm(d_m, budget):
    return budget.tx_power_dbm + budget.rx_gain_dbi - path_loss_db(d_m, budget)


# ==========================================
# SCENARIO AND SIGNAL
# ==========================================

def draw_scenario(rng, plan, k_max, budget=None, distance_range_m=(1.0, 280.0)):
    """K uniform on 1..k_max, K distinct channels, distances uniform on the range."""
    budget = (LinkBudget() if budget is None else budget).at_carrier(plan)
    if not 1 <= k_max <= plan.num_channels:
        raise ValidationError(f"k_max must lie in [1, {plan.num_channels}], got {k_max}")

    K = int(rng.integers(1, k_max + 1))
    channels = rng.choice(plan.num_channels, size=K, replace=False)
    distances = rng.uniform(distance_range_m[0], distance_range_m[1], size=K)
    powers = tuple(received_power_dbm(d, budget) for d in distances)
    return Scenario(tuple(int(c) for c in channels), tuple(float(d) for d in distances), powers)


def synthesize_signal(scenario, plan, rng):
    """
    DFT-domain spectrum: each active channel carries unit-magnitude QPSK-phase
    bins scaled so the block energy equals its received power in watts.
    """
    x = np.zeros(plan.N, dtype=np.complex128)
    for channel, power_dbm in zip(scenario.active_channels, scenario.rx_powers_dbm):
        symbols = np.exp(1j * QPSK_PHASES[rng.integers(4, size=plan.bins_per_channel)])
        scale = np.sqrt(dbm_to_watts(power_dbm) / plan.bins_per_channel)
        x[plan.partition.block_slice(channel)] = scale * symbols
    return BlockSparseSignal(x, plan.partition)


# ==========================================
# MEASUREMENT
# ==========================================

def _complex_gaussian(rng, variance, size):
    if variance == 0.0:
        return np.zeros(size, dtype=np.complex128)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def _mean_active_energy_per_bin(x):
    used = x.used_set
    if not used:
        raise SignalError("target SNR requested but the signal has no active channel")
    return float(np.mean([x.block_norms[j] ** 2 / x.block(j).shape[0] for j in used]))


def target_noise_variance(x, M, target_snr_db):
    """
    Per-measurement variance sigma^2 making the average per-transmitter SNR,
    mean_j ||x_j||^2 / (M sigma^2 N_j / N), equal the target.
    """
    snr = float(db_to_linear(target_snr_db))
    if np.isinf(snr):
        return 0.0
    return x.partition.total_len * _mean_active_energy_per_bin(x) / (M * snr)


def average_snr_db(x, noise_energy):
    """Average per-transmitter SNR for a given total noise energy ||n||^2."""
    N = x.partition.total_len
    if noise_energy == 0.0:
        return np.inf
    return float(10.0 * np.log10(N * _mean_active_energy_per_bin(x) / noise_energy))


def measurement_noise_variance(A, x, noise, plan, target_snr_db=None):
    if noise.mode == "target_snr":
        if target_snr_db is None:
            raise ValidationError("target_snr mode needs a target SNR")
        return target_noise_variance(x, A.num_rows, target_snr_db)
    # physical: thermal noise per DFT bin, carried through each row's energy
    row_energy = float(np.mean(np.sum(np.abs(A.entries) ** 2, axis=1)))
    return noise.bin_noise_power_w(plan) * row_energy


def transmitter_noise(x, noise, target_snr_db=None, rng=None):
    """
    Wideband noise radiated by the active transmitters: white across all N
    bins, total power tx_noise_db below the summed signal power. Zero for
    ideal transmitters and for noiseless runs (infinite target SNR).
    """
    N = x.partition.total_len
    if noise.tx_noise_db is None or (target_snr_db is not None and np.isinf(target_snr_db)):
        return np.zeros(N, dtype=np.complex128)
    rng = np.random.default_rng() if rng is None else rng
    power = float(np.sum(np.abs(x.values) ** 2) / db_to_linear(noise.tx_noise_db))
    return _complex_gaussian(rng, power / N, N)


def measure(A, x, noise, target_snr_db=None, rng=None, plan=None, emission=None):
    """
    y = A (x + e) + n with circularly-symmetric complex Gaussian n, i.i.d.
    across the M measurements, and e the transmitter noise (none by default).
    noise_norm on the result is the realised ||n||_2 of the receiver noise.
    """
    if A.partition.total_len != x.partition.total_len:
        raise DimensionError("sensing matrix and signal lengths differ")
    rng = np.random.default_rng() if rng is None else rng
    plan = ChannelPlan() if plan is None else plan

    variance = measurement_noise_variance(A, x, noise, plan, target_snr_db)
    n = _complex_gaussian(rng, variance, A.num_rows)
    radiated = x.values if emission is None else x.values + emission
    return MeasurementVector(A.entries @ radiated + n, noise_norm=float(np.linalg.norm(n)))


def nyquist_observation(x, noise, target_snr_db=None, rng=None, plan=None, emission=None):
    """Full DFT-domain spectrum (plus transmitter noise) and per-bin noise at the matched SNR."""
    rng = np.random.default_rng() if rng is None else rng
    plan = ChannelPlan() if plan is None else plan
    if noise.mode == "target_snr":
        snr = float(db_to_linear(target_snr_db))
        variance = 0.0 if np.isinf(snr) else _mean_active_energy_per_bin(x) / snr
    else:
        variance = noise.bin_noise_power_w(plan)
    radiated = x.values if emission is None else x.values + emission
    return radiated + _complex_gaussian(rng, variance, x.partition.total_len)


# ==========================================
# SWEEP
# ==========================================

def trial_rngs(seed, stream, trial):
    """
    Independent (scenario/noise, random-baseline) streams for one trial.
    Every SNR cell of one M shares a stream, so trial t sees the same
    scenario and noise shape at each SNR (common random numbers).
    """
    return (np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, trial, 0))),
            np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, trial, 1))))


def run_detector(method, A, y, x_spectrum, partition, P, bomp_k, random_rng):
    method = Method.parse(method)
    if method is Method.ZD_GROTH:
        return zd_groth(A, y)
    if method is Method.LMP:
        return lmp(A, y, P)
    if method is Method.LMP_RESIDUAL:
        return lmp(A, y, P, criterion="residual")
    if method is Method.BOMP_ELIMINATION:
        return bomp_elimination(A, y, bomp_k)
    if method is Method.NYQUIST:
        return nyquist_min_power(x_spectrum, partition)
    return random_unused(random_rng, partition.num_blocks)


@dataclass(frozen=True)
class _Chunk:
    stream: int
    m: int
    snr_db: float
    start: int
    stop: int


@dataclass
class _SweepContext:
    plan: ChannelPlan
    budget: LinkBudget
    noise: NoiseSpec
    methods: tuple
    k_max: int
    distance_range_m: tuple
    P: int
    bomp_k: int
    seed: int
    matrices: dict = field(default_factory=dict)


def _run_chunk(context, chunk):
    counts = Counter()
    A = context.matrices[chunk.m]
    target = chunk.snr_db if context.noise.mode == "target_snr" else None

    for trial in range(chunk.start, chunk.stop):
        rng, random_rng = trial_rngs(context.seed, chunk.stream, trial)
        scenario = draw_scenario(rng, context.plan, context.k_max, context.budget,
                                 context.distance_range_m)
        x = synthesize_signal(scenario, context.plan, rng)
        emission = transmitter_noise(x, context.noise, target, rng)
        y = measure(A, x, context.noise, target, rng, context.plan, emission)
        spectrum = nyquist_observation(x, context.noise, target, rng, context.plan, emission)

        if target is None:
            snr_bin = float(np.round(average_snr_db(x, y.noise_norm ** 2)))
        else:
            snr_bin = float(target)

        active = set(scenario.active_channels)
        for method in context.methods:
            detection = run_detector(method, A, y, spectrum, context.plan.partition,
                                     context.P, context.bomp_k, random_rng)
            counts[(method, snr_bin, chunk.m, "trials")] += 1
            counts[(method, snr_bin, chunk.m, "errors")] += int(detection.declared_unused in active)
    return counts


_worker_context = None


def _init_worker(context):
    global _worker_context
    _worker_context = context


def _run_chunk_in_worker(chunk):
    return _run_chunk(_worker_context, chunk)


def _chunks(config):
    snr_grid = config.snr_grid_db if config.snr_mode == "target_snr" else (np.nan,)
    for stream, m in enumerate(config.m_values):
        for snr in snr_grid:
            for start in range(0, config.trials_per_cell, TRIALS_PER_CHUNK):
                yield _Chunk(stream, int(m), float(snr), start,
                             min(start + TRIALS_PER_CHUNK, config.trials_per_cell))


def load_selected_matrices(config):
    """Rebuild {M: SensingMatrix} from the dictionary and selection files of a previous matrix-select."""
    plan = config.channel_plan()
    dictionary = read_dictionary(config.artifacts.dictionary_path())
    if dictionary.N != plan.N:
        raise ArtifactError(f"dictionary was built for N={dictionary.N}, config has n={plan.N}")

    matrices = {}
    for m in config.m_values:
        path = config.artifacts.selection_path(m)
        if not path.exists():
            raise ArtifactError(f"selection file not found: {path} [HINT] run matrix-select first")
        chosen = read_selection(path)
        if max(chosen) >= len(dictionary):
            raise ArtifactError(f"{path}: index {max(chosen)} outside a dictionary of {len(dictionary)} rows")
        matrices[m] = effective_matrix(dictionary.rows[list(chosen)], plan.N, plan.partition)
    return matrices


def run_sweep(config, seed=None, matrices=None, workers=None, progress=False):
    """
    Run every configured detector on identical (A, y) for each (M, SNR) cell.

    Trial t at the i-th M draws its randomness from SeedSequence(seed,
    spawn_key=(i, t, .)) at every SNR, and chunk counts are summed in a fixed
    order, so the curve does not depend on the number of workers.

    Parameters:
        config: BenchmarkConfig (validated).
        seed (int, optional): overrides config.seed.
        matrices (dict, optional): {M: SensingMatrix}; loaded from the
            selection artifacts when omitted.
        workers (int, optional): process count; overrides config.workers.
        progress (bool): show a tqdm bar.

    Returns:
        ErrorCurve
    """
    seed = config.seed if seed is None else seed
    workers = config.workers if workers is None else workers
    plan = config.channel_plan()

    if matrices is None:
        matrices = load_selected_matrices(config)
    missing = [m for m in config.m_values if m not in matrices]
    if missing:
        raise ArtifactError(f"no sensing matrix for M = {missing}")
    for m in config.m_values:
        if matrices[m].num_rows != m or matrices[m].partition != plan.partition:
            raise DimensionError(f"matrix for M={m} has shape {matrices[m].shape}")
        # fill whitening caches before the matrices are shipped to workers
        matrices[m].whitened_adjoint

    context = _SweepContext(
        plan=plan,
        budget=config.link_budget.at_carrier(plan),
        noise=config.noise_spec(),
        methods=tuple(config.methods),
        k_max=config.k_max,
        distance_range_m=tuple(config.distance_range_m),
        P=config.p,
        bomp_k=config.resolved_bomp_k,
        seed=seed,
        matrices={m: matrices[m] for m in config.m_values},
    )
    chunks = list(_chunks(config))
    logger.info("Sweep: %d cells x %d trials, methods %s, %d worker(s)",
                len(config.m_values) * (len(config.snr_grid_db) if config.snr_mode == "target_snr" else 1),
                config.trials_per_cell, ", ".join(context.methods), workers)

    totals = Counter()
    if workers <= 1:
        for chunk in tqdm(chunks, desc="sweep", disable=not progress):
            totals.update(_run_chunk(context, chunk))
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(context,)) as pool:
            results = pool.map(_run_chunk_in_worker, chunks)
            for counts in tqdm(results, total=len(chunks), desc="sweep", disable=not progress):
                totals.update(counts)

    cells = {}
    for (method, snr, m, kind), value in totals.items():
        entry = cells.setdefault((method, snr, m), [0, 0])
        entry[0 if kind == "trials" else 1] += value
    return ErrorCurve.from_counts({key: tuple(v) for key, v in cells.items()})
