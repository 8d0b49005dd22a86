"""
Module: config.py
Description:
    Experiment configuration.
    BenchmarkConfig is a frozen dataclass tree loaded from YAML. Missing keys
    take the defaults below (desk-scale setup: N=200, B=20, M in {50,100,150}),
    unknown keys are rejected, and `--set key=value` overrides are applied
    after the file is parsed.
"""

import math
import os
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Optional, Tuple, Union, get_args, get_origin, get_type_hints

import yaml

from .detectors import Method
from .errors import ConfigError, SupportError, ValidationError
from .nuws import DEFAULT_CAP, DEFAULT_HALFPERIOD_SET, DEFAULT_RHO_SET, DEFAULT_TAU_STEP
from .rfsim import SNR_MODES, ChannelPlan, LinkBudget, NoiseSpec

# ==========================================
# CONFIGURATION
# ==========================================
CONFIG_DIR_ENV = "WHITESPACE_CONFIG_DIR"
DEFAULT_CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"
DEFAULT_CONFIG_NAME = "default"


@dataclass(frozen=True)
class DictionaryGrid:
    tau_step: int = DEFAULT_TAU_STEP
    rho_set: tuple = DEFAULT_RHO_SET
    halfperiod_set: tuple = DEFAULT_HALFPERIOD_SET
    cap: int = DEFAULT_CAP


@dataclass(frozen=True)
class SelectionConfig:
    candidates_per_step: int = 256
    random_baseline_trials: int = 50


@dataclass(frozen=True)
class BandConfig:
    start_hz: float = 2.4e9
    stop_hz: float = 2.5e9


@dataclass(frozen=True)
class NoiseConfig:
    temperature_k: float = 290.0
    noise_figure_db: float = 5.0
    tx_noise_db: Optional[float] = 25.0  # None = ideal transmitters


@dataclass(frozen=True)
class ArtifactPaths:
    output_dir: str = "data/output"
    dictionary_file: str = "dictionary.txt"
    selection_file: str = "selection_M{m}.txt"
    matrix_file: str = "matrix_M{m}.txt"
    trajectory_file: str = "coherence_M{m}.csv"
    results_file: str = "results.csv"
    plot_file: str = "error_curves.svg"

    def _path(self, name):
        return Path(self.output_dir) / name

    def dictionary_path(self):
        return self._path(self.dictionary_file)

    def selection_path(self, m):
        return self._path(self.selection_file.format(m=m))

    def matrix_path(self, m):
        return self._path(self.matrix_file.format(m=m))

    def trajectory_path(self, m):
        return self._path(self.trajectory_file.format(m=m))

    def results_path(self):
        return self._path(self.results_file)

    def plot_path(self):
        return self._path(self.plot_file)


@dataclass(frozen=True)
class BenchmarkConfig:
    n: int = 200
    b: int = 20
    m_values: tuple = (50, 100, 150)
    p: int = 4
    bomp_k: int = None
    k_max: int = 5
    snr_grid_db: tuple = (0, 5, 10, 15, 20, 30)
    trials_per_cell: int = 2000
    seed: int = 1
    methods: tuple = tuple(m.value for m in Method)
    snr_mode: str = "target_snr"
    workers: int = 1
    distance_range_m: Tuple[float, float] = (1.0, 280.0)
    band: BandConfig = field(default_factory=BandConfig)
    dictionary: DictionaryGrid = field(default_factory=DictionaryGrid)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    link_budget: LinkBudget = field(default_factory=LinkBudget)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    artifacts: ArtifactPaths = field(default_factory=ArtifactPaths)

    @classmethod
    def from_dict(cls, data):
        return _build(cls, data, "")

    def to_dict(self):
        return _unbuild(self)

    @property
    def resolved_bomp_k(self):
        return self.b - 1 if self.bomp_k is None else self.bomp_k

    def channel_plan(self):
        return ChannelPlan(self.b, self.n // self.b, self.band.start_hz, self.band.stop_hz)

    def noise_spec(self):
        return NoiseSpec(self.noise.temperature_k, self.noise.noise_figure_db, self.snr_mode,
                         self.noise.tx_noise_db)

    def validate(self):
        """Semantic checks; raises ValidationError on the first violation."""
        _expect_int(self, "n", "b", "p", "k_max", "trials_per_cell", "seed", "workers")
        if self.b < 2 or self.n % self.b != 0:
            raise ValidationError(f"n={self.n} must split into b={self.b} >= 2 equal channels")
        if not self.m_values:
            raise ValidationError("m_values is empty")
        for m in self.m_values:
            if not isinstance(m, int) or not 1 <= m <= self.n:
                raise ValidationError(f"every M must be an integer in [1, n={self.n}], got {m}")
        if len(set(self.m_values)) != len(self.m_values):
            raise ValidationError(f"m_values has duplicates: {list(self.m_values)}")
        if not 1 <= self.p <= self.b - 1:
            raise ValidationError(f"p must lie in [1, b-1={self.b - 1}], got {self.p}")
        if not 1 <= self.resolved_bomp_k <= self.b - 1:
            raise ValidationError(f"bomp_k must lie in [1, b-1={self.b - 1}], got {self.bomp_k}")
        if not 1 <= self.k_max <= self.b:
            raise ValidationError(f"k_max must lie in [1, b={self.b}], got {self.k_max}")
        if not self.snr_grid_db:
            raise ValidationError("snr_grid_db is empty")
        if any(not isinstance(s, (int, float)) for s in self.snr_grid_db):
            raise ValidationError(f"snr_grid_db must hold numbers, got {list(self.snr_grid_db)}")
        if self.trials_per_cell < 1 or self.workers < 1:
            raise ValidationError("trials_per_cell and workers must be >= 1")
        if not self.methods:
            raise ValidationError("methods is empty")
        for name in self.methods:
            try:
                Method.parse(name)
            except SupportError as e:
                raise ValidationError(str(e)) from None
        if self.snr_mode not in SNR_MODES:
            raise ValidationError(f"snr_mode must be one of {SNR_MODES}, got '{self.snr_mode}'")

        low, high = self.distance_range_m
        if not self.link_budget.reference_distance_m <= low <= high:
            raise ValidationError(
                f"distance range {list(self.distance_range_m)} must start at or above "
                f"the reference distance {self.link_budget.reference_distance_m} m"
            )
        if self.band.start_hz <= 0 or self.band.stop_hz <= self.band.start_hz:
            raise ValidationError("band.stop_hz must exceed band.start_hz > 0")
        if self.link_budget.reference_distance_m <= 0 or self.link_budget.path_loss_exponent <= 0:
            raise ValidationError("link_budget.reference_distance_m and path_loss_exponent must be > 0")
        if self.noise.temperature_k <= 0:
            raise ValidationError(f"noise.temperature_k must be > 0, got {self.noise.temperature_k}")
        if self.noise.tx_noise_db is not None and self.noise.tx_noise_db <= 0:
            raise ValidationError(f"noise.tx_noise_db must be > 0 or null, got {self.noise.tx_noise_db}")
        if self.dictionary.tau_step < 1 or (self.dictionary.cap is not None and self.dictionary.cap < 1):
            raise ValidationError("dictionary.tau_step and dictionary.cap must be >= 1")
        candidates = self.selection.candidates_per_step
        if candidates is not None and candidates < 1:
            raise ValidationError(f"selection.candidates_per_step must be >= 1 or null, got {candidates}")
        return self


def _expect_int(config, *names):
    for name in names:
        value = getattr(config, name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{name} must be an integer, got {value!r}")


def _float_field(hint):
    return hint is float or (get_origin(hint) is Union and float in get_args(hint))


def _float_tuple_field(hint):
    return get_origin(hint) is tuple and get_args(hint) and all(a is float for a in get_args(hint))


def _to_float(value, key, nullable=False):
    """Numbers and numeric strings (YAML reads 2.4e9 as a string) become floats."""
    if value is None and nullable:
        return None
    if not isinstance(value, bool) and isinstance(value, (int, float, str)):
        try:
            number = float(value)
        except ValueError:
            pass
        else:
            if math.isfinite(number):
                return number
    raise ValidationError(f"{key} must be a finite number, got {value!r}")


def _build(cls, data, where):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section '{where.rstrip('.') or '<root>'}' must be a mapping")

    hints = get_type_hints(cls)
    defaults = {f.name: f.default for f in fields(cls)}
    known = set(defaults)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(where + str(k) for k in unknown)}")

    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if is_dataclass(hint):
            kwargs[name] = _build(hint, value, f"{where}{name}.")
        elif _float_field(hint):
            kwargs[name] = _to_float(value, where + name,
                                      nullable=defaults[name] is None or type(None) in get_args(hint))
        elif _float_tuple_field(hint):
            arity = len(get_args(hint))
            if not isinstance(value, (list, tuple)) or len(value) != arity:
                raise ValidationError(f"{where}{name} must be a list of {arity} numbers, got {value!r}")
            kwargs[name] = tuple(_to_float(v, where + name) for v in value)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ValidationError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"section '{where.rstrip('.') or '<root>'}': {e}") from e


def _unbuild(obj):
    out = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if is_dataclass(value):
            out[f.name] = _unbuild(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out


# ==========================================
# LOADING
# ==========================================

def config_dir():
    return Path(os.environ.get(CONFIG_DIR_ENV, DEFAULT_CONFIG_DIR))


def resolve_config_path(name_or_path):
    """A bare name like 'default' maps to <config dir>/default.yaml; anything else is a path."""
    candidate = Path(name_or_path)
    if candidate.suffix in (".yaml", ".yml") or len(candidate.parts) > 1:
        return candidate
    return config_dir() / f"{name_or_path}.yaml"


def apply_override(data, assignment):
    """Apply one 'dotted.key=value' override to a raw config mapping (value parsed as YAML)."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"override '{assignment}': cannot parse value ({e})") from e

    parts = key.strip().split(".")
    node = data
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override '{assignment}': '{part}' is not a section")
        node = child
    node[parts[-1]] = value
    return data


def read_config_file(path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config '{path}': {e.strerror or e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config '{path}': {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config '{path}' must be a mapping at the top level")
    return data


def load_config(name_or_path=DEFAULT_CONFIG_NAME, overrides=(), seed=None):
    """
    Read a YAML config, apply `--set` overrides and an optional seed, then validate.

    Parameters:
        name_or_path (str or Path): config name in the config directory, or a file path.
        overrides (iterable of str): 'dotted.key=value' assignments.
        seed (int, optional): replaces the config seed.

    Returns:
        BenchmarkConfig
    """
    data = read_config_file(resolve_config_path(name_or_path))
    for assignment in overrides:
        apply_override(data, assignment)
    if seed is not None:
        data["seed"] = seed
    return BenchmarkConfig.from_dict(data).validate()


def dump_config(config):
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)
