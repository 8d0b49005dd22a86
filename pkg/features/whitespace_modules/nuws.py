"""
Module: nuws.py
Description:
    Non-uniform wavelet sampling (NUWS) sensing matrices.
    1. Haar-like {-1, 0, +1} wavelet rows w(tau, rho, h) and an overcomplete
       dictionary built from a grid of them.
    2. The effective matrix A = Theta Psi^-1 seen by the frequency-domain
       signal (Psi = unitary DFT).
    3. Greedy row selection that keeps the block mutual coherence low.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft
from tqdm import tqdm

from .blocksparse import DEFAULT_RANK_TOLERANCE, SensingMatrix, coherence_from_gram
from .errors import ArtifactError, DimensionError, SupportError, ValidationError

logger = logging.getLogger(__name__)

# ==========================================
# CONFIGURATION (defaults for N = 200)
# ==========================================
DEFAULT_TAU_STEP = 2
DEFAULT_RHO_SET = (25, 50, 100, 200)
DEFAULT_HALFPERIOD_SET = (1, 2, 4, 5, 10, 20, 25, 50)
DEFAULT_CAP = 4000


@dataclass(frozen=True)
class WaveletParams:
    """Window start tau, window width rho, and square-wave half-period h (samples)."""

    tau: int
    rho: int
    half_period: int

    def validate(self, N):
        if not 0 <= self.tau < N:
            raise ValidationError(f"tau={self.tau} outside [0, {N})")
        if not 1 <= self.rho <= N - self.tau:
            raise ValidationError(f"rho={self.rho} outside [1, {N - self.tau}] for tau={self.tau}")
        if self.half_period < 1:
            raise ValidationError(f"half_period must be >= 1, got {self.half_period}")

    @property
    def frequency(self):
        """Oscillation frequency in units of the Nyquist rate."""
        return 1.0 / (2 * self.half_period)


@dataclass(frozen=True, eq=False)
class WaveletDictionary:
    rows: np.ndarray
    params: tuple
    N: int

    def __len__(self):
        return len(self.params)

    @property
    def L(self):
        return len(self.params)


@dataclass(frozen=True, eq=False)
class SelectionResult:
    chosen: tuple
    matrix: SensingMatrix
    coherence_trajectory: tuple

    @property
    def final_coherence(self):
        return self.coherence_trajectory[-1]


def haar_wavelet(p, N):
    """
    Square wave of half-period h, windowed to [tau, tau + rho).
    Inside the window w[n] = +1 when floor((n - tau) / h) is even, else -1.
    """
    p.validate(N)
    row = np.zeros(N, dtype=np.int8)
    offsets = np.arange(p.rho)
    row[p.tau:p.tau + p.rho] = np.where((offsets // p.half_period) % 2 == 0, 1, -1)
    return row


def build_dictionary(N, tau_step=DEFAULT_TAU_STEP, rho_set=DEFAULT_RHO_SET,
                     halfperiod_set=DEFAULT_HALFPERIOD_SET, cap=None):
    """
    Enumerate the (rho, h, tau) grid in lexicographic order, drop windows that
    run past N and rows identical to an earlier one, then keep the first
    `cap` rows.

    Parameters:
        N (int): signal length (Nyquist samples).
        tau_step (int): spacing of window start positions.
        rho_set (iterable): window widths.
        halfperiod_set (iterable): square-wave half-periods.
        cap (int, optional): maximum number of rows.

    Returns:
        WaveletDictionary
    """
    if N < 1 or tau_step < 1:
        raise ValidationError(f"need N >= 1 and tau_step >= 1, got N={N}, tau_step={tau_step}")
    for rho in rho_set:
        if not 1 <= rho <= N:
            raise ValidationError(f"window width {rho} outside [1, {N}]")
    for h in halfperiod_set:
        if h < 1:
            raise ValidationError(f"half-period must be >= 1, got {h}")

    rows, params, seen = [], [], set()
    grid_size = 0
    for rho in sorted(set(rho_set)):
        for h in sorted(set(halfperiod_set)):
            for tau in range(0, N, tau_step):
                if tau + rho > N:
                    continue
                grid_size += 1
                p = WaveletParams(tau, rho, h)
                row = haar_wavelet(p, N)
                key = row.tobytes()
                if key in seen:
                    continue
                seen.add(key)
                rows.append(row)
                params.append(p)

    if not rows:
        raise ValidationError("empty wavelet grid: no window fits inside N samples")

    if cap is not None and len(rows) > cap:
        rows, params = rows[:cap], params[:cap]

    logger.info("Wavelet dictionary: %d distinct rows from a grid of %d (N=%d)",
                len(rows), grid_size, N)
    return WaveletDictionary(np.vstack(rows), tuple(params), N)


def effective_matrix(rows, N, partition, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """A = Theta Psi^-1, i.e. a unitary inverse DFT applied to every row of Theta."""
    rows = np.atleast_2d(np.asarray(rows))
    if rows.shape[1] != N or partition.total_len != N:
        raise DimensionError(
            f"rows have {rows.shape[1]} columns, expected N={N} (partition {partition.total_len})"
        )
    entries = scipy.fft.ifft(rows.astype(np.complex128), axis=1, norm="ortho")
    return SensingMatrix(entries, partition, rank_tolerance)


def greedy_select(dictionary, partition, M, candidates_per_step=None, seed=0,
                  rank_tolerance=DEFAULT_RANK_TOLERANCE, progress=False):
    """
    Pick M dictionary rows one at a time, each time keeping the candidate that
    gives the lowest block mutual coherence for the rows chosen so far.

    mu_B is evaluated on the full B-block partition with the pseudo inverse
    square root, since blocks stay rank deficient while fewer than N_i rows
    are chosen. The Gram matrix A^H A is updated by one rank-one term per
    candidate. With candidates_per_step set, each step scores a seeded
    uniform subset of the remaining rows. Ties go to the lowest row index.
    """
    L = len(dictionary)
    if not 1 <= M <= L:
        raise SupportError(f"M must lie in [1, {L}], got {M}")
    N = dictionary.N
    if partition.total_len != N:
        raise DimensionError(f"partition length {partition.total_len} != dictionary N={N}")

    effective_rows = scipy.fft.ifft(dictionary.rows.astype(np.complex128), axis=1, norm="ortho")
    rng = np.random.default_rng(seed)
    available = np.ones(L, dtype=bool)
    gram = np.zeros((N, N), dtype=np.complex128)
    chosen, trajectory = [], []

    steps = tqdm(range(M), desc=f"greedy M={M}", disable=not progress)
    for _ in steps:
        candidates = np.flatnonzero(available)
        if candidates_per_step is not None and candidates_per_step < candidates.size:
            candidates = np.sort(rng.choice(candidates, size=candidates_per_step, replace=False))

        best_index, best_mu = -1, np.inf
        for c in candidates:
            row = effective_rows[c]
            mu = coherence_from_gram(gram + np.outer(row.conj(), row), partition, rank_tolerance)
            if mu < best_mu:
                best_index, best_mu = int(c), mu

        row = effective_rows[best_index]
        gram += np.outer(row.conj(), row)
        available[best_index] = False
        chosen.append(best_index)
        trajectory.append(best_mu)

    logger.info("Greedy selection M=%d: final block coherence %.4f", M, trajectory[-1])
    matrix = effective_matrix(dictionary.rows[chosen], N, partition, rank_tolerance)
    return SelectionResult(tuple(chosen), matrix, tuple(trajectory))


def random_subset_coherence(dictionary, partition, M, trials=50, seed=0,
                            rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """mu_B of `trials` uniformly random M-row subsets (baseline for greedy_select)."""
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(trials):
        subset = np.sort(rng.choice(len(dictionary), size=M, replace=False))
        A = effective_matrix(dictionary.rows[subset], dictionary.N, partition, rank_tolerance)
        values.append(coherence_from_gram(A.gram, partition, rank_tolerance))
    return np.array(values)


# ==========================================
# DICTIONARY / SELECTION FILES
# ==========================================

def write_dictionary(dictionary, path):
    """Header "L N", then one "tau rho half_period" line per row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(dictionary)} {dictionary.N}\n")
        for p in dictionary.params:
            f.write(f"{p.tau} {p.rho} {p.half_period}\n")
    return path


def read_dictionary(path):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"dictionary file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.split() for line in f if line.strip()]
    try:
        L, N = (int(v) for v in lines[0])
        params = tuple(WaveletParams(*(int(v) for v in parts)) for parts in lines[1:])
    except (ValueError, TypeError, IndexError) as e:
        raise ArtifactError(f"{path}: malformed dictionary file ({e})") from e
    if len(params) != L:
        raise ArtifactError(f"{path}: header announces {L} rows, found {len(params)}")
    try:
        rows = np.vstack([haar_wavelet(p, N) for p in params])
    except ValidationError as e:
        raise ArtifactError(f"{path}: row does not fit N={N} ({e})") from e
    return WaveletDictionary(rows, params, N)


def write_selection(chosen, path):
    """Header "M", then one dictionary row index per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(chosen)}\n")
        for index in chosen:
            f.write(f"{index}\n")
    return path


def read_selection(path):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"selection file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        values = [line.strip() for line in f if line.strip()]
    try:
        M = int(values[0])
        chosen = tuple(int(v) for v in values[1:])
    except (ValueError, IndexError) as e:
        raise ArtifactError(f"{path}: malformed selection file ({e})") from e
    if len(chosen) != M or len(set(chosen)) != M:
        raise ArtifactError(f"{path}: expected {M} distinct indices, found {len(chosen)}")
    return chosen
