"""
Module: blocksparse.py
Description:
    Block-partitioned complex linear algebra used by every detector:
    partitions, block-sparse signals, sensing matrices with cached whitening
    factors (A_i^H A_i)^(-1/2), whitened correlations, block mutual coherence,
    block singular values and least-squares refits.

    Block indices are 0-based everywhere in the Python API.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (
    ArtifactError,
    DegenerateBlockError,
    DimensionError,
    NonFiniteError,
    PartitionError,
    SignalError,
    SupportError,
)

logger = logging.getLogger(__name__)

# ==========================================
# CONFIGURATION
# ==========================================
DEFAULT_RANK_TOLERANCE = 1e-10   # relative eigenvalue floor for the pseudo square root
ZERO_TOLERANCE_SCALE = 1e-12     # "unused" threshold relative to the largest block norm


# ==========================================
# DOMAIN TYPES
# ==========================================

@dataclass(frozen=True)
class BlockPartition:
    """Contiguous split of a length-N vector into B blocks of sizes N_1..N_B."""

    total_len: int
    block_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "total_len", int(self.total_len))

        if len(sizes) < 2:
            raise PartitionError(f"need at least 2 blocks, got {len(sizes)}")
        if any(s < 1 for s in sizes):
            raise PartitionError(f"block sizes must be >= 1, got {sizes}")
        if sum(sizes) != self.total_len:
            raise PartitionError(
                f"block sizes sum to {sum(sizes)} but total_len is {self.total_len}"
            )

    @classmethod
    def uniform(cls, num_blocks, block_size):
        return cls(num_blocks * block_size, (block_size,) * num_blocks)

    @property
    def num_blocks(self):
        return len(self.block_sizes)

    @cached_property
    def block_offsets(self):
        return tuple(int(o) for o in np.concatenate(([0], np.cumsum(self.block_sizes))))

    @property
    def is_uniform(self):
        return len(set(self.block_sizes)) == 1

    def block_slice(self, i):
        self.check_index(i)
        return slice(self.block_offsets[i], self.block_offsets[i + 1])

    def check_index(self, i):
        if not 0 <= i < self.num_blocks:
            raise IndexError(f"block index {i} out of range [0, {self.num_blocks})")

    def split(self, vector):
        """Return the list of block views of a length-N vector."""
        return [vector[self.block_slice(i)] for i in range(self.num_blocks)]


@dataclass(frozen=True, eq=False)
class BlockSparseSignal:
    """
    Frequency-domain signal x with a block partition.
    A block is "used" when its l2-norm exceeds zero_tolerance; the default
    tolerance is 1e-12 times the largest block norm.
    """

    values: np.ndarray
    partition: BlockPartition
    zero_tolerance: float = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.ndim != 1 or values.shape[0] != self.partition.total_len:
            raise DimensionError(
                f"signal length {values.shape} does not match partition length "
                f"{self.partition.total_len}"
            )
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("signal contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        if self.zero_tolerance is None:
            tol = ZERO_TOLERANCE_SCALE * float(self.block_norms.max())
        else:
            tol = float(self.zero_tolerance)
            if tol < 0:
                raise SignalError(f"zero_tolerance must be >= 0, got {tol}")
        object.__setattr__(self, "zero_tolerance", tol)

    def block(self, i):
        return self.values[self.partition.block_slice(i)]

    @cached_property
    def block_norms(self):
        return np.array([np.linalg.norm(b) for b in self.partition.split(self.values)])

    @cached_property
    def used_set(self):
        return tuple(int(i) for i in np.flatnonzero(self.block_norms > self.zero_tolerance))

    @cached_property
    def unused_set(self):
        used = set(self.used_set)
        return tuple(i for i in range(self.partition.num_blocks) if i not in used)

    @property
    def sparsity(self):
        return len(self.used_set)


@dataclass(frozen=True)
class MeasurementVector:
    """Compressive measurements y; noise_norm is ||n||_2 when known (simulation)."""

    values: np.ndarray
    noise_norm: float = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.noise_norm is not None and self.noise_norm < 0:
            raise DimensionError(f"noise_norm must be >= 0, got {self.noise_norm}")

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SignalStats:
    used_norms: dict
    min_used_norm: float
    dynamic_ratio: float


class SensingMatrix:
    """
    Effective sensing matrix A (M x N) with a block partition of its columns.

    Whitening factors W_i = (A_i^H A_i)^(-1/2) are computed lazily and cached
    per block. Filling the cache twice gives the same arrays, so sharing an
    instance between threads is harmless.
    """

    def __init__(self, entries, partition, rank_tolerance=DEFAULT_RANK_TOLERANCE):
        entries = np.array(entries, dtype=np.complex128)
        if entries.ndim != 2 or entries.shape[0] < 1:
            raise DimensionError(f"sensing matrix must be 2-D with M >= 1, got {entries.shape}")
        if entries.shape[1] != partition.total_len:
            raise DimensionError(
                f"matrix has {entries.shape[1]} columns, partition expects {partition.total_len}"
            )
        if not np.all(np.isfinite(entries)):
            raise NonFiniteError("sensing matrix contains non-finite entries")
        if not 0 < rank_tolerance < 1:
            raise DimensionError(f"rank_tolerance must lie in (0, 1), got {rank_tolerance}")

        entries.setflags(write=False)
        self.entries = entries
        self.partition = partition
        self.rank_tolerance = float(rank_tolerance)
        self._whitening = {}

    def __repr__(self):
        return (f"SensingMatrix(M={self.num_rows}, N={self.partition.total_len}, "
                f"B={self.partition.num_blocks})")

    @property
    def num_rows(self):
        return self.entries.shape[0]

    @property
    def shape(self):
        return self.entries.shape

    def block(self, i):
        return self.entries[:, self.partition.block_slice(i)]

    def columns(self, support):
        """Concatenation A_Omega of the blocks listed in support, in that order."""
        return np.hstack([self.block(i) for i in support])

    def whitening(self, i):
        factor = self._whitening.get(i)
        if factor is None:
            factor = whitening_factor(self.block(i), self.rank_tolerance)
            self._whitening[i] = factor
        return factor

    @cached_property
    def whitened_adjoint(self):
        """Stacked rows W_i A_i^H (N x M); one product gives every lambda_i."""
        return np.vstack([self.whitening(i) @ self.block(i).conj().T
                          for i in range(self.partition.num_blocks)])

    @cached_property
    def gram(self):
        return self.entries.conj().T @ self.entries

    def correlations(self, r):
        """lambda_i = ||W_i A_i^H r||_2 for every block i."""
        r = as_vector(r)
        if r.shape[0] != self.num_rows:
            raise DimensionError(f"residual length {r.shape[0]} != M = {self.num_rows}")
        projected = self.whitened_adjoint @ r
        return np.array([np.linalg.norm(p) for p in self.partition.split(projected)])

    def scaled_block(self, i, factor):
        """Copy of this matrix with block i multiplied by a positive constant."""
        entries = np.array(self.entries)
        entries[:, self.partition.block_slice(i)] *= factor
        return SensingMatrix(entries, self.partition, self.rank_tolerance)


# ==========================================
# KERNELS
# ==========================================

def as_vector(y):
    if isinstance(y, MeasurementVector):
        return y.values
    return np.asarray(y, dtype=np.complex128).reshape(-1)


def _inverse_sqrt(gram, rank_tolerance):
    eigvals, eigvecs = scipy.linalg.eigh(gram)
    d_max = eigvals.max()
    inv_sqrt = np.zeros_like(eigvals)
    keep = eigvals > rank_tolerance * d_max
    inv_sqrt[keep] = 1.0 / np.sqrt(eigvals[keep])
    factor = (eigvecs * inv_sqrt) @ eigvecs.conj().T
    return 0.5 * (factor + factor.conj().T)


def _batched_inverse_sqrt(grams, rank_tolerance):
    # all-zero diagonal blocks map to a zero factor
    eigvals, eigvecs = np.linalg.eigh(grams)
    d_max = eigvals.max(axis=-1, keepdims=True)
    keep = (eigvals > rank_tolerance * d_max) & (d_max > 0)
    inv_sqrt = np.zeros_like(eigvals)
    inv_sqrt[keep] = 1.0 / np.sqrt(eigvals[keep])
    factors = (eigvecs * inv_sqrt[..., None, :]) @ np.conj(np.swapaxes(eigvecs, -1, -2))
    return 0.5 * (factors + np.conj(np.swapaxes(factors, -1, -2)))


def whitening_factor(block, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """
    Pseudo inverse square root W = (A_i^H A_i)^(-1/2) of one block.

    Eigenvalues of A_i^H A_i below rank_tolerance * d_max are treated as zero,
    so rank-deficient blocks (fewer rows than columns) still get a Hermitian
    PSD factor.

    Parameters:
        block (ndarray): complex M x N_i block.
        rank_tolerance (float): relative eigenvalue floor in (0, 1).

    Returns:
        ndarray: N_i x N_i Hermitian positive semidefinite matrix.
    """
    block = np.asarray(block, dtype=np.complex128)
    if block.size == 0:
        raise DimensionError("empty block")
    if not 0 < rank_tolerance < 1:
        raise DimensionError(f"rank_tolerance must lie in (0, 1), got {rank_tolerance}")
    if not np.all(np.isfinite(block)):
        raise NonFiniteError("block contains non-finite entries")
    if not np.any(block):
        raise DegenerateBlockError("degenerate block: all entries are zero")
    return _inverse_sqrt(block.conj().T @ block, rank_tolerance)


def block_correlation(A, i, r):
    """lambda_i = ||(A_i^H A_i)^(-1/2) A_i^H r||_2 using the cached factor."""
    A.partition.check_index(i)
    r = as_vector(r)
    if r.shape[0] != A.num_rows:
        raise DimensionError(f"residual length {r.shape[0]} != M = {A.num_rows}")
    return float(np.linalg.norm(A.whitening(i) @ (A.block(i).conj().T @ r)))


def coherence_from_gram(gram, partition, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """
    Block mutual coherence computed from the Gram matrix G = A^H A alone.

    W_i comes from the diagonal block G_ii and the cross term A_i^H A_j is
    G_ij, so mu_B = max_{i != j} ||W_i G_ij||_2 over ordered pairs. Blocks
    whose diagonal Gram block is all zero contribute nothing.
    """
    B = partition.num_blocks

    if partition.is_uniform:
        d = partition.block_sizes[0]
        tiles = gram.reshape(B, d, B, d).transpose(0, 2, 1, 3)
        factors = _batched_inverse_sqrt(tiles[np.arange(B), np.arange(B)], rank_tolerance)
        whitened = np.einsum("iab,ijbc->ijac", factors, tiles)
        norms = np.linalg.svd(whitened, compute_uv=False)[..., 0]
        norms[np.arange(B), np.arange(B)] = 0.0
        return float(norms.max())

    best = 0.0
    for i in range(B):
        rows = partition.block_slice(i)
        factor = _batched_inverse_sqrt(gram[rows, rows][None], rank_tolerance)[0]
        cross = factor @ gram[rows, :]
        for j in range(B):
            if j == i:
                continue
            best = max(best, float(np.linalg.norm(cross[:, partition.block_slice(j)], 2)))
    return best


def block_coherence(A):
    """
    mu_B = max over ordered pairs i != j of ||(A_i^H A_i)^(-1/2) A_i^H A_j||_2.

    The definition is not symmetric in (i, j), so both orders are scanned.
    Raises DegenerateBlockError when any block is all zero.
    """
    for i in range(A.partition.num_blocks):
        if not np.any(A.block(i)):
            raise DegenerateBlockError(f"degenerate block: block {i} is all zero")
    return coherence_from_gram(A.gram, A.partition, A.rank_tolerance)


def min_block_singular(A):
    """sigma_min = min_i sigma_min(A_i); zero for blocks wider than they are tall."""
    smallest = np.inf
    for i in range(A.partition.num_blocks):
        block = A.block(i)
        if block.shape[1] > block.shape[0]:
            return 0.0
        smallest = min(smallest, float(scipy.linalg.svdvals(block).min()))
    return smallest


def block_least_squares(A, support, y):
    """
    Minimum-norm least-squares fit x_hat = pinv(A_Omega) y over the blocks in
    support (order kept). Returns the stacked coefficient vector.
    """
    support = [int(i) for i in support]
    if not support:
        raise SupportError("empty support")
    if len(set(support)) != len(support):
        raise SupportError(f"support has repeated indices: {support}")
    for i in support:
        A.partition.check_index(i)

    y = as_vector(y)
    if y.shape[0] != A.num_rows:
        raise DimensionError(f"measurement length {y.shape[0]} != M = {A.num_rows}")

    coefficients, _, _, _ = scipy.linalg.lstsq(A.columns(support), y, lapack_driver="gelsd")
    return coefficients


def signal_stats(x):
    """Per-block norms over the used set, ||x_min||_2 and delta = sum ||x_j|| / ||x_min||."""
    used = x.used_set
    if not used:
        raise SignalError("no used blocks")
    used_norms = {i: float(x.block_norms[i]) for i in used}
    min_norm = min(used_norms.values())
    return SignalStats(
        used_norms=used_norms,
        min_used_norm=min_norm,
        dynamic_ratio=sum(used_norms.values()) / min_norm,
    )


# ==========================================
# MATRIX INTERCHANGE FILE
# ==========================================

def write_matrix(A, path):
    """
    Text format: "M N B", then the B block sizes, then M rows of 2N numbers
    (real and imaginary parts interleaved). %.17g keeps doubles exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    M, N = A.shape
    interleaved = np.empty((M, 2 * N))
    interleaved[:, 0::2] = A.entries.real
    interleaved[:, 1::2] = A.entries.imag
    header = f"{M} {N} {A.partition.num_blocks}\n" + " ".join(map(str, A.partition.block_sizes))
    np.savetxt(path, interleaved, fmt="%.17g", header=header, comments="")
    logger.debug("Wrote %dx%d matrix to %s", M, N, path)
    return path


def read_matrix(path, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"matrix file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            M, N, B = (int(v) for v in f.readline().split())
            sizes = tuple(int(v) for v in f.readline().split())
        interleaved = np.loadtxt(path, skiprows=2, ndmin=2)
    except ValueError as e:
        raise ArtifactError(f"{path}: malformed matrix file ({e})") from e
    if len(sizes) != B:
        raise ArtifactError(f"{path}: header announces {B} blocks but lists {len(sizes)} sizes")
    if interleaved.shape != (M, 2 * N):
        raise ArtifactError(f"{path}: expected {M}x{2 * N} numbers, found {interleaved.shape}")
    entries = interleaved[:, 0::2] + 1j * interleaved[:, 1::2]
    return SensingMatrix(entries, BlockPartition(N, sizes), rank_tolerance)
