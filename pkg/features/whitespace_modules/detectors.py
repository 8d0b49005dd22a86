"""
Module: detectors.py
Description:
    Whitespace detectors working on compressive measurements y = A x + n:
    BOMP (block orthogonal matching pursuit), ZD-GroTh (least correlated
    block), LMP (least matching pursuit), BOMP elimination, and the two
    baselines (Nyquist minimum power, random guess). Also the sufficient
    condition for ZD-GroTh and the two correlation bounds behind it.

    Ties are broken towards the lowest block index everywhere.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .blocksparse import (
    as_vector,
    block_coherence,
    block_least_squares,
    min_block_singular,
    signal_stats,
)
from .errors import DimensionError, SignalError, SupportError

logger = logging.getLogger(__name__)

# ==========================================
# CONFIGURATION
# ==========================================
DEFAULT_LMP_DEPTH = 4
EARLY_STOP_RATIO = 1e-12


class Method(str, Enum):
    ZD_GROTH = "zd-groth"
    LMP = "lmp"
    LMP_RESIDUAL = "lmp-residual"
    BOMP_ELIMINATION = "bomp-elim"
    NYQUIST = "nyquist"
    RANDOM = "random"

    @classmethod
    def parse(cls, name):
        try:
            return cls(name)
        except ValueError:
            known = ", ".join(m.value for m in cls)
            raise SupportError(f"unknown method '{name}' (known: {known})") from None


# ==========================================
# RESULT TYPES
# ==========================================

@dataclass(frozen=True, eq=False)
class BompTrace:
    """
    Full history of one BOMP run.

    support_sequence[t] is the block picked at iteration t+1.
    correlation_history[t, i] is lambda_i computed on the residual entering
    iteration t+1. residual_norms starts with ||y||_2 and then holds the norm
    after every refit; residuals holds the matching residual vectors.
    """

    support_sequence: tuple
    correlation_history: np.ndarray
    final_estimate: np.ndarray
    residual_norms: tuple
    residuals: np.ndarray

    @property
    def iterations(self):
        return len(self.support_sequence)

    @property
    def final_residual(self):
        return self.residuals[-1]


@dataclass(frozen=True, eq=False)
class Detection:
    declared_unused: int
    method: Method
    scores: np.ndarray = None
    trace: BompTrace = None


@dataclass(frozen=True)
class GuaranteeReport:
    lhs: float
    rhs: float
    holds: bool
    mu_b: float
    sigma_min: float
    min_used_norm: float
    noise_norm: float


@dataclass(frozen=True)
class BoundReport:
    """Exact whitened correlations of y against the two bounds used in the proof."""

    actual_unused_min: float
    actual_used_min: float
    unused_upper_bound: float
    used_lower_bound: float

    @property
    def sufficient(self):
        return self.actual_unused_min < self.actual_used_min


def _argmin_lowest(values, allowed=None):
    values = np.asarray(values, dtype=float)
    if allowed is not None:
        values = np.where(allowed, values, np.inf)
    return int(np.argmin(values))


# ==========================================
# BOMP
# ==========================================

def bomp(A, y, iterations, early_stop=False):
    """
    Block orthogonal matching pursuit with the whitened correlation criterion.

    Each iteration computes lambda_i = ||W_i A_i^H r||_2 for every block,
    picks the largest among blocks not yet selected, refits y by least
    squares over the whole support and updates the residual.

    Parameters:
        A (SensingMatrix): effective sensing matrix.
        y (MeasurementVector or array): measurements.
        iterations (int): number of blocks to select, 1..B.
        early_stop (bool): stop once ||r|| < 1e-12 ||y||.

    Returns:
        BompTrace
    """
    B = A.partition.num_blocks
    if not 1 <= iterations <= B:
        raise SupportError(f"iterations must lie in [1, {B}], got {iterations}")

    y = as_vector(y)
    if y.shape[0] != A.num_rows:
        raise DimensionError(f"measurement length {y.shape[0]} != M = {A.num_rows}")

    y_norm = float(np.linalg.norm(y))
    residual = y.copy()
    support = []
    selected = np.zeros(B, dtype=bool)
    history, norms, residuals = [], [y_norm], []
    estimate = np.zeros(0, dtype=np.complex128)

    for _ in range(iterations):
        lam = A.correlations(residual)
        history.append(lam)

        choice = int(np.argmax(np.where(selected, -np.inf, lam)))
        support.append(choice)
        selected[choice] = True

        estimate = block_least_squares(A, support, y)
        residual = y - A.columns(support) @ estimate
        norms.append(float(np.linalg.norm(residual)))
        residuals.append(residual)

        if early_stop and norms[-1] < EARLY_STOP_RATIO * y_norm:
            logger.debug("BOMP stopped early after %d iterations", len(support))
            break

    return BompTrace(
        support_sequence=tuple(support),
        correlation_history=np.array(history),
        final_estimate=estimate,
        residual_norms=tuple(norms),
        residuals=np.array(residuals),
    )


# ==========================================
# DETECTORS
# ==========================================

def zd_groth(A, y):
    """Declare unused the block least correlated with y."""
    scores = A.correlations(y)
    return Detection(_argmin_lowest(scores), Method.ZD_GROTH, scores=scores)


def lmp(A, y, P=DEFAULT_LMP_DEPTH, criterion="cumulative"):
    """
    Least matching pursuit.

    BOMP runs for P iterations to strip the strongest blocks. Among the blocks
    it did not select, the declared one minimises the sum of its correlations
    over those P iterations (criterion="cumulative"), or its correlation with
    the final residual (criterion="residual"). Selected blocks get a score of
    +inf.
    """
    B = A.partition.num_blocks
    if not 1 <= P <= B - 1:
        raise SupportError(f"LMP depth P must lie in [1, {B - 1}], got {P}")

    trace = bomp(A, y, P)
    remaining = np.ones(B, dtype=bool)
    remaining[list(trace.support_sequence)] = False

    if criterion == "cumulative":
        raw = trace.correlation_history.sum(axis=0)
        method = Method.LMP
    elif criterion == "residual":
        raw = A.correlations(trace.final_residual)
        method = Method.LMP_RESIDUAL
    else:
        raise SupportError(f"unknown LMP criterion '{criterion}'")

    scores = np.where(remaining, raw, np.inf)
    return Detection(_argmin_lowest(scores), method, scores=scores, trace=trace)


def bomp_elimination(A, y, iterations=None):
    """
    Run BOMP for B-1 iterations and declare the block left over.

    With a smaller budget several blocks remain; the one least correlated
    with the final residual is declared. Scores count how many iterations
    were still to come when a block was selected (0 = never selected).
    """
    B = A.partition.num_blocks
    iterations = B - 1 if iterations is None else iterations
    if not 1 <= iterations <= B - 1:
        raise SupportError(f"elimination iterations must lie in [1, {B - 1}], got {iterations}")

    trace = bomp(A, y, iterations)
    scores = np.zeros(B)
    for t, block in enumerate(trace.support_sequence):
        scores[block] = iterations - t

    leftover = scores == 0
    if leftover.sum() == 1:
        declared = int(np.flatnonzero(leftover)[0])
    else:
        declared = _argmin_lowest(A.correlations(trace.final_residual), allowed=leftover)
    return Detection(declared, Method.BOMP_ELIMINATION, scores=scores, trace=trace)


def nyquist_min_power(x_full, partition):
    """Baseline on the full DFT-domain signal: the block with least energy."""
    x_full = np.asarray(x_full, dtype=np.complex128).reshape(-1)
    if x_full.shape[0] != partition.total_len:
        raise DimensionError(
            f"spectrum length {x_full.shape[0]} != partition length {partition.total_len}"
        )
    scores = np.array([np.linalg.norm(b) for b in partition.split(x_full)])
    return Detection(_argmin_lowest(scores), Method.NYQUIST, scores=scores)


def random_unused(rng, B):
    """Uniform guess over the B blocks, drawn from the caller's stream."""
    if B < 1:
        raise SupportError(f"B must be >= 1, got {B}")
    return Detection(int(rng.integers(B)), Method.RANDOM)


# ==========================================
# GUARANTEES
# ==========================================

def _check_mixed_support(x):
    if not x.used_set:
        raise SignalError("no used blocks")
    if not x.unused_set:
        raise SignalError("no unused blocks")


def check_zd_guarantee(A, x, noise_norm):
    """
    Sufficient condition for ZD-GroTh to return an unused block:

        delta < (1/2)(sigma_min / mu_B + 1) - ||n|| / (mu_B ||x_min||)

    With mu_B == 0 the blocks do not leak into each other and the condition
    is taken to hold (rhs reported as +inf).

    Parameters:
        A (SensingMatrix): sensing matrix.
        x (BlockSparseSignal): generating signal, needs used and unused blocks.
        noise_norm (float): ||n||_2.

    Returns:
        GuaranteeReport
    """
    _check_mixed_support(x)
    if noise_norm < 0:
        raise SignalError(f"noise_norm must be >= 0, got {noise_norm}")

    stats = signal_stats(x)
    mu_b = block_coherence(A)
    sigma_min = min_block_singular(A)

    if mu_b == 0.0:
        rhs = np.inf
    else:
        rhs = 0.5 * (sigma_min / mu_b + 1.0) - noise_norm / (mu_b * stats.min_used_norm)

    lhs = stats.dynamic_ratio
    return GuaranteeReport(
        lhs=float(lhs),
        rhs=float(rhs),
        holds=bool(lhs < rhs),
        mu_b=mu_b,
        sigma_min=sigma_min,
        min_used_norm=stats.min_used_norm,
        noise_norm=float(noise_norm),
    )


def zd_bound_report(A, x, noise=None):
    """
    Compare the exact minimum correlations over unused and used blocks with
    their upper/lower bounds. noise is the realised vector n (zeros if None).
    The lower bound may be negative.
    """
    _check_mixed_support(x)
    if x.partition != A.partition:
        raise DimensionError("signal and sensing matrix use different partitions")

    noise = np.zeros(A.num_rows, dtype=np.complex128) if noise is None else as_vector(noise)
    if noise.shape[0] != A.num_rows:
        raise DimensionError(f"noise length {noise.shape[0]} != M = {A.num_rows}")

    y = A.entries @ x.values + noise
    lam = A.correlations(y)
    stats = signal_stats(x)
    mu_b = block_coherence(A)
    sigma_min = min_block_singular(A)
    used_sum = sum(stats.used_norms.values())
    noise_norm = float(np.linalg.norm(noise))

    return BoundReport(
        actual_unused_min=float(lam[list(x.unused_set)].min()),
        actual_used_min=float(lam[list(x.used_set)].min()),
        unused_upper_bound=mu_b * used_sum + noise_norm,
        used_lower_bound=(sigma_min * stats.min_used_norm - mu_b * used_sum
                          + mu_b * stats.min_used_norm - noise_norm),
    )


def bomp_recovery_condition(mu_b, k):
    """Classical block-OMP exact recovery threshold K < (1/2)(1/mu_B + 1)."""
    if mu_b == 0.0:
        return True
    return k < 0.5 * (1.0 / mu_b + 1.0)
