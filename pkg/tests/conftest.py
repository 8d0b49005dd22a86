import numpy as np
import pytest

from whitespace_modules.blocksparse import BlockPartition, BlockSparseSignal, SensingMatrix


def complex_gaussian(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_matrix(rng, M, B, d):
    partition = BlockPartition.uniform(B, d)
    return SensingMatrix(complex_gaussian(rng, M, B * d), partition)


def orthonormal_block_matrix(rng, M, B, d):
    """Every block has orthonormal columns; blocks are not orthogonal to each other."""
    blocks = [np.linalg.qr(complex_gaussian(rng, M, d))[0] for _ in range(B)]
    return SensingMatrix(np.hstack(blocks), BlockPartition.uniform(B, d))


def block_sparse(rng, partition, used, norms=None):
    """Signal with random block directions on `used`, scaled to the given block norms."""
    values = np.zeros(partition.total_len, dtype=np.complex128)
    norms = np.ones(len(used)) if norms is None else norms
    for block, norm in zip(used, norms):
        s = partition.block_slice(block)
        v = complex_gaussian(rng, s.stop - s.start)
        values[s] = norm * v / np.linalg.norm(v)
    return BlockSparseSignal(values, partition)


def random_instance(rng):
    """
    Mixed-size instance (A, x, n) with at least one used and one unused block,
    a dynamic range of up to 30 dB between used blocks and optional noise.
    """
    B = int(rng.integers(2, 9))
    d = int(rng.integers(1, 5))
    M = int(rng.integers(max(d, 4), 121))
    A = random_matrix(rng, M, B, d)

    K = int(rng.integers(1, B))
    used = np.sort(rng.choice(B, size=K, replace=False))
    norms = 10.0 ** (rng.uniform(0.0, 1.5, size=K))
    x = block_sparse(rng, A.partition, used, norms)

    noise_scale = rng.choice([0.0, 1e-3, 1e-1, 1.0])
    n = noise_scale * complex_gaussian(rng, M)
    return A, x, n


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def identity_matrix():
    """A = I_12 with 4 blocks of 3: mutually orthogonal blocks, mu_B = 0."""
    return SensingMatrix(np.eye(12), BlockPartition.uniform(4, 3))


def iter_corpus(count=10_000, seed=7):
    """Seeded stream of random instances shared by the guarantee and bound checks."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield random_instance(rng)
