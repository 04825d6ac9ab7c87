import numpy as np
import pytest

from lexibound.core import DedupProfile, ErrorMatrix, LossKind, RngStream, deduplicate


def dmatrix(rows) -> ErrorMatrix:
    """Discrete matrix from a nested list."""
    return ErrorMatrix(np.array(rows, dtype=np.float64), kind=LossKind.DISCRETE)


def rmatrix(rows) -> ErrorMatrix:
    """Real-valued matrix from a nested list."""
    return ErrorMatrix(np.array(rows, dtype=np.float64), kind=LossKind.REAL)


def profile(rows) -> DedupProfile:
    return deduplicate(dmatrix(rows))


@pytest.fixture
def dominated_profile():
    # row 2 attains the minimum on every case, so it always wins
    return profile([[0, 1], [1, 0], [0, 0]])


@pytest.fixture
def two_triangles():
    from lexibound.popgen import gen_two_cluster

    return deduplicate(gen_two_cluster(6, 10))


def random_rows(seed: int, n: int, c: int, levels: int) -> list[list[int]]:
    src = RngStream(seed).source()
    return [[src.randbelow(levels) for _ in range(c)] for _ in range(n)]
