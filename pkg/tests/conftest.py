import numpy as np
import pytest


def random_spd(rng: np.random.Generator, n: int, cond: float = 100.0) -> np.ndarray:
    """SPD matrix with a controlled spectrum."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = np.geomspace(1.0, cond, n)
    return q @ np.diag(lam) @ q.T


def det_cofactor(m: np.ndarray) -> float:
    """Brute-force determinant by cofactor expansion (independent oracle)."""
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(m, 0, axis=0), j, axis=1)
        total += (-1.0) ** j * m[0, j] * det_cofactor(minor)
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
