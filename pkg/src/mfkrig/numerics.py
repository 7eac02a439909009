"""SPD linear algebra: Cholesky factorization with jitter escalation, solves, log-determinants.

All likelihood and prediction code consumes :class:`SpdFactorization` objects
instead of explicit inverses.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .exceptions import DimensionMismatch, NotPositiveDefinite, NotSymmetric

# Jitter multipliers applied to mean(diag(M)) when the bare factorization fails.
JITTER_SCHEDULE = (1e-10, 1e-8, 1e-6)

SYMMETRY_RTOL = 1e-9

# Active recorders of factorized-matrix dimensions, see track_factorization_sizes().
_size_recorders: list[list[int]] = []


@dataclass(frozen=True)
class SpdFactorization:
    """Lower-triangular Cholesky factor of (M + jitter_used * I)."""

    lower_factor: np.ndarray
    jitter_used: float

    @property
    def n(self) -> int:
        return self.lower_factor.shape[0]


@contextmanager
def track_factorization_sizes():
    """Record the dimension of every matrix factorized inside the block.

    Used to assert structurally that no joint (N_L + N_H)-sized covariance is
    ever formed during a multi-fidelity fit.
    """
    sizes: list[int] = []
    _size_recorders.append(sizes)
    try:
        yield sizes
    finally:
        _size_recorders.remove(sizes)


def chol_factor(m: np.ndarray, jitter_schedule=JITTER_SCHEDULE) -> SpdFactorization:
    """Cholesky-factorize a symmetric matrix, escalating diagonal jitter on failure.

    Raises NotSymmetric if the symmetric mismatch exceeds the relative
    tolerance, and NotPositiveDefinite if every jitter level fails.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")

    for sizes in _size_recorders:
        sizes.append(m.shape[0])

    mean_diag = float(np.mean(np.diag(m))) if m.shape[0] else 0.0
    for level in (0.0, *jitter_schedule):
        jitter = level * mean_diag
        try:
            lower = np.linalg.cholesky(
                m if jitter == 0.0 else m + jitter * np.eye(m.shape[0])
            )
        except np.linalg.LinAlgError:
            continue
        return SpdFactorization(lower_factor=lower, jitter_used=jitter)
    raise NotPositiveDefinite(
        "matrix is not positive definite even after jitter escalation"
    )


def solve_spd(f: SpdFactorization, b: np.ndarray) -> np.ndarray:
    """Solve (M + jitter_used * I) X = B using the cached factorization."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.n:
        raise DimensionMismatch(
            f"right-hand side has {b.shape[0]} rows, factorization is {f.n}x{f.n}"
        )
    return cho_solve((f.lower_factor, True), b)


def inv_spd(f: SpdFactorization) -> np.ndarray:
    """Explicit inverse of (M + jitter_used * I); needed for Hadamard-form terms."""
    return cho_solve((f.lower_factor, True), np.eye(f.n))


def logdet_spd(f: SpdFactorization) -> float:
    """log det of (M + jitter_used * I)."""
    return 2.0 * float(np.sum(np.log(np.diag(f.lower_factor))))
