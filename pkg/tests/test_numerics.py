import numpy as np
import pytest

from mfkrig import numerics
from mfkrig.exceptions import DimensionMismatch, NotPositiveDefinite, NotSymmetric

from conftest import det_cofactor, random_spd


class TestCholFactor:
    def test_identity(self):
        f = numerics.chol_factor(np.eye(3))
        assert np.allclose(f.lower_factor, np.eye(3))
        assert f.jitter_used == 0.0

    def test_diagonal(self):
        f = numerics.chol_factor(np.diag([4.0, 9.0]))
        assert np.allclose(f.lower_factor, np.diag([2.0, 3.0]))

    def test_reconstruction_oracle(self, rng):
        a = random_spd(rng, 10)
        f = numerics.chol_factor(a)
        recon = f.lower_factor @ f.lower_factor.T - f.jitter_used * np.eye(10)
        assert np.linalg.norm(recon - a) / np.linalg.norm(a) < 1e-10

    def test_positive_diagonal(self, rng):
        f = numerics.chol_factor(random_spd(rng, 7))
        assert np.all(np.diag(f.lower_factor) > 0)

    def test_not_symmetric(self):
        m = np.array([[1.0, 0.5], [0.3, 1.0]])
        with pytest.raises(NotSymmetric):
            numerics.chol_factor(m)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            numerics.chol_factor(-np.eye(3))

    def test_jitter_rescues_singular(self):
        # Rank-deficient PSD matrix: bare factorization fails, jitter succeeds.
        m = np.ones((4, 4))
        f = numerics.chol_factor(m)
        assert f.jitter_used > 0

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatch):
            numerics.chol_factor(np.ones((2, 3)))


class TestSolveSpd:
    def test_identity(self):
        f = numerics.chol_factor(np.eye(3))
        b = np.array([1.0, 2.0, 3.0])
        assert np.allclose(numerics.solve_spd(f, b), b)

    def test_diagonal(self):
        f = numerics.chol_factor(np.diag([4.0, 9.0]))
        assert np.allclose(numerics.solve_spd(f, np.array([4.0, 9.0])), [1.0, 1.0])

    def test_residual_oracle(self, rng):
        a = random_spd(rng, 12)
        b = rng.normal(size=12)
        f = numerics.chol_factor(a)
        x = numerics.solve_spd(f, b)
        assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) < 1e-9

    def test_dimension_mismatch(self):
        f = numerics.chol_factor(np.eye(3))
        with pytest.raises(DimensionMismatch):
            numerics.solve_spd(f, np.ones(4))


class TestLogdetSpd:
    def test_identity(self):
        assert numerics.logdet_spd(numerics.chol_factor(np.eye(3))) == 0.0

    def test_diagonal(self):
        f = numerics.chol_factor(np.diag([4.0, 9.0]))
        assert np.isclose(numerics.logdet_spd(f), np.log(36.0))

    def test_determinant_oracle(self, rng):
        a = random_spd(rng, 6)
        f = numerics.chol_factor(a)
        assert abs(numerics.logdet_spd(f) - np.log(det_cofactor(a))) < 1e-8

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_small_matrix_oracle(self, rng, n):
        a = random_spd(rng, n, cond=10.0)
        f = numerics.chol_factor(a)
        assert abs(numerics.logdet_spd(f) - np.log(det_cofactor(a))) < 1e-8

    def test_diagonal_shift_on_known_spectrum(self, rng):
        lam = np.array([0.5, 1.0, 2.0, 5.0, 10.0])
        q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        m = q @ np.diag(lam) @ q.T
        c = 0.7
        base = numerics.logdet_spd(numerics.chol_factor(m))
        shifted = numerics.logdet_spd(numerics.chol_factor(m + c * np.eye(5)))
        assert abs(shifted - base - np.sum(np.log((lam + c) / lam))) < 1e-6


def test_track_factorization_sizes(rng):
    with numerics.track_factorization_sizes() as sizes:
        numerics.chol_factor(random_spd(rng, 5))
        numerics.chol_factor(random_spd(rng, 9))
    assert sizes == [5, 9]
