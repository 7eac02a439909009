"""Single-fidelity noisy GP regression with a linear-predictor prior mean.

Fitting profiles out the mean coefficients and the kernel variance in closed
form and optimizes (theta, eta) numerically in log-space with multi-start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels, numerics, optimize
from .exceptions import DimensionMismatch, RankDeficientBasis
from .kernels import KernelParams, LengthScales
from .numerics import SpdFactorization
from .optimize import BoxBounds, MultiStartConfig

LATENT = "latent"
NOISY = "noisy"
FULL = "full"
DIAGONAL = "diagonal"

# Below this, the profiled variance is treated as degenerate and the NLL is +inf.
_SIGMA2_FLOOR = 1e-300


@dataclass(frozen=True)
class Dataset:
    """Training inputs (N x D) and noisy outputs (N,)."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        z = np.asarray(self.z, dtype=float).ravel()
        if x.shape[0] != z.shape[0]:
            raise DimensionMismatch("inputs and outputs have different lengths")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class BasisSpec:
    """Ordered feature maps f_j: (N, D) array -> (N,) vector for the prior mean."""

    functions: tuple[Callable[[np.ndarray], np.ndarray], ...]

    @property
    def p(self) -> int:
        return len(self.functions)

    def design_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        cols = [np.asarray(f(x), dtype=float).ravel() for f in self.functions]
        return np.column_stack(cols)


def constant_basis() -> BasisSpec:
    return BasisSpec(functions=(lambda x: np.ones(x.shape[0]),))


@dataclass(frozen=True)
class GpHyper:
    beta: np.ndarray
    kernel: KernelParams


@dataclass(frozen=True)
class PredictiveDistribution:
    """Posterior mean with either a variance diagonal or a full covariance."""

    mean: np.ndarray
    variance: np.ndarray | None = None
    covariance: np.ndarray | None = None

    @property
    def sd(self) -> np.ndarray:
        var = self.variance if self.variance is not None else np.diag(self.covariance)
        return np.sqrt(var)


@dataclass(frozen=True)
class TrainedGp:
    data: Dataset
    basis: BasisSpec
    hyper: GpHyper
    factorization: SpdFactorization
    residual_solve: np.ndarray
    fit_log: dict = field(default_factory=dict, compare=False)


def default_bounds(data: Dataset) -> BoxBounds:
    """Box for (theta_1..theta_D, eta): length scales span 1e-3..1e3 times each
    input range, eta spans negligible to dominating noise."""
    ranges = np.ptp(data.x, axis=0)
    ranges = np.where(ranges > 0, ranges, 1.0)
    lower = np.concatenate([1e-3 * ranges, [1e-8]])
    upper = np.concatenate([1e3 * ranges, [1e2]])
    return BoxBounds(lower=lower, upper=upper)


def theta_bounds(data: Dataset) -> BoxBounds:
    ranges = np.ptp(data.x, axis=0)
    ranges = np.where(ranges > 0, ranges, 1.0)
    return BoxBounds(lower=1e-3 * ranges, upper=1e3 * ranges)


def _check_basis(basis: BasisSpec, x: np.ndarray) -> np.ndarray:
    f = basis.design_matrix(x)
    if np.linalg.matrix_rank(f) < basis.p:
        raise RankDeficientBasis("basis design matrix is rank deficient on this data")
    return f


def _profile(data: Dataset, f_mat: np.ndarray, theta: LengthScales, eta: float):
    """Factorize R(theta) + eta I and compute the profiled beta-hat, sigma2-hat."""
    r = kernels.corr_matrix(data.x, data.x, theta)
    rt = r + eta * np.eye(data.n)
    fact = numerics.chol_factor(rt)
    ri_f = numerics.solve_spd(fact, f_mat)
    ri_z = numerics.solve_spd(fact, data.z)
    gram = f_mat.T @ ri_f
    try:
        beta = np.linalg.solve(gram, f_mat.T @ ri_z)
    except np.linalg.LinAlgError:
        raise RankDeficientBasis("normal equations singular for this basis") from None
    resid = data.z - f_mat @ beta
    ri_resid = ri_z - ri_f @ beta
    sigma2 = float(resid @ ri_resid) / data.n
    return fact, beta, max(sigma2, 0.0), resid, ri_resid


def profiled_estimates(
    data: Dataset, basis: BasisSpec, theta: LengthScales, eta: float
) -> tuple[np.ndarray, float]:
    """Closed-form GLS estimate of beta and the profiled variance estimate."""
    f_mat = _check_basis(basis, data.x)
    _, beta, sigma2, _, _ = _profile(data, f_mat, theta, eta)
    return beta, sigma2


def profiled_nll_and_grad(
    data: Dataset, basis: BasisSpec, theta: LengthScales, eta: float
) -> tuple[float, np.ndarray]:
    """Negative profiled log-likelihood in (theta, eta) and its raw-space gradient.

    A degenerate profiled variance yields (+inf, zeros) so the optimizer retreats.
    """
    f_mat = _check_basis(basis, data.x)
    fact, _, sigma2, _, ri_resid = _profile(data, f_mat, theta, eta)
    n, d = data.n, theta.ndim
    if sigma2 < _SIGMA2_FLOOR:
        return np.inf, np.zeros(d + 1)
    value = (
        0.5 * n * math.log(sigma2)
        + 0.5 * numerics.logdet_spd(fact)
        + 0.5 * n * (1.0 + math.log(2.0 * math.pi))
    )
    kappa = ri_resid / math.sqrt(sigma2)
    rt_inv = numerics.inv_spd(fact)
    grad = np.empty(d + 1)
    for j in range(d):
        dr = kernels.corr_matrix_grad(data.x, theta, j)
        grad[j] = 0.5 * (np.sum(rt_inv * dr) - kappa @ dr @ kappa)
    grad[d] = 0.5 * (np.trace(rt_inv) - kappa @ kappa)
    return value, grad


def fit_gp(
    data: Dataset,
    basis: BasisSpec | None = None,
    bounds: BoxBounds | None = None,
    config: MultiStartConfig = MultiStartConfig(),
    fixed_eta: float | None = None,
) -> TrainedGp:
    """Fit (theta, eta) by multi-start minimization of the profiled NLL.

    `fixed_eta` pins the noise ratio (e.g. 0 for noise-free interpolation) and
    restricts the search to theta.
    """
    basis = basis if basis is not None else constant_basis()
    if data.n < basis.p + 1:
        raise ValueError("need at least p + 1 training points")
    f_mat = _check_basis(basis, data.x)
    d = data.d

    if fixed_eta is None:
        raw_bounds = bounds if bounds is not None else default_bounds(data)
    else:
        raw_bounds = bounds if bounds is not None else theta_bounds(data)

    log_bounds = BoxBounds(np.log(raw_bounds.lower), np.log(raw_bounds.upper))

    def objective(psi: np.ndarray) -> tuple[float, np.ndarray]:
        omega = np.exp(psi)
        if fixed_eta is None:
            theta, eta = LengthScales(omega[:d]), float(omega[d])
        else:
            theta, eta = LengthScales(omega), fixed_eta
        value, grad_raw = profiled_nll_and_grad(data, basis, theta, eta)
        if not np.isfinite(value):
            return np.inf, np.zeros_like(psi)
        grad = grad_raw if fixed_eta is None else grad_raw[:d]
        return value, grad * omega

    best_psi, best_val, start_log = optimize.multi_start_minimize(
        objective, log_bounds, config
    )
    omega = np.exp(best_psi)
    if fixed_eta is None:
        theta, eta = LengthScales(omega[:d]), float(omega[d])
    else:
        theta, eta = LengthScales(omega), fixed_eta

    fact, beta, sigma2, _, ri_resid = _profile(data, f_mat, theta, eta)
    hyper = GpHyper(beta=beta, kernel=KernelParams(theta=theta, sigma2=sigma2, eta=eta))
    fit_log = {
        "nll": best_val,
        "n_starts": len(start_log),
        "start_values": [s.value for s in start_log],
    }
    return TrainedGp(
        data=data,
        basis=basis,
        hyper=hyper,
        factorization=fact,
        residual_solve=ri_resid,
        fit_log=fit_log,
    )


def make_trained_gp(
    data: Dataset, basis: BasisSpec, beta: np.ndarray, kernel: KernelParams
) -> TrainedGp:
    """Assemble a TrainedGp from given hyperparameters (deserialization path)."""
    f_mat = basis.design_matrix(data.x)
    fact, _, _, _, _ = _profile(data, f_mat, kernel.theta, kernel.eta)
    ri_resid = numerics.solve_spd(fact, data.z - f_mat @ np.asarray(beta, dtype=float))
    hyper = GpHyper(beta=np.asarray(beta, dtype=float), kernel=kernel)
    return TrainedGp(
        data=data, basis=basis, hyper=hyper, factorization=fact, residual_solve=ri_resid
    )


def _cross_corr(model: TrainedGp, x_star: np.ndarray) -> np.ndarray:
    return kernels.corr_matrix(x_star, model.data.x, model.hyper.kernel.theta)


def predict_gp(
    model: TrainedGp,
    x_star: np.ndarray,
    mode: str = LATENT,
    cov: str = DIAGONAL,
) -> PredictiveDistribution:
    """Kriging posterior at new points: latent or noisy, diagonal or full."""
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim == 1:
        x_star = x_star.reshape(-1, model.data.d)
    if x_star.shape[1] != model.data.d:
        raise DimensionMismatch("prediction inputs have the wrong dimension")
    k = model.hyper.kernel
    r_cross = _cross_corr(model, x_star)
    f_star = model.basis.design_matrix(x_star)
    mean = f_star @ model.hyper.beta + r_cross @ model.residual_solve

    solved = numerics.solve_spd(model.factorization, r_cross.T)
    if cov == FULL:
        r_star = kernels.corr_matrix(x_star, x_star, k.theta)
        c = k.sigma2 * (r_star - r_cross @ solved)
        c = 0.5 * (c + c.T)
        diag = np.clip(np.diag(c), 0.0, None)
        np.fill_diagonal(c, diag + (k.noise_variance if mode == NOISY else 0.0))
        return PredictiveDistribution(mean=mean, covariance=c)
    var = k.sigma2 * (1.0 - np.einsum("ij,ji->i", r_cross, solved))
    var = np.clip(var, 0.0, None)
    if mode == NOISY:
        var = var + k.noise_variance
    return PredictiveDistribution(mean=mean, variance=var)


def posterior_cross_cov(
    model: TrainedGp, xa: np.ndarray, xb: np.ndarray
) -> np.ndarray:
    """Posterior covariance v_Y(xa_i, xb_j) between two point sets."""
    k = model.hyper.kernel
    ra = _cross_corr(model, xa)
    rb = _cross_corr(model, xb)
    r_ab = kernels.corr_matrix(xa, xb, k.theta)
    return k.sigma2 * (r_ab - ra @ numerics.solve_spd(model.factorization, rb.T))
