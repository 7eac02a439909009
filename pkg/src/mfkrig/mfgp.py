"""Recursive AR(1) bi-fidelity co-kriging for noisy, non-nested designs.

The low-fidelity level is a fitted single-fidelity GP. The high-fidelity level
links to the LF posterior through a linear scaling plus an independent
discrepancy GP; its parameters are selected by an EM algorithm whose M-step has
closed-form updates for the linear coefficients and the discrepancy variance,
leaving only (theta_H, eta_H) for numerical search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, numerics, optimize
from .exceptions import (
    DimensionMismatch,
    FactorizationFailure,
    NonMonotoneEM,
    NotPositiveDefinite,
    SingularNormalEquations,
)
from .gp import (
    DIAGONAL,
    FULL,
    LATENT,
    NOISY,
    BasisSpec,
    Dataset,
    MultiStartConfig,
    PredictiveDistribution,
    TrainedGp,
    constant_basis,
    default_bounds,
    fit_gp,
    posterior_cross_cov,
    predict_gp,
)
from .kernels import LengthScales
from .optimize import BoxBounds

LF = "lf"
HF = "hf"

_SIGMA2_FLOOR = 1e-300


@dataclass(frozen=True)
class MfData:
    """Low- and high-fidelity training sets over a shared input space.

    The HF inputs are not required to be a subset of the LF inputs.
    """

    lf: Dataset
    hf: Dataset

    def __post_init__(self):
        if self.lf.d != self.hf.d:
            raise DimensionMismatch("LF and HF inputs have different dimensions")


@dataclass(frozen=True)
class HfParams:
    """High-fidelity parameters: scaling coefficients, discrepancy mean
    coefficients, discrepancy variance, length scales, noise ratio."""

    beta_rho: np.ndarray
    beta_h: np.ndarray
    sigma2_h: float
    theta_h: LengthScales
    eta_h: float

    def __post_init__(self):
        object.__setattr__(self, "beta_rho", np.atleast_1d(np.asarray(self.beta_rho, float)))
        object.__setattr__(self, "beta_h", np.atleast_1d(np.asarray(self.beta_h, float)))
        if self.sigma2_h <= 0:
            raise ValueError("sigma2_h must be strictly positive")
        if self.eta_h < 0:
            raise ValueError("eta_h must be non-negative")

    @property
    def noise_variance(self) -> float:
        return self.eta_h * self.sigma2_h

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.beta_rho, self.beta_h])


@dataclass
class EStepState:
    """Conditional moments of the latent LF values at the HF inputs, plus the
    fixed matrices the M-step consumes."""

    sigma_yz: np.ndarray
    sigma_zz: np.ndarray
    mu_y_given_z: np.ndarray
    sigma_y_given_z: np.ndarray
    h_matrix: np.ndarray
    g_matrix: np.ndarray
    f_matrix: np.ndarray
    lf_mean_at_hf: np.ndarray
    lf_cov_at_hf: np.ndarray


@dataclass(frozen=True)
class EmConfig:
    max_em_iterations: int = 100
    loglik_rel_tolerance: float = 1e-8
    inner_n_starts: int = 5


@dataclass(frozen=True)
class MfModel:
    lf_model: TrainedGp
    hf_params: HfParams
    hf_basis: BasisSpec
    rho_basis: BasisSpec
    data: MfData
    em_log: list[float] = field(compare=False)
    # Cached co-kriging quantities at the HF training inputs.
    rho_at_hf: np.ndarray = field(compare=False, default=None)
    m_ar_at_hf: np.ndarray = field(compare=False, default=None)
    lf_cov_at_hf: np.ndarray = field(compare=False, default=None)
    ar_factorization: numerics.SpdFactorization = field(compare=False, default=None)
    ar_residual_solve: np.ndarray = field(compare=False, default=None)


def lf_posterior_moments(lf_model: TrainedGp, x: np.ndarray):
    """Posterior mean and full covariance of the LF GP at the given points.

    This is the only path by which the HF stage sees LF information.
    """
    pred = predict_gp(lf_model, x, mode=LATENT, cov=FULL)
    return pred.mean, pred.covariance


def _lf_moments_at_hf(lf_model: TrainedGp, x_hf: np.ndarray):
    mean, cov = lf_posterior_moments(lf_model, x_hf)
    return mean, 0.5 * (cov + cov.T)


def e_step(
    data: MfData,
    lf_model: TrainedGp,
    params: HfParams,
    hf_basis: BasisSpec,
    rho_basis: BasisSpec,
) -> EStepState:
    """Condition the latent LF values at the HF inputs on the HF observations."""
    x_h, z_h = data.hf.x, data.hf.z
    n_h = data.hf.n
    m_yl, v_yl = _lf_moments_at_hf(lf_model, x_h)
    g_mat = rho_basis.design_matrix(x_h)
    f_mat = hf_basis.design_matrix(x_h)
    rho = g_mat @ params.beta_rho

    r_h = kernels.corr_matrix(x_h, x_h, params.theta_h)
    rt = r_h + params.eta_h * np.eye(n_h)
    sigma_yz = v_yl * rho[None, :]
    sigma_zz = np.outer(rho, rho) * v_yl + params.sigma2_h * rt
    try:
        fact = numerics.chol_factor(sigma_zz)
    except NotPositiveDefinite as exc:
        raise FactorizationFailure(str(exc)) from exc

    resid = z_h - rho * m_yl - f_mat @ params.beta_h
    mu = m_yl + sigma_yz @ numerics.solve_spd(fact, resid)
    sigma_cond = v_yl - sigma_yz @ numerics.solve_spd(fact, sigma_yz.T)
    sigma_cond = 0.5 * (sigma_cond + sigma_cond.T)

    h_mat = np.hstack([g_mat * mu[:, None], f_mat])
    return EStepState(
        sigma_yz=sigma_yz,
        sigma_zz=sigma_zz,
        mu_y_given_z=mu,
        sigma_y_given_z=sigma_cond,
        h_matrix=h_mat,
        g_matrix=g_mat,
        f_matrix=f_mat,
        lf_mean_at_hf=m_yl,
        lf_cov_at_hf=v_yl,
    )


def _m_step_at(state: EStepState, data: MfData, theta_h: LengthScales, eta_h: float):
    """Closed-form (beta_rho_h, sigma2_h) at fixed (theta_h, eta_h), plus the
    intermediates the gradient needs."""
    x_h, z_h = data.hf.x, data.hf.z
    n_h = data.hf.n
    q = state.g_matrix.shape[1]
    p_h = state.f_matrix.shape[1]

    r_h = kernels.corr_matrix(x_h, x_h, theta_h)
    rt = r_h + eta_h * np.eye(n_h)
    fact = numerics.chol_factor(rt)
    rt_inv = numerics.inv_spd(fact)

    t_block = state.g_matrix.T @ ((rt_inv * state.sigma_y_given_z) @ state.g_matrix)
    t_mat = np.zeros((q + p_h, q + p_h))
    t_mat[:q, :q] = t_block

    h = state.h_matrix
    ri_h = numerics.solve_spd(fact, h)
    gram = h.T @ ri_h + t_mat
    try:
        beta = np.linalg.solve(gram, h.T @ numerics.solve_spd(fact, z_h))
    except np.linalg.LinAlgError:
        raise SingularNormalEquations(
            "normal equations for the scaling/discrepancy coefficients are singular"
        ) from None
    resid = z_h - h @ beta
    ri_resid = numerics.solve_spd(fact, resid)
    sigma2 = (float(resid @ ri_resid) + float(beta @ t_mat @ beta)) / n_h
    return beta, max(sigma2, 0.0), fact, rt_inv, ri_resid, t_mat


def m_step_closed_forms(
    state: EStepState, data: MfData, theta_h: LengthScales, eta_h: float
) -> tuple[np.ndarray, float]:
    beta, sigma2, *_ = _m_step_at(state, data, theta_h, eta_h)
    return beta, sigma2


def q_tilde_and_grad(
    state: EStepState, data: MfData, theta_h: LengthScales, eta_h: float
) -> tuple[float, np.ndarray]:
    """Negated profiled EM objective over (theta_H, eta_H) and its gradient."""
    n_h = data.hf.n
    d = theta_h.ndim
    beta, sigma2, fact, rt_inv, ri_resid, _ = _m_step_at(state, data, theta_h, eta_h)
    if sigma2 < _SIGMA2_FLOOR:
        return np.inf, np.zeros(d + 1)
    value = (
        0.5 * n_h * math.log(sigma2)
        + 0.5 * numerics.logdet_spd(fact)
        + 0.5 * n_h * (1.0 + math.log(2.0 * math.pi))
    )
    q = state.g_matrix.shape[1]
    kappa = ri_resid / math.sqrt(sigma2)
    rho_new = state.g_matrix @ beta[:q]
    sigma_cond = state.sigma_y_given_z

    grad = np.empty(d + 1)
    for j in range(d + 1):
        if j < d:
            dr = kernels.corr_matrix_grad(data.hf.x, theta_h, j)
            ri_dr = rt_inv @ dr
            trace_term = 0.5 * (np.sum(rt_inv * dr) - kappa @ dr @ kappa)
        else:
            ri_dr = rt_inv
            trace_term = 0.5 * (np.trace(rt_inv) - kappa @ kappa)
        m = ri_dr @ rt_inv
        hadamard_term = float(rho_new @ ((m * sigma_cond) @ rho_new)) / (2.0 * sigma2)
        grad[j] = trace_term - hadamard_term
    return value, grad


def hf_observed_loglik(
    data: MfData,
    lf_model: TrainedGp,
    params: HfParams,
    hf_basis: BasisSpec,
    rho_basis: BasisSpec,
) -> float:
    """Exact marginal Gaussian log-density of the HF observations.

    This is the quantity whose monotone increase certifies each EM iteration.
    """
    x_h, z_h = data.hf.x, data.hf.z
    n_h = data.hf.n
    m_yl, v_yl = _lf_moments_at_hf(lf_model, x_h)
    rho = rho_basis.design_matrix(x_h) @ params.beta_rho
    mean = rho * m_yl + hf_basis.design_matrix(x_h) @ params.beta_h
    r_h = kernels.corr_matrix(x_h, x_h, params.theta_h)
    cov = np.outer(rho, rho) * v_yl + params.sigma2_h * (
        r_h + params.eta_h * np.eye(n_h)
    )
    try:
        fact = numerics.chol_factor(cov)
    except NotPositiveDefinite as exc:
        raise FactorizationFailure(str(exc)) from exc
    resid = z_h - mean
    quad = float(resid @ numerics.solve_spd(fact, resid))
    return -0.5 * (quad + numerics.logdet_spd(fact) + n_h * math.log(2.0 * math.pi))


def _initial_params(
    data: MfData, lf_model: TrainedGp, hf_basis: BasisSpec, rho_basis: BasisSpec
) -> HfParams:
    """Scale-aware neutral starting point: identity scaling, residual mean and
    variance, per-dimension input ranges, moderate noise ratio."""
    x_h, z_h = data.hf.x, data.hf.z
    m_yl = predict_gp(lf_model, x_h, mode=LATENT, cov=DIAGONAL).mean
    g_mat = rho_basis.design_matrix(x_h)
    f_mat = hf_basis.design_matrix(x_h)
    beta_rho, *_ = np.linalg.lstsq(g_mat, np.ones(data.hf.n), rcond=None)
    rho = g_mat @ beta_rho
    resid = z_h - rho * m_yl
    beta_h, *_ = np.linalg.lstsq(f_mat, resid, rcond=None)
    resid2 = resid - f_mat @ beta_h
    sigma2 = max(float(np.var(resid2)), 1e-8 * max(float(np.var(z_h)), 1.0))
    ranges = np.ptp(x_h, axis=0)
    ranges = np.where(ranges > 0, ranges, 1.0)
    return HfParams(
        beta_rho=beta_rho,
        beta_h=beta_h,
        sigma2_h=sigma2,
        theta_h=LengthScales(ranges),
        eta_h=0.1,
    )


def em_fit_hf(
    data: MfData,
    lf_model: TrainedGp,
    hf_basis: BasisSpec | None = None,
    rho_basis: BasisSpec | None = None,
    bounds: BoxBounds | None = None,
    config: MultiStartConfig = MultiStartConfig(),
    em_config: EmConfig = EmConfig(),
) -> tuple[HfParams, list[float]]:
    """EM estimation of the HF parameters.

    Each iteration conditions the latent LF values on the HF data, then
    maximizes the resulting objective: closed forms for the linear coefficients
    and variance, multi-start quasi-Newton for (theta_H, eta_H). The current
    point is always among the starts, which guarantees a non-decreasing
    observed-data log-likelihood.
    """
    hf_basis = hf_basis if hf_basis is not None else constant_basis()
    rho_basis = rho_basis if rho_basis is not None else constant_basis()
    q, p_h = rho_basis.p, hf_basis.p
    if data.hf.n < q + p_h + 1:
        raise ValueError("need at least q + p_H + 1 high-fidelity points")
    raw_bounds = bounds if bounds is not None else default_bounds(data.hf)
    log_bounds = BoxBounds(np.log(raw_bounds.lower), np.log(raw_bounds.upper))
    d = data.hf.d

    params = _initial_params(data, lf_model, hf_basis, rho_basis)
    loglik = hf_observed_loglik(data, lf_model, params, hf_basis, rho_basis)
    em_log = [loglik]

    for t in range(em_config.max_em_iterations):
        state = e_step(data, lf_model, params, hf_basis, rho_basis)

        def objective(psi: np.ndarray) -> tuple[float, np.ndarray]:
            omega = np.exp(psi)
            value, grad_raw = q_tilde_and_grad(
                state, data, LengthScales(omega[:d]), float(omega[d])
            )
            if not np.isfinite(value):
                return np.inf, np.zeros_like(psi)
            return value, grad_raw * omega

        n_starts = config.n_starts if t == 0 else em_config.inner_n_starts
        iter_seed = int(np.random.SeedSequence((config.rng_seed, t)).generate_state(1)[0])
        iter_config = MultiStartConfig(
            n_starts=n_starts,
            max_iterations=config.max_iterations,
            gradient_tolerance=config.gradient_tolerance,
            rng_seed=iter_seed,
        )
        current = np.log(
            np.clip(
                np.concatenate([params.theta_h.theta, [max(params.eta_h, raw_bounds.lower[-1])]]),
                raw_bounds.lower,
                raw_bounds.upper,
            )
        )
        best_psi, _, _ = optimize.multi_start_minimize(
            objective, log_bounds, iter_config, extra_starts=[current]
        )
        omega = np.exp(best_psi)
        theta_new, eta_new = LengthScales(omega[:d]), float(omega[d])
        beta, sigma2 = m_step_closed_forms(state, data, theta_new, eta_new)
        params = HfParams(
            beta_rho=beta[:q],
            beta_h=beta[q:],
            sigma2_h=max(sigma2, _SIGMA2_FLOOR * 1e50),
            theta_h=theta_new,
            eta_h=eta_new,
        )
        new_loglik = hf_observed_loglik(data, lf_model, params, hf_basis, rho_basis)
        em_log.append(new_loglik)
        if new_loglik < loglik - 1e-6:
            raise NonMonotoneEM(
                f"observed-data log-likelihood decreased at EM iteration {t}: "
                f"{loglik} -> {new_loglik}"
            )
        if new_loglik - loglik <= em_config.loglik_rel_tolerance * max(1.0, abs(loglik)):
            loglik = new_loglik
            break
        loglik = new_loglik
    return params, em_log


def _build_caches(model_args: dict) -> dict:
    data: MfData = model_args["data"]
    lf_model: TrainedGp = model_args["lf_model"]
    params: HfParams = model_args["hf_params"]
    hf_basis: BasisSpec = model_args["hf_basis"]
    rho_basis: BasisSpec = model_args["rho_basis"]
    x_h, z_h = data.hf.x, data.hf.z
    m_yl, v_yl = _lf_moments_at_hf(lf_model, x_h)
    rho = rho_basis.design_matrix(x_h) @ params.beta_rho
    m_ar = rho * m_yl + hf_basis.design_matrix(x_h) @ params.beta_h
    r_h = kernels.corr_matrix(x_h, x_h, params.theta_h)
    cov = np.outer(rho, rho) * v_yl + params.sigma2_h * (
        r_h + params.eta_h * np.eye(data.hf.n)
    )
    try:
        fact = numerics.chol_factor(cov)
    except NotPositiveDefinite as exc:
        raise FactorizationFailure(str(exc)) from exc
    model_args.update(
        rho_at_hf=rho,
        m_ar_at_hf=m_ar,
        lf_cov_at_hf=v_yl,
        ar_factorization=fact,
        ar_residual_solve=numerics.solve_spd(fact, z_h - m_ar),
    )
    return model_args


def make_mf_model(
    data: MfData,
    lf_model: TrainedGp,
    hf_params: HfParams,
    hf_basis: BasisSpec,
    rho_basis: BasisSpec,
    em_log: list[float] | None = None,
) -> MfModel:
    """Assemble an MfModel (with prediction caches) from given parameters."""
    args = dict(
        lf_model=lf_model,
        hf_params=hf_params,
        hf_basis=hf_basis,
        rho_basis=rho_basis,
        data=data,
        em_log=em_log if em_log is not None else [],
    )
    return MfModel(**_build_caches(args))


def fit_mf(
    data: MfData,
    lf_basis: BasisSpec | None = None,
    hf_basis: BasisSpec | None = None,
    rho_basis: BasisSpec | None = None,
    lf_bounds: BoxBounds | None = None,
    hf_bounds: BoxBounds | None = None,
    lf_config: MultiStartConfig = MultiStartConfig(),
    hf_config: MultiStartConfig = MultiStartConfig(),
    em_config: EmConfig = EmConfig(),
    lf_fixed_eta: float | None = None,
) -> MfModel:
    """Fit the full model: LF by profiled MLE on LF data alone, then HF by EM."""
    lf_model = fit_gp(
        data.lf, basis=lf_basis, bounds=lf_bounds, config=lf_config, fixed_eta=lf_fixed_eta
    )
    hf_basis = hf_basis if hf_basis is not None else constant_basis()
    rho_basis = rho_basis if rho_basis is not None else constant_basis()
    params, em_log = em_fit_hf(
        data,
        lf_model,
        hf_basis=hf_basis,
        rho_basis=rho_basis,
        bounds=hf_bounds,
        config=hf_config,
        em_config=em_config,
    )
    return make_mf_model(data, lf_model, params, hf_basis, rho_basis, em_log)


def ar_moments(model: MfModel, x_star: np.ndarray):
    """Auto-regressive prior mean at x_star, cross-covariance to the HF training
    inputs, and the training-set covariance."""
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim == 1:
        x_star = x_star.reshape(-1, model.data.hf.d)
    params = model.hf_params
    rho_star = model.rho_basis.design_matrix(x_star) @ params.beta_rho
    m_yl_star = predict_gp(model.lf_model, x_star, mode=LATENT, cov=DIAGONAL).mean
    m_ar = rho_star * m_yl_star + model.hf_basis.design_matrix(x_star) @ params.beta_h

    v_cross = posterior_cross_cov(model.lf_model, x_star, model.data.hf.x)
    r_cross = kernels.corr_matrix(x_star, model.data.hf.x, params.theta_h)
    k_cross = (
        rho_star[:, None] * model.rho_at_hf[None, :] * v_cross
        + params.sigma2_h * r_cross
    )
    r_h = kernels.corr_matrix(model.data.hf.x, model.data.hf.x, params.theta_h)
    k_ar = (
        np.outer(model.rho_at_hf, model.rho_at_hf) * model.lf_cov_at_hf
        + params.sigma2_h * r_h
    )
    return m_ar, k_cross, k_ar


def predict_mf(
    model: MfModel,
    x_star: np.ndarray,
    level: str = HF,
    mode: str = LATENT,
    cov: str = DIAGONAL,
) -> PredictiveDistribution:
    """Co-kriging posterior at new points for either fidelity level."""
    if level == LF:
        return predict_gp(model.lf_model, x_star, mode=mode, cov=cov)
    if level != HF:
        raise ValueError(f"level must be {LF!r} or {HF!r}, got {level!r}")
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim == 1:
        x_star = x_star.reshape(-1, model.data.hf.d)
    if x_star.shape[1] != model.data.hf.d:
        raise DimensionMismatch("prediction inputs have the wrong dimension")

    params = model.hf_params
    m_ar, k_cross, _ = ar_moments(model, x_star)
    mean = m_ar + k_cross @ model.ar_residual_solve

    solved = numerics.solve_spd(model.ar_factorization, k_cross.T)
    rho_star = model.rho_basis.design_matrix(x_star) @ params.beta_rho
    if cov == FULL:
        v_yl_star = predict_gp(model.lf_model, x_star, mode=LATENT, cov=FULL).covariance
        r_star = kernels.corr_matrix(x_star, x_star, params.theta_h)
        prior = np.outer(rho_star, rho_star) * v_yl_star + params.sigma2_h * r_star
        c = prior - k_cross @ solved
        c = 0.5 * (c + c.T)
        diag = np.clip(np.diag(c), 0.0, None)
        np.fill_diagonal(c, diag + (params.noise_variance if mode == NOISY else 0.0))
        return PredictiveDistribution(mean=mean, covariance=c)

    v_yl_diag = predict_gp(model.lf_model, x_star, mode=LATENT, cov=DIAGONAL).variance
    prior_diag = rho_star**2 * v_yl_diag + params.sigma2_h
    var = prior_diag - np.einsum("ij,ji->i", k_cross, solved)
    var = np.clip(var, 0.0, None)
    if mode == NOISY:
        var = var + params.noise_variance
    return PredictiveDistribution(mean=mean, variance=var)
