"""Linear baselines: no-jitter efficient, linear unbiased, BLUE and the two LLS estimators."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NotPositiveDefiniteError, RankDeficientError
from .quadrature import QuadratureRule, effective_rule, gauss_hermite_rule
from .signal_model import ModelConfig, SampleSet, build_observation_matrix, node_rows

PRIOR_VARIANCE = 1.0 / 3.0  # variance of Uniform(-1, 1)


def spd_solve(A, b):
    """Solve a Gram/ridge system by Cholesky, falling back to pivoted least squares."""
    try:
        return linalg.cho_solve(linalg.cho_factor(A, lower=True, check_finite=False), b,
                                check_finite=False)
    except linalg.LinAlgError:
        warnings.warn("Cholesky failed; falling back to least squares", RuntimeWarning, stacklevel=2)
        return linalg.lstsq(A, b, lapack_driver="gelsy")[0]


@dataclass(frozen=True, eq=False)
class MeanObservationMatrix:
    """E[H(z)], E[H(z) H(z)^T] and E[H(z)^T H(z)] under white Gaussian jitter."""

    EH: np.ndarray
    EHH_t: np.ndarray
    EHtH: np.ndarray
    config: ModelConfig


def mean_observation_matrices(config: ModelConfig, rule: QuadratureRule | None = None
                              ) -> MeanObservationMatrix:
    if config.sigma_z == 0:
        H0 = build_observation_matrix(np.zeros(config.N), config)
        return MeanObservationMatrix(EH=H0, EHH_t=H0 @ H0.T, EHtH=H0.T @ H0, config=config)
    rule = rule or gauss_hermite_rule()
    T = node_rows(config, config.sigma_z * rule.nodes)  # (N, I, K)
    w = rule.weights
    EH = np.einsum("j,njk->nk", w, T)
    EHtH = np.einsum("j,njk,njl->kl", w, T, T)
    EHH_t = EH @ EH.T
    # z_n, z_m independent for n != m; the diagonal needs the second moment
    np.fill_diagonal(EHH_t, np.einsum("j,njk,njk->n", w, T, T))
    return MeanObservationMatrix(EH=EH, EHH_t=EHH_t, EHtH=EHtH, config=config)


def _h0(config: ModelConfig) -> np.ndarray:
    return build_observation_matrix(np.zeros(config.N), config)


def efficient_no_jitter_operator(config: ModelConfig) -> np.ndarray:
    H0 = _h0(config)
    if np.linalg.matrix_rank(H0) < config.K:
        raise RankDeficientError("H(0) is not full column rank")
    return spd_solve(H0.T @ H0, H0.T)


def efficient_no_jitter(samples: SampleSet) -> np.ndarray:
    """Least-squares estimate assuming no jitter, (H0^T H0)^-1 H0^T y."""
    return efficient_no_jitter_operator(samples.config) @ samples.y


def linear_unbiased_operator(means: MeanObservationMatrix) -> np.ndarray:
    """The pseudoinverse of E[H]; raises if E[H] loses column rank."""
    s = np.linalg.svd(means.EH, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise RankDeficientError(
            f"E[H(z)] is rank deficient (sigma_min/sigma_max = {s[-1] / s[0]:.3g}); "
            "jitter too large for this configuration")
    return np.linalg.pinv(means.EH)


def linear_unbiased(samples: SampleSet, means: MeanObservationMatrix) -> np.ndarray:
    return linear_unbiased_operator(means) @ samples.y


def data_covariance(x, config: ModelConfig, rule: QuadratureRule | None = None) -> np.ndarray:
    """Covariance of y at fixed x.

    Off-diagonal terms cancel because jitter is white, so the result is
    diagonal: Var_z(h_n(z_n)^T x) + sigma_w^2.
    """
    x = np.asarray(x, dtype=float)
    rule = effective_rule(rule or gauss_hermite_rule(), config.sigma_z)
    T = node_rows(config, config.sigma_z * rule.nodes)
    proj = T @ x  # (N, I)
    mean = proj @ rule.weights
    second = (proj * proj) @ rule.weights
    var = np.maximum(second - mean * mean, 0.0)
    return np.diag(var + config.sigma_w ** 2)


def blue(samples: SampleSet, x_plug, means: MeanObservationMatrix,
         rule: QuadratureRule | None = None) -> np.ndarray:
    """BLUE for the random-H model with the data covariance evaluated at ``x_plug``.

    Not a realizable estimator (the weights need the unknown x); kept as a
    diagnostic oracle.
    """
    lam = np.diag(data_covariance(x_plug, samples.config, rule))
    if not np.all(lam > 0):
        raise NotPositiveDefiniteError("data covariance is not positive definite")
    EH = means.EH
    Wt = EH.T / lam
    return spd_solve(Wt @ EH, Wt @ samples.y)


def lls_random_jitter_operator(means: MeanObservationMatrix,
                               sigma_x2: float = PRIOR_VARIANCE) -> np.ndarray:
    """K x N matrix E[H]^T (E[H H^T] + (sigma_w^2/sigma_x^2) I)^-1."""
    if sigma_x2 <= 0:
        raise ValueError("sigma_x2 must be positive")
    cfg = means.config
    G = means.EHH_t + (cfg.sigma_w ** 2 / sigma_x2) * np.eye(cfg.N)
    return spd_solve(G, means.EH).T


def lls_random_jitter(samples: SampleSet, means: MeanObservationMatrix,
                      sigma_x2: float = PRIOR_VARIANCE) -> np.ndarray:
    return lls_random_jitter_operator(means, sigma_x2) @ samples.y


def lls_no_jitter_operator(config: ModelConfig, sigma_x2: float = PRIOR_VARIANCE) -> np.ndarray:
    if sigma_x2 <= 0:
        raise ValueError("sigma_x2 must be positive")
    H0 = _h0(config)
    # H0^T (H0 H0^T + lam I)^-1 == (H0^T H0 + lam I)^-1 H0^T, the K x K form is better conditioned
    lam = config.sigma_w ** 2 / sigma_x2
    return spd_solve(H0.T @ H0 + lam * np.eye(config.K), H0.T)


def lls_no_jitter(samples: SampleSet, sigma_x2: float = PRIOR_VARIANCE) -> np.ndarray:
    return lls_no_jitter_operator(samples.config, sigma_x2) @ samples.y


def lls_no_jitter_error_variance(config: ModelConfig, sigma_x2: float = PRIOR_VARIANCE) -> float:
    """Per-coefficient error variance sigma_w^2 / (M + sigma_w^2 / sigma_x^2)."""
    return config.sigma_w ** 2 / (config.M + config.sigma_w ** 2 / sigma_x2)
