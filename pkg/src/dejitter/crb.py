"""Monte Carlo Cramer-Rao bound for the random-jitter model.

Quadrature turns each singleton likelihood p(y_n; x) into a Gaussian mixture
sum_i w_i N(h_n(sigma_z x_i)^T x, sigma_w^2). The Fisher information is the
sum over n of E[score score^T] under that mixture, estimated by drawing Ns
samples per index from the mixture itself.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .errors import ConfigError, SingularFisherError
from .quadrature import DEFAULT_ORDER, QuadratureRule, effective_rule, gauss_hermite_rule
from .signal_model import ModelConfig, node_rows


@dataclass(frozen=True, eq=False)
class FisherEstimate:
    I_y: np.ndarray
    Ns: int
    quad_order: int
    seed: int

    @property
    def crb(self) -> float:
        return crb_trace(self)

    def to_dict(self) -> dict:
        return {"I_y": self.I_y.tolist(), "Ns": self.Ns, "quad_order": self.quad_order,
                "seed": self.seed}


def _mixture_scores(ys, rows, logw, x, sigma_w):
    """Scores d/dx log p(y; x) at each y in ``ys`` for one sample index.

    ``rows`` holds the (I, K) node rows h_n(sigma_z x_i). Returns (S, K) scores
    and a mask of samples whose mixture density underflowed.
    """
    mu = rows @ x  # (I,)
    e = (ys[:, None] - mu[None, :]) / sigma_w ** 2  # (S, I)
    logp = logw[None, :] - 0.5 * (ys[:, None] - mu[None, :]) ** 2 / sigma_w ** 2
    shift = logp.max(axis=1, keepdims=True)
    bad = ~np.isfinite(shift[:, 0])
    shift[bad] = 0.0
    p = np.exp(logp - shift)
    p /= p.sum(axis=1, keepdims=True)
    scores = (p * e) @ rows
    scores[bad] = 0.0
    return scores, bad


def _check(config: ModelConfig):
    if config.sigma_w <= 0:
        raise ConfigError("Fisher information requires sigma_w > 0")


def score_at_sample(y_s: float, n: int, x, config: ModelConfig,
                    rule: QuadratureRule | None = None) -> np.ndarray:
    """Quadrature approximation of the score of the singleton likelihood at ``y_s``."""
    _check(config)
    rule = effective_rule(rule or gauss_hermite_rule(), config.sigma_z)
    rows = node_rows(config, config.sigma_z * rule.nodes)[n]
    s, bad = _mixture_scores(np.array([float(y_s)]), rows, np.log(rule.weights),
                             np.asarray(x, dtype=float), config.sigma_w)
    if bad[0]:
        warnings.warn("mixture density underflowed; returning zero score", RuntimeWarning, stacklevel=2)
    return s[0]


def fisher_information(x, config: ModelConfig, Ns: int = 1000,
                       rule: QuadratureRule | None = None, seed: int = 0) -> FisherEstimate:
    """Monte Carlo estimate I_y = sum_n (1/Ns) sum_s score_n(y_s) score_n(y_s)^T.

    Index n uses its own stream derived from (seed, n), so the estimate does
    not depend on evaluation order.
    """
    _check(config)
    if Ns < 1:
        raise ConfigError("Ns must be >= 1")
    x = np.asarray(x, dtype=float)
    if x.shape != (config.K,):
        raise ConfigError(f"x has shape {x.shape}, expected ({config.K},)")
    base = rule or gauss_hermite_rule()
    rule = effective_rule(base, config.sigma_z)
    T = node_rows(config, config.sigma_z * rule.nodes)
    logw = np.log(rule.weights)
    cdf = np.cumsum(rule.weights)
    I_y = np.zeros((config.K, config.K))
    n_bad = 0
    for n in range(config.N):
        rng = stream(seed, n)
        comp = np.minimum(np.searchsorted(cdf, rng.random(Ns), side="right"), rule.order - 1)
        ys = T[n, comp] @ x + config.sigma_w * rng.standard_normal(Ns)
        S, bad = _mixture_scores(ys, T[n], logw, x, config.sigma_w)
        n_bad += int(bad.sum())
        I_y += S.T @ S / Ns
    if n_bad:
        warnings.warn(f"{n_bad} mixture draws underflowed and contributed zero score",
                      RuntimeWarning, stacklevel=2)
    I_y = 0.5 * (I_y + I_y.T)
    return FisherEstimate(I_y=I_y, Ns=int(Ns), quad_order=base.order, seed=int(seed))


def crb_trace(fisher) -> float:
    """trace(I_y^-1); accepts a FisherEstimate or a bare matrix."""
    I_y = np.asarray(fisher.I_y if isinstance(fisher, FisherEstimate) else fisher, dtype=float)
    try:
        c = np.linalg.cond(I_y)
    except np.linalg.LinAlgError:
        c = np.inf
    if not np.isfinite(c) or c > 1e12:
        raise SingularFisherError(f"Fisher estimate is singular (cond={c:.3g}); increase Ns")
    return float(np.trace(np.linalg.inv(I_y)))
