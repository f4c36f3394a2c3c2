"""Maximum-likelihood estimation by EM, treating the jitter as missing data.

Each E-step evaluates per-sample posteriors over the Gauss-Hermite jitter
nodes; the M-step solves the resulting K x K linear system.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from ._rng import stream
from .errors import ConfigError
from .linear_estimators import efficient_no_jitter
from .quadrature import DEFAULT_ORDER, QuadratureRule, effective_rule, gauss_hermite_rule
from .signal_model import ModelConfig, SampleSet, draw_prior_parameters, node_rows, psinc

LOG_2PI = np.log(2 * np.pi)


@dataclass
class EmSettings:
    quad_order: int = DEFAULT_ORDER
    max_iters: int = 500
    tol: float = 1e-8
    init: Union[str, np.ndarray] = "no-jitter-linear"
    restarts: int = 0  # extra random starts from the prior; best likelihood wins
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.restarts < 0:
            raise ConfigError("restarts must be >= 0")
        if isinstance(self.init, str) and self.init != "no-jitter-linear":
            raise ConfigError(f"unknown init {self.init!r}")


@dataclass
class EmTrace:
    estimates: list = field(default_factory=list)
    loglik: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "estimates": [np.asarray(e).tolist() for e in self.estimates],
            "loglik": [None if not np.isfinite(v) else float(v) for v in self.loglik],
            "iterations_run": self.iterations_run,
            "converged": self.converged,
            "warnings": list(self.warnings),
        }


class JitterPosterior:
    """Quadrature-discretized jitter model for one data set.

    Holds the (N, I, K) tensor of rows h_n(sigma_z x_i) so repeated E-steps
    only cost a few tensor contractions.
    """

    def __init__(self, samples: SampleSet, rule: QuadratureRule | None = None):
        cfg = samples.config
        self.config = cfg
        self.y = samples.y
        self.rule = effective_rule(rule or gauss_hermite_rule(), cfg.sigma_z)
        if cfg.sigma_w == 0 and self.rule.order > 1:
            raise ConfigError("EM with jitter requires sigma_w > 0")
        self.T = node_rows(cfg, cfg.sigma_z * self.rule.nodes)
        self.logw = np.log(self.rule.weights)

    def weights(self, x):
        """Posterior node weights (N, I), the quadrature log-likelihood and the count of
        samples whose weights fell back to the prior."""
        cfg = self.config
        if self.rule.order == 1:
            post = np.ones((cfg.N, 1))
            if cfg.sigma_w == 0:
                return post, np.nan, 0
            r = self.y - self.T[:, 0, :] @ x
            ll = -0.5 * np.sum(r * r) / cfg.sigma_w ** 2 - 0.5 * cfg.N * (LOG_2PI + 2 * np.log(cfg.sigma_w))
            return post, ll, 0
        r = self.y[:, None] - self.T @ x
        with np.errstate(over="ignore"):
            logp = self.logw[None, :] - 0.5 * r * r / cfg.sigma_w ** 2
        shift = logp.max(axis=1, keepdims=True)
        bad = ~np.isfinite(shift[:, 0])
        if np.any(bad):
            logp[bad] = self.logw
            shift[bad] = self.logw.max()
        p = np.exp(logp - shift)
        s = p.sum(axis=1, keepdims=True)
        post = p / s
        ll = float(np.sum(shift[:, 0] + np.log(s[:, 0]))) - 0.5 * cfg.N * (LOG_2PI + 2 * np.log(cfg.sigma_w))
        return post, ll, int(bad.sum())

    def log_likelihood(self, x) -> float:
        return self.weights(np.asarray(x, dtype=float))[1]

    def e_step(self, x):
        post, ll, nbad = self.weights(np.asarray(x, dtype=float))
        K = self.config.K
        Tw = self.T * post[:, :, None]
        A = Tw.reshape(-1, K).T @ self.T.reshape(-1, K)
        A = 0.5 * (A + A.T)
        b = np.einsum("n,njk->k", self.y, Tw)
        return A, b, ll, nbad


def singleton_likelihood(y_n: float, n: int, x, config: ModelConfig,
                         rule: QuadratureRule | None = None) -> float:
    """Quadrature approximation of p(y_n; x) = E_z[N(y_n; h_n(z)^T x, sigma_w^2)]."""
    return float(np.exp(log_singleton_likelihood(y_n, n, x, config, rule)))


def log_singleton_likelihood(y_n, n, x, config: ModelConfig, rule: QuadratureRule | None = None) -> float:
    if config.sigma_w <= 0:
        raise ConfigError("singleton likelihood requires sigma_w > 0")
    rule = effective_rule(rule or gauss_hermite_rule(), config.sigma_z)
    t = n / config.M + config.sigma_z * rule.nodes
    h = psinc(t[:, None] - np.arange(config.K)[None, :], config.K)
    r = y_n - h @ np.asarray(x, dtype=float)
    logp = np.log(rule.weights) - 0.5 * r * r / config.sigma_w ** 2
    return float(logsumexp(logp) - 0.5 * (LOG_2PI + 2 * np.log(config.sigma_w)))


def log_likelihood(samples: SampleSet, x, rule: QuadratureRule | None = None) -> float:
    return JitterPosterior(samples, rule).log_likelihood(x)


def em_e_step(samples: SampleSet, x_prev, rule: QuadratureRule | None = None):
    """Return ``(A, b)`` with A = sum_n E[h_n h_n^T | y_n; x_prev] and b = E[H | y; x_prev]^T y."""
    A, b, _, _ = JitterPosterior(samples, rule).e_step(x_prev)
    return A, b


def _m_step(A, b, trace: EmTrace):
    try:
        return linalg.cho_solve(linalg.cho_factor(A, lower=True), b)
    except linalg.LinAlgError:
        trace.warnings.append(f"iteration {trace.iterations_run}: singular E-step matrix, "
                              "used least squares")
        return linalg.lstsq(A, b, lapack_driver="gelsy")[0]


def _run_from(post: JitterPosterior, x0, settings: EmSettings):
    trace = EmTrace()
    x = np.asarray(x0, dtype=float).copy()
    A, b, ll, nbad = post.e_step(x)
    trace.estimates.append(x.copy())
    trace.loglik.append(ll)
    for it in range(1, settings.max_iters + 1):
        if nbad:
            trace.warnings.append(f"iteration {it}: {nbad} samples used prior jitter weights")
        x_new = _m_step(A, b, trace)
        trace.iterations_run = it
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x), 1.0)
        x = x_new
        A, b, ll, nbad = post.e_step(x)
        trace.estimates.append(x.copy())
        trace.loglik.append(ll)
        if change < settings.tol:
            trace.converged = True
            break
    return x, trace


def em_run(samples: SampleSet, settings: EmSettings | None = None,
           rule: QuadratureRule | None = None):
    """Iterate EM to a stationary point of the quadrature likelihood.

    Returns ``(x_hat, trace)``. With ``settings.restarts > 0`` extra chains
    start from prior draws and the run with the highest final log-likelihood
    is returned.
    """
    settings = settings or EmSettings()
    rule = rule or gauss_hermite_rule(settings.quad_order)
    post = JitterPosterior(samples, rule)
    if isinstance(settings.init, str):
        x0 = efficient_no_jitter(samples)
    else:
        x0 = np.asarray(settings.init, dtype=float)
        if x0.shape != (samples.config.K,):
            raise ConfigError("init has the wrong length")
    best_x, best = _run_from(post, x0, settings)
    for r in range(settings.restarts):
        x_r, tr = _run_from(post, draw_prior_parameters(samples.config.K, stream(settings.seed, r)), settings)
        if tr.loglik[-1] > best.loglik[-1]:
            best_x, best = x_r, tr
    return best_x, best
