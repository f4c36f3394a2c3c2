"""Gibbs sampling estimate of the posterior mean E[x | y].

The chain alternates between the jitter values, each drawn from its full
conditional by envelope rejection or slice sampling, and the coefficients,
each drawn from a normal truncated to the prior support [-1, 1]. Sweeps run
in the compiled core.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _core
from ._rng import as_generator
from .errors import ConfigError, SamplerError, TimeBudgetExceeded
from .mcmc_kernels import TruncNormSpec, sample_truncated_normal
from .signal_model import ModelConfig, SampleSet, build_observation_matrix, psinc

LOG_2PI = math.log(2 * math.pi)


@dataclass
class GibbsSettings:
    burn_in: int = 500
    samples: int = 2000
    z_sampler: str = "rejection"
    rejection_max_tries: int = 10_000
    seed: int = 0
    store_chain: bool = False
    time_budget: Optional[float] = None  # seconds per run, checked between sweeps
    backend: Optional[str] = None

    def __post_init__(self):
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.z_sampler not in _core.MODES:
            raise ConfigError(f"z_sampler must be one of {sorted(_core.MODES)}")
        if self.rejection_max_tries < 1:
            raise ConfigError("rejection_max_tries must be >= 1")


@dataclass(eq=False)
class GibbsResult:
    x_hat: np.ndarray
    z_hat: np.ndarray
    chain_x: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x_hat": self.x_hat.tolist(),
            "z_hat": self.z_hat.tolist(),
            "chain_x": None if self.chain_x is None else self.chain_x.tolist(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_noise(config: ModelConfig):
    if config.sigma_w <= 0:
        raise ConfigError("Gibbs sampling requires sigma_w > 0")


def conditional_z_logdensity(z_n, n: int, x, y_n: float, config: ModelConfig):
    """log[N(y_n; h_n(z_n)^T x, sigma_w^2) N(z_n; 0, sigma_z^2)], vectorized over ``z_n``."""
    _check_noise(config)
    z = np.asarray(z_n, dtype=float)
    h = psinc(n / config.M + z[..., None] - np.arange(config.K), config.K)
    r = y_n - h @ np.asarray(x, dtype=float)
    out = -0.5 * r * r / config.sigma_w ** 2 - 0.5 * (LOG_2PI + 2 * math.log(config.sigma_w))
    if config.sigma_z == 0:
        out = np.where(z == 0, out, -np.inf)
    else:
        out = out - 0.5 * z * z / config.sigma_z ** 2 - 0.5 * (LOG_2PI + 2 * math.log(config.sigma_z))
    return float(out) if out.ndim == 0 else out


def z_slice_bracket(log_u: float, config: ModelConfig) -> float:
    """Half-width of the interval that must contain the slice at level ``log_u``.

    ``log_u`` is on the scale of ``conditional_z_logdensity``. Both factors of
    the conditional are bounded by their Gaussian normalizers, so the slice
    lies where z^2 / (2 sigma_z^2) <= -log_u - log(2 pi sigma_w sigma_z).
    """
    arg = -2.0 * log_u - 2.0 * math.log(2 * math.pi * config.sigma_w * config.sigma_z)
    return config.sigma_z * math.sqrt(max(arg, 0.0))


def sample_z_batch(n: int, x, y_n: float, config: ModelConfig, mode: str, count: int,
                   seed=None, z_starts=None, max_tries: int = 10_000, stats=None, backend=None):
    """``count`` independent conditional draws of z_n.

    Each draw is one kernel update from the matching entry of ``z_starts``
    (zeros by default). Rejection draws ignore the start unless they fall back
    to slice sampling.
    """
    _check_noise(config)
    if config.sigma_z == 0:
        return np.zeros(count)
    st = _core.new_stats() if stats is None else stats
    starts = np.zeros(count) if z_starts is None else np.ascontiguousarray(z_starts, dtype=float)
    k = _core.get_backend(backend)
    return k.z_draws(int(n), starts, np.ascontiguousarray(x, dtype=float), float(y_n), config.K,
                     config.M, config.sigma_z, config.sigma_w, _core.MODES[mode], int(max_tries),
                     as_generator(seed), st)


def sample_z_given_rest(n: int, x, y_n: float, config: ModelConfig, settings: GibbsSettings,
                        seed=None, z_current: float = 0.0, stats=None) -> float:
    return float(sample_z_batch(n, x, y_n, config, settings.z_sampler, 1, seed,
                                z_starts=[z_current], max_tries=settings.rejection_max_tries,
                                stats=stats, backend=settings.backend)[0])


def x_conditional_params(k: int, x, z, y, config: ModelConfig):
    """Mean and std of the untruncated normal full conditional of x_k."""
    H = build_observation_matrix(z, config)
    x = np.asarray(x, dtype=float)
    hk = H[:, k]
    c = hk @ hk
    if not c > 0:
        raise SamplerError(f"column {k} of H(z) has zero norm")
    r = np.asarray(y, dtype=float) - H @ x + hk * x[k]
    return float(hk @ r / c), float(config.sigma_w / math.sqrt(c))


def sample_x_given_rest(k: int, x, z, y, config: ModelConfig, seed=None, stats=None) -> float:
    _check_noise(config)
    mu, s = x_conditional_params(k, x, z, y, config)
    return sample_truncated_normal(TruncNormSpec(mu, s, -1.0, 1.0), seed, stats)


def gibbs_run(samples: SampleSet, settings: GibbsSettings | None = None) -> GibbsResult:
    """Run one chain from z = 0, x = 0 and average the post-burn-in draws."""
    settings = settings or GibbsSettings()
    cfg = samples.config
    _check_noise(cfg)
    k = _core.get_backend(settings.backend)
    rng = as_generator(settings.seed)
    st = _core.new_stats()
    y = np.ascontiguousarray(samples.y, dtype=float)
    x = np.zeros(cfg.K)
    z = np.zeros(cfg.N)
    H = np.empty((cfg.N, cfg.K))
    r = np.empty(cfg.N)
    mode = _core.MODES[settings.z_sampler]
    update_z = cfg.sigma_z > 0
    x_sum = np.zeros(cfg.K)
    z_sum = np.zeros(cfg.N)
    chain = np.empty((settings.samples, cfg.K)) if settings.store_chain else None
    total = settings.burn_in + settings.samples
    t0 = time.perf_counter()
    for it in range(total):
        try:
            k.gibbs_sweep(y, x, z, H, r, cfg.K, cfg.M, cfg.sigma_z, cfg.sigma_w, mode,
                          settings.rejection_max_tries, rng, st, update_z)
        except SamplerError as exc:
            raise type(exc)(f"sweep {it}: {exc}") from exc
        if it >= settings.burn_in:
            x_sum += x
            z_sum += z
            if chain is not None:
                chain[it - settings.burn_in] = x
        if settings.time_budget is not None and time.perf_counter() - t0 > settings.time_budget:
            raise TimeBudgetExceeded(f"Gibbs chain exceeded {settings.time_budget}s at sweep {it}")
    diag = _core.stats_dict(st)
    tries = diag["rejection_tries"]
    diag.update(
        backend=k.BACKEND,
        z_sampler=settings.z_sampler,
        sweeps=total,
        rejection_acceptance_rate=diag["rejection_accepts"] / tries if tries else None,
        mean_shrinks_per_slice_draw=(diag["slice_shrinks"] / diag["slice_draws"]
                                     if diag["slice_draws"] else None),
        wall_time_s=time.perf_counter() - t0,
    )
    return GibbsResult(x_hat=x_sum / settings.samples, z_hat=z_sum / settings.samples,
                       chain_x=chain, diagnostics=diag)
