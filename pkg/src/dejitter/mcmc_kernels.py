"""One-dimensional sampling primitives: envelope rejection, truncated normal, slice.

The truncated-normal sampler runs in the compiled core (with the pure-Python
mirror as fallback); the generic rejection and slice samplers take arbitrary
Python log-densities and are used for testing and for one-off draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _core
from ._rng import as_generator
from .errors import AcceptanceTooLowError, ConfigError, EnvelopeError, SamplerError

ENVELOPE_SLACK = 1e-9
MIN_SLICE_WIDTH = 1e-15
TAIL_THRESHOLD = 4.0
NARROW_WIDTH = 0.2


@dataclass(frozen=True)
class TruncNormSpec:
    """N(mu, sigma^2) restricted to [lo, hi]."""

    mu: float
    sigma: float
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.sigma > 0 and np.isfinite(self.sigma)):
            raise ConfigError("need finite mu and positive finite sigma")
        if not self.lo < self.hi:
            raise ConfigError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    def standardized(self):
        return (self.lo - self.mu) / self.sigma, (self.hi - self.mu) / self.sigma


def truncnorm_regime(spec: TruncNormSpec) -> str:
    """Which proposal the sampler uses: ``"uniform"``, ``"exponential"`` or ``"inversion"``.

    Narrow intervals, where the density is almost flat, use a uniform proposal;
    intervals entirely beyond 4 standard deviations use the exponential tail
    sampler; everything else inverts the normal cdf.
    """
    a, b = spec.standardized()
    m = a if a > 0 else (-b if b < 0 else 0.0)
    if b - a < NARROW_WIDTH and (b - a) * m < 1.0:
        return "uniform"
    if a > TAIL_THRESHOLD or b < -TAIL_THRESHOLD:
        return "exponential"
    return "inversion"


def optimal_exponential_rate(a: float) -> float:
    """Rate of the shifted-exponential proposal for the tail [a, inf) of N(0, 1)."""
    return 0.5 * (a + math.sqrt(a * a + 4.0))


def sample_truncated_normal(spec: TruncNormSpec, seed=None, stats=None) -> float:
    return float(sample_truncated_normal_batch(spec, 1, seed, stats)[0])


def sample_truncated_normal_batch(spec: TruncNormSpec, n: int, seed=None, stats=None,
                                  backend=None) -> np.ndarray:
    """``n`` independent draws; ``stats`` (from ``_core.new_stats()``) collects regime counters."""
    st = _core.new_stats() if stats is None else stats
    k = _core.get_backend(backend)
    return k.truncnorm_draws(spec.mu, spec.sigma, spec.lo, spec.hi, int(n), as_generator(seed), st)


def rejection_sample(log_target: Callable[[float], float],
                     proposal_sampler: Callable[[np.random.Generator], float],
                     log_proposal: Callable[[float], float], log_c: float,
                     seed=None, max_tries: int = 10_000):
    """Draw from ``exp(log_target)`` using proposals scaled by ``exp(log_c)``.

    Returns ``(x, tries)``. Raises EnvelopeError when the envelope is found to
    be violated and AcceptanceTooLowError after ``max_tries`` proposals.
    """
    if max_tries < 1:
        raise ConfigError("max_tries must be >= 1")
    rng = as_generator(seed)
    for tries in range(1, max_tries + 1):
        x = proposal_sampler(rng)
        la = log_target(x) - log_c - log_proposal(x)
        if la > ENVELOPE_SLACK:
            raise EnvelopeError(f"envelope violated at x={x!r}: log ratio {la:.3g}")
        if rng.random() < math.exp(la):
            return x, tries
    raise AcceptanceTooLowError(f"no acceptance in {max_tries} proposals")


@dataclass
class SliceState:
    current: float
    log_density: Callable[[float], float]
    initial_interval: tuple
    n_shrinks: int = 0
    widths: list = field(default_factory=list)

    def __post_init__(self):
        lo, hi = self.initial_interval
        if not lo <= self.current <= hi:
            raise ConfigError("current point lies outside the initial interval")
        if not self.log_density(self.current) > -math.inf:
            raise ConfigError("log density is -inf at the current point")


def shrink_interval(L: float, R: float, x0: float, x_rejected: float):
    """Replace the side of [L, R] beyond the rejected point, keeping x0 inside."""
    if x_rejected < x0:
        return x_rejected, R
    return L, x_rejected


def slice_sample_step(state: SliceState, seed=None, record_widths: bool = False) -> SliceState:
    """One slice-sampling update with shrinkage starting from ``initial_interval``."""
    rng = as_generator(seed)
    x0 = state.current
    log_u = state.log_density(x0) + math.log1p(-rng.random())
    L, R = state.initial_interval
    widths = [R - L] if record_widths else []
    shrinks = 0
    while True:
        x = L + (R - L) * rng.random()
        if state.log_density(x) >= log_u:
            return replace(state, current=x, n_shrinks=shrinks, widths=widths)
        L, R = shrink_interval(L, R, x0, x)
        shrinks += 1
        if record_widths:
            widths.append(R - L)
        if R - L < MIN_SLICE_WIDTH:
            raise SamplerError("slice interval collapsed without finding the slice")
