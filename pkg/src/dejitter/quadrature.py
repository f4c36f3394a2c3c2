"""Gauss-Hermite rules for the standard normal weight.

Nodes come from the eigenvalues of the probabilists' Hermite Jacobi matrix
(zero diagonal, off-diagonal sqrt(k)); weights are the matching Christoffel
numbers, normalized to sum to one.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import ConfigError

MAX_ORDER = 100
DEFAULT_ORDER = 20


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)

    def scaled(self, mu: float, sigma: float) -> np.ndarray:
        return sigma * self.nodes + mu


@lru_cache(maxsize=None)
def _rule_arrays(order: int):
    if order == 1:
        return np.zeros(1), np.ones(1)
    off = np.sqrt(np.arange(1, order, dtype=float))
    nodes = eigvalsh_tridiagonal(np.zeros(order), off)
    # orthonormal Hermite recurrence -> Christoffel numbers 1 / sum_k p_k(x)^2
    p_prev = np.zeros(order)
    p = np.ones(order)
    acc = np.ones(order)
    for k in range(order - 1):
        p_next = (nodes * p - np.sqrt(k) * p_prev) / np.sqrt(k + 1)
        p_prev, p = p, p_next
        acc += p * p
    weights = 1.0 / acc
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def gauss_hermite_rule(order: int = DEFAULT_ORDER) -> QuadratureRule:
    """Probabilists' Gauss-Hermite rule with ``order`` nodes, weights summing to 1."""
    if isinstance(order, bool) or int(order) != order or not 1 <= order <= MAX_ORDER:
        raise ConfigError(f"quadrature order must be an integer in [1, {MAX_ORDER}], got {order!r}")
    nodes, weights = _rule_arrays(int(order))
    return QuadratureRule(nodes=nodes, weights=weights)


POINT_RULE = QuadratureRule(nodes=np.zeros(1), weights=np.ones(1))


def effective_rule(rule: QuadratureRule, sigma: float) -> QuadratureRule:
    """Collapse to the single node 0 when the Gaussian is degenerate."""
    return POINT_RULE if sigma == 0 else rule


def expect_gaussian(f, mu: float, sigma: float, rule: QuadratureRule):
    """Approximate E[f(X)] for X ~ N(mu, sigma^2) as sum_i w_i f(sigma x_i + mu).

    ``f`` may return scalars or arrays; array-valued ``f`` must map the node
    vector to an array whose leading axis indexes nodes. With ``sigma == 0``
    the result is exactly ``f(mu)``.
    """
    if sigma < 0:
        raise ConfigError("sigma must be nonnegative")
    if sigma == 0:
        return f(mu)
    pts = rule.scaled(mu, sigma)
    try:
        vals = np.asarray(f(pts), dtype=float)
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape[:1] != pts.shape:
        vals = np.array([f(p) for p in pts], dtype=float)
    out = np.tensordot(rule.weights, vals, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out
