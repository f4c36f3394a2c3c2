import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial.hermite_e import hermegauss

from dejitter.errors import ConfigError
from dejitter.quadrature import MAX_ORDER, effective_rule, expect_gaussian, gauss_hermite_rule


def normal_moment(k):
    return 0.0 if k % 2 else float(math.prod(range(k - 1, 0, -2)))


def test_low_orders():
    r1 = gauss_hermite_rule(1)
    assert r1.nodes.tolist() == [0.0] and r1.weights.tolist() == [1.0]
    r2 = gauss_hermite_rule(2)
    assert np.allclose(r2.nodes, [-1, 1], atol=1e-14) and np.allclose(r2.weights, [0.5, 0.5], atol=1e-14)
    r3 = gauss_hermite_rule(3)
    assert np.allclose(r3.nodes, [-math.sqrt(3), 0, math.sqrt(3)], atol=1e-14)
    assert np.allclose(r3.weights, [1 / 6, 2 / 3, 1 / 6], atol=1e-14)


@pytest.mark.parametrize("order", [1, 2, 5, 20, 50, 100])
def test_rule_invariants(order):
    r = gauss_hermite_rule(order)
    assert r.order == order
    assert abs(r.weights.sum() - 1) < 1e-12
    assert np.all(r.weights > 0)
    assert np.all(np.diff(r.nodes) > 0)
    assert np.allclose(r.nodes, -r.nodes[::-1], atol=1e-12)


@pytest.mark.parametrize("order", [4, 10, 20, 40])
def test_matches_numpy_hermegauss(order):
    x, w = hermegauss(order)
    r = gauss_hermite_rule(order)
    assert np.allclose(r.nodes, x, atol=1e-10)
    assert np.allclose(r.weights, w / w.sum(), rtol=1e-8, atol=1e-16)


@pytest.mark.parametrize("order", range(2, 21))
def test_polynomial_exactness(order):
    r = gauss_hermite_rule(order)
    for k in range(2 * order):
        got = expect_gaussian(lambda x: x ** k, 0.0, 1.0, r)
        scale = max(1.0, normal_moment(k + 1 if k % 2 else k))
        assert abs(got - normal_moment(k)) <= 1e-10 * scale, (order, k)


@pytest.mark.parametrize("bad", [0, 101, -1, 2.5, True])
def test_order_range(bad):
    with pytest.raises(ConfigError):
        gauss_hermite_rule(bad)
    assert MAX_ORDER == 100


def test_expect_gaussian_examples():
    r = gauss_hermite_rule(20)
    assert expect_gaussian(lambda x: x, 3.0, 2.0, gauss_hermite_rule(1)) == pytest.approx(3.0)
    assert expect_gaussian(lambda x: x * x, 0.0, 1.0, gauss_hermite_rule(2)) == pytest.approx(1.0, abs=1e-14)
    assert expect_gaussian(lambda x: x ** 4, 0.0, 1.0, gauss_hermite_rule(3)) == pytest.approx(3.0, abs=1e-13)
    assert expect_gaussian(np.cos, 0.0, 1.0, r) == pytest.approx(math.exp(-0.5), abs=1e-12)


@given(mu=st.floats(-5, 5), c=st.floats(-3, 3))
def test_sigma_zero_is_exact(mu, c):
    f = lambda x: c * x ** 3 + math.sin(x)
    assert expect_gaussian(f, mu, 0.0, gauss_hermite_rule(5)) == f(mu)


def test_vector_valued_and_scalar_only_functions():
    r = gauss_hermite_rule(10)
    v = expect_gaussian(lambda x: np.stack([x, x ** 2], axis=-1), 1.0, 2.0, r)
    assert np.allclose(v, [1.0, 5.0])
    s = expect_gaussian(lambda x: math.exp(x), 0.0, 0.5, r)
    assert s == pytest.approx(math.exp(0.125), rel=1e-12)


def test_effective_rule_collapses():
    r = gauss_hermite_rule(7)
    assert effective_rule(r, 0.0).order == 1
    assert effective_rule(r, 0.1) is r


def test_negative_sigma():
    with pytest.raises(ConfigError):
        expect_gaussian(lambda x: x, 0, -1, gauss_hermite_rule(2))
