import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dejitter.errors import ConfigError
from dejitter.signal_model import (ModelConfig, SampleSet, build_observation_matrix,
                                   draw_prior_parameters, generate_samples, node_rows, psinc)

Ks = st.integers(1, 12)
Ms = st.integers(1, 8)


def direct_psinc(t, K):
    return np.sin(np.pi * t) / (K * np.sin(np.pi * t / K))


def test_psinc_at_zero_and_integers():
    assert psinc(0.0, 10) == 1.0
    for j in range(1, 10):
        assert abs(psinc(float(j), 10)) < 1e-15
    assert psinc(0.0, 1) == 1.0


def test_psinc_scalar_returns_float():
    assert isinstance(psinc(0.3, 5), float)
    assert psinc(np.array([0.3]), 5).shape == (1,)


def test_psinc_even_k_is_antiperiodic():
    # the closed form gives sin(pi K) / (K sin(pi)) -> (-1)^(K-1) at t = K
    assert psinc(10.0, 10) == -1.0
    assert psinc(9.0, 9) == 1.0
    assert psinc(20.0, 10) == 1.0


@given(t=st.floats(-30, 30), K=Ks)
def test_psinc_shift_by_K(t, K):
    sign = 1.0 if K % 2 else -1.0
    assert psinc(t + K, K) == pytest.approx(sign * psinc(t, K), abs=1e-9)


@given(t=st.floats(-30, 30), K=st.integers(1, 12).filter(lambda k: k % 2 == 1))
def test_psinc_periodic_for_odd_K(t, K):
    assert psinc(t + K, K) == pytest.approx(psinc(t, K), abs=1e-9)


@given(t=st.floats(-20, 20), K=Ks)
def test_psinc_matches_direct_formula_away_from_singularity(t, K):
    if abs(np.sin(np.pi * t / K)) < 1e-6:
        return
    assert psinc(t, K) == pytest.approx(direct_psinc(t, K), rel=1e-9, abs=1e-12)


def test_psinc_continuous_across_singularity():
    for K in (3, 4, 10):
        for j in (0, 1, -2):
            t = j * K
            assert psinc(t + 1e-7, K) == pytest.approx(psinc(float(t), K), abs=1e-6)


def test_psinc_rejects_bad_K():
    with pytest.raises(ConfigError):
        psinc(0.1, 0)


@given(K=Ks, M=Ms)
def test_unjittered_matrix_orthogonality(K, M):
    cfg = ModelConfig(K, M, 0.0, 0.1)
    H = build_observation_matrix(np.zeros(cfg.N), cfg)
    assert H.shape == (M * K, K)
    assert np.allclose(np.sum(H * H, axis=1), 1.0, atol=1e-12)
    assert np.allclose(H.T @ H, M * np.eye(K), atol=1e-10)


def test_matrix_entries_follow_definition():
    cfg = ModelConfig(3, 2, 0.1, 0.1)
    z = np.linspace(-0.2, 0.2, cfg.N)
    H = build_observation_matrix(z, cfg)
    for n in range(cfg.N):
        for k in range(cfg.K):
            assert H[n, k] == pytest.approx(psinc(n / cfg.M + z[n] - k, cfg.K), abs=1e-15)


def test_custom_kernel():
    cfg = ModelConfig(2, 2, 0.0, 0.1)
    H = build_observation_matrix(np.zeros(4), cfg, kernel=lambda t, K: np.ones_like(t))
    assert np.all(H == 1.0)


def test_node_rows_matches_matrix():
    cfg = ModelConfig(4, 3, 0.1, 0.1)
    offs = np.array([-0.1, 0.0, 0.25])
    T = node_rows(cfg, offs)
    for i, o in enumerate(offs):
        assert np.allclose(T[:, i, :], build_observation_matrix(np.full(cfg.N, o), cfg))


def test_wrong_jitter_length():
    with pytest.raises(ConfigError):
        build_observation_matrix(np.zeros(3), ModelConfig(2, 2, 0, 0.1))


@pytest.mark.parametrize("kw", [dict(K=0, M=1, sigma_z=0, sigma_w=1), dict(K=2, M=0, sigma_z=0, sigma_w=1),
                                dict(K=2, M=1, sigma_z=-1, sigma_w=1), dict(K=2, M=1, sigma_z=0, sigma_w=np.nan),
                                dict(K=2.5, M=1, sigma_z=0, sigma_w=1), dict(K=True, M=1, sigma_z=0, sigma_w=1)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ModelConfig(**kw)


def test_config_dict_roundtrip_and_N_check():
    cfg = ModelConfig(10, 16, 0.1, 0.05)
    assert cfg.N == 160
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    d = cfg.to_dict()
    d["N"] = 161
    with pytest.raises(ConfigError):
        ModelConfig.from_dict(d)
    assert cfg.replace(sigma_z=0.0).sigma_z == 0.0


@given(ys=st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=6, max_size=6),
       seed=st.integers(0, 2 ** 62))
def test_sampleset_json_roundtrip_is_lossless(ys, seed):
    cfg = ModelConfig(3, 2, 0.2, 0.1)
    s = SampleSet(y=np.array(ys), config=cfg, seed=seed, z_true=np.array(ys) * 1e-3)
    back = SampleSet.from_json(s.to_json())
    assert np.array_equal(back.y, s.y)
    assert np.array_equal(back.z_true, s.z_true)
    assert back.seed == seed and back.config == cfg


def test_sampleset_json_fields():
    s = generate_samples(np.array([0.5, -0.5]), ModelConfig(2, 2, 0.1, 0.1), 1)
    d = json.loads(s.to_json())
    assert {"config", "seed", "y", "z_true"} <= set(d)


def test_sampleset_shape_checks():
    cfg = ModelConfig(2, 2, 0.1, 0.1)
    with pytest.raises(ConfigError):
        SampleSet(y=np.zeros(3), config=cfg)
    with pytest.raises(ConfigError):
        SampleSet(y=np.zeros(4), config=cfg, z_true=np.zeros(2))


def test_generate_samples_model_and_determinism():
    cfg = ModelConfig(4, 3, 0.2, 0.05)
    x = np.array([0.1, -0.4, 0.9, 0.0])
    a = generate_samples(x, cfg, 42)
    b = generate_samples(x, cfg, 42)
    assert np.array_equal(a.y, b.y) and a.digest() == b.digest()
    rng = np.random.Generator(np.random.PCG64(42))
    z = 0.2 * rng.standard_normal(cfg.N)
    w = 0.05 * rng.standard_normal(cfg.N)
    assert np.array_equal(a.z_true, z)
    assert np.allclose(a.y, build_observation_matrix(z, cfg) @ x + w, atol=1e-15)
    assert generate_samples(x, cfg, 43).digest() != a.digest()


def test_generate_samples_without_jitter():
    cfg = ModelConfig(2, 2, 0.0, 0.0)
    s = generate_samples(np.array([1.0, 0.0]), cfg, 0)
    assert np.all(s.z_true == 0)
    assert np.allclose(s.y, build_observation_matrix(np.zeros(4), cfg) @ [1.0, 0.0])


def test_prior_draws():
    x = draw_prior_parameters(1000, 3)
    assert x.shape == (1000,) and np.all(np.abs(x) <= 1)
    assert abs(x.mean()) < 0.1 and abs(x.var() - 1 / 3) < 0.05
