"""Periodic-sinc signal model with jittered, noisy samples.

The n-th sample of a K-coefficient signal oversampled by M is

    y_n = sum_k psinc_K(n/M + z_n - k) x_k + w_n,

with z_n ~ N(0, sigma_z^2) timing jitter (in critical sampling periods) and
w_n ~ N(0, sigma_w^2) additive noise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._rng import as_generator
from .errors import ConfigError

# |sin(pi t / K)| below this is treated as the removable singularity at t = jK
SINGULARITY_EPS = 1e-9


@dataclass(frozen=True)
class ModelConfig:
    """Problem dimensions and noise scales shared by every estimator."""

    K: int
    M: int
    sigma_z: float
    sigma_w: float

    def __post_init__(self):
        for name in ("K", "M"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("sigma_z", "sigma_w"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and nonnegative, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def N(self) -> int:
        return self.M * self.K

    def sample_times(self) -> np.ndarray:
        return np.arange(self.N) / self.M

    def replace(self, **changes) -> "ModelConfig":
        d = self.to_dict()
        d.pop("N")
        d.update(changes)
        return ModelConfig(**d)

    def to_dict(self) -> dict:
        return {"K": self.K, "M": self.M, "N": self.N,
                "sigma_z": self.sigma_z, "sigma_w": self.sigma_w}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls(K=d["K"], M=d["M"], sigma_z=d["sigma_z"], sigma_w=d["sigma_w"])
        if "N" in d and int(d["N"]) != cfg.N:
            raise ConfigError(f"N={d['N']} inconsistent with M*K={cfg.N}")
        return cfg


def psinc(t, K: int):
    """Periodic sinc ``sin(pi t) / (K sin(pi t / K))``.

    At t = jK the removable singularity is replaced by its limit
    ``(-1)**(j*(K-1))``; for even K the kernel is anti-periodic in K.
    Scalars in, float out; arrays in, array out.
    """
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    arr = np.asarray(t, dtype=float)
    den = np.sin(np.pi * arr / K)
    sing = np.abs(den) < SINGULARITY_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sin(np.pi * arr) / (K * den)
    if np.any(sing):
        j = np.rint(arr[sing] / K) if arr.ndim else np.rint(arr / K)
        limit = np.where((j * (K - 1)) % 2 == 0, 1.0, -1.0)
        if arr.ndim:
            out[sing] = limit
        else:
            out = limit
    if arr.ndim == 0:
        return float(out)
    return out


def build_observation_matrix(z, config: ModelConfig,
                             kernel: Callable = psinc) -> np.ndarray:
    """H(z) with ``H[n, k] = kernel(n/M + z_n - k, K)``.

    ``kernel`` defaults to the periodic sinc; any vectorized ``(t, K) -> value``
    basis generator can be substituted.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (config.N,):
        raise ConfigError(f"jitter vector has shape {z.shape}, expected ({config.N},)")
    t = config.sample_times() + z
    return kernel(t[:, None] - np.arange(config.K)[None, :], config.K)


def node_rows(config: ModelConfig, offsets, kernel: Callable = psinc) -> np.ndarray:
    """Rows h_n(z) for every sample n and every jitter value in ``offsets``.

    Returns an (N, I, K) tensor; used to evaluate quadrature sums over z.
    """
    offsets = np.asarray(offsets, dtype=float)
    t = config.sample_times()[:, None, None] + offsets[None, :, None]
    return kernel(t - np.arange(config.K)[None, None, :], config.K)


@dataclass(eq=False)
class SampleSet:
    """Observed samples plus, for synthetic data, the hidden jitter."""

    y: np.ndarray
    config: ModelConfig
    seed: Optional[int] = None
    z_true: Optional[np.ndarray] = None
    x_true: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape != (self.config.N,):
            raise ConfigError(f"y has shape {self.y.shape}, expected ({self.config.N},)")
        if self.z_true is not None:
            self.z_true = np.asarray(self.z_true, dtype=float)
            if self.z_true.shape != (self.config.N,):
                raise ConfigError("z_true length must equal N")
        if self.x_true is not None:
            self.x_true = np.asarray(self.x_true, dtype=float)
            if self.x_true.shape != (self.config.K,):
                raise ConfigError("x_true length must equal K")

    def to_dict(self) -> dict:
        d = {"config": self.config.to_dict(), "seed": self.seed, "y": self.y.tolist()}
        if self.z_true is not None:
            d["z_true"] = self.z_true.tolist()
        if self.x_true is not None:
            d["x_true"] = self.x_true.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SampleSet":
        return cls(
            y=np.array(d["y"], dtype=float),
            config=ModelConfig.from_dict(d["config"]),
            seed=d.get("seed"),
            z_true=None if d.get("z_true") is None else np.array(d["z_true"], dtype=float),
            x_true=None if d.get("x_true") is None else np.array(d["x_true"], dtype=float),
        )

    def to_json(self) -> str:
        # json writes floats with repr(), which round-trips doubles exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SampleSet":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        import hashlib
        return hashlib.sha256(np.ascontiguousarray(self.y).tobytes()).hexdigest()


def generate_samples(x, config: ModelConfig, seed) -> SampleSet:
    """Draw jitter and noise from the stream seeded by ``seed`` and return y = H(z)x + w."""
    x = np.asarray(x, dtype=float)
    if x.shape != (config.K,):
        raise ConfigError(f"x has shape {x.shape}, expected ({config.K},)")
    rng = as_generator(seed)
    z = config.sigma_z * rng.standard_normal(config.N)
    w = config.sigma_w * rng.standard_normal(config.N)
    if config.sigma_z == 0:
        z = np.zeros(config.N)
    y = build_observation_matrix(z, config) @ x + w
    return SampleSet(y=y, config=config, seed=None if isinstance(seed, np.random.Generator) else seed,
                     z_true=z, x_true=x.copy())


def draw_prior_parameters(K: int, seed) -> np.ndarray:
    """i.i.d. Uniform(-1, 1) coefficients."""
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    return as_generator(seed).uniform(-1.0, 1.0, size=K)
