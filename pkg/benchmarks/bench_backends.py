"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_backends.py [--repeat 3]

Times the three hot paths (truncated-normal draws, conditional jitter draws
and a full Gibbs sweep) on both backends and checks that they return the same
numbers.
"""
import argparse
import time

import numpy as np

from dejitter import _core
from dejitter.signal_model import ModelConfig, draw_prior_parameters, generate_samples


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(mod, cfg, samples, x0):
    def truncnorm():
        return mod.truncnorm_draws(0.3, 0.2, -1.0, 1.0, 20_000, np.random.default_rng(0), _core.new_stats())

    def z_draws(mode):
        def run():
            starts = np.zeros(2000)
            return mod.z_draws(5, starts, x0, samples.y[5], cfg.K, cfg.M, cfg.sigma_z, cfg.sigma_w,
                               mode, 10_000, np.random.default_rng(1), _core.new_stats())
        return run

    def sweeps(mode, n=20):
        def run():
            x, z = x0.copy(), np.zeros(cfg.N)
            H, r = np.empty((cfg.N, cfg.K)), np.empty(cfg.N)
            rng, st = np.random.default_rng(2), _core.new_stats()
            for _ in range(n):
                mod.gibbs_sweep(samples.y, x, z, H, r, cfg.K, cfg.M, cfg.sigma_z, cfg.sigma_w,
                                mode, 10_000, rng, st, True)
            return np.concatenate([x, z])
        return run

    return {
        "truncnorm x20000": truncnorm,
        "z rejection x2000": z_draws(0),
        "z slice x2000": z_draws(1),
        "gibbs sweep rejection x20": sweeps(0),
        "gibbs sweep slice x20": sweeps(1),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    try:
        cy = _core.get_backend("cython")
    except ImportError:
        print("compiled kernels are not built; nothing to compare")
        return 1
    py = _core.get_backend("python")
    cfg = ModelConfig(10, 16, 0.2, 0.05)
    x0 = draw_prior_parameters(cfg.K, 0)
    samples = generate_samples(x0, cfg, 1)

    c_cy, c_py = cases(cy, cfg, samples, x0), cases(py, cfg, samples, x0)
    print(f"{'case':28s} {'cython (s)':>11s} {'python (s)':>11s} {'speedup':>8s}  identical")
    for name in c_cy:
        t_cy, a = best_of(c_cy[name], args.repeat)
        t_py, b = best_of(c_py[name], args.repeat)
        print(f"{name:28s} {t_cy:11.4f} {t_py:11.4f} {t_py / t_cy:8.1f}  {np.array_equal(a, b)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
