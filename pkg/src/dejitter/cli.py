"""Command-line entry point: ``dejitter {simulate,estimate,crb,sweep,improvement}``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 no comparable MSE range.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ._rng import derive_seed, stream
from .bayes_gibbs import GibbsSettings, gibbs_run
from .crb import crb_trace, fisher_information
from .em_ml import EmSettings, em_run
from .errors import ConfigError, DejitterError, NoComparableRangeError, NumericalError
from .harness import ESTIMATORS, ExperimentReport, SweepSpec, improvement_factor, power_savings, run_sweep
from .linear_estimators import (efficient_no_jitter, linear_unbiased, lls_no_jitter, lls_random_jitter,
                                mean_observation_matrices)
from .quadrature import DEFAULT_ORDER, gauss_hermite_rule
from .signal_model import ModelConfig, SampleSet, draw_prior_parameters, generate_samples

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NO_RANGE = 0, 2, 3, 4
METHODS = tuple(e for e in ESTIMATORS if e != "crb")


def _emit(obj, out):
    text = json.dumps(obj, indent=1)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _config(args) -> ModelConfig:
    return ModelConfig(K=args.k, M=args.m, sigma_z=args.sigma_z, sigma_w=args.sigma_w)


def _load_x(spec: str, K: int, seed: int) -> np.ndarray:
    if spec == "random":
        return draw_prior_parameters(K, stream(seed, 0))
    with open(spec) as fh:
        data = json.load(fh)
    x = np.asarray(data["x"] if isinstance(data, dict) else data, dtype=float)
    if x.shape != (K,):
        raise ConfigError(f"{spec}: expected {K} coefficients, got shape {x.shape}")
    return x


def cmd_simulate(args):
    cfg = _config(args)
    x = _load_x(args.x, cfg.K, args.seed)
    samples = generate_samples(x, cfg, derive_seed(args.seed, 1))
    samples.meta = {"master_seed": args.seed}
    d = samples.to_dict()
    d["master_seed"] = args.seed
    _emit(d, args.out)


def _estimate(method, samples: SampleSet, args):
    rule = gauss_hermite_rule(args.quad_order)
    cfg = samples.config
    diag = {}
    if method == "efficient-no-jitter":
        x = efficient_no_jitter(samples)
    elif method == "lls-no-jitter":
        x = lls_no_jitter(samples)
    elif method == "linear-unbiased":
        x = linear_unbiased(samples, mean_observation_matrices(cfg, rule))
    elif method == "lls-random-jitter":
        x = lls_random_jitter(samples, mean_observation_matrices(cfg, rule))
    elif method == "em":
        x, trace = em_run(samples, EmSettings(quad_order=args.quad_order, tol=args.tol,
                                              max_iters=args.max_iters), rule)
        diag = {"iterations": trace.iterations_run, "converged": trace.converged,
                "loglik": trace.loglik[-1], "warnings": trace.warnings}
    else:
        res = gibbs_run(samples, GibbsSettings(burn_in=args.burn_in, samples=args.samples,
                                               z_sampler=method.split("-")[1], seed=args.seed))
        x = res.x_hat
        diag = dict(res.diagnostics)
        diag.pop("wall_time_s")
        diag["z_hat"] = res.z_hat.tolist()
    return x, diag


def cmd_estimate(args):
    with open(args.inp) as fh:
        samples = SampleSet.from_dict(json.load(fh))
    x, diag = _estimate(args.method, samples, args)
    out = {"method": args.method, "config": samples.config.to_dict(), "x_hat": x.tolist(),
           "diagnostics": diag}
    if samples.x_true is not None:
        out["squared_error"] = float(np.sum((x - samples.x_true) ** 2))
    _emit(out, args.out)


def cmd_crb(args):
    cfg = _config(args)
    x = _load_x(args.x, cfg.K, args.seed)
    fisher = fisher_information(x, cfg, args.ns, gauss_hermite_rule(args.quad_order), args.seed)
    row = {"K": cfg.K, "M": cfg.M, "sigma_z": cfg.sigma_z, "sigma_w": cfg.sigma_w, "Ns": args.ns,
           "quad_order": args.quad_order, "seed": args.seed, "crb": crb_trace(fisher), "x": x.tolist()}
    _emit(row, args.out)


def cmd_sweep(args):
    with open(args.spec) as fh:
        spec = SweepSpec.from_dict(json.load(fh))
    if args.workers is not None:
        spec.workers = args.workers
    report = run_sweep(spec)
    report.write_csv(args.out)
    if args.provenance:
        report.write_provenance(args.provenance)


def cmd_improvement(args):
    report = ExperimentReport.read_csv(args.report)
    res = improvement_factor(report, args.baseline, args.candidate, args.m, args.sigma_w)
    d = res.to_dict()
    d["power_savings"] = power_savings(max(res.factor, 1.0))
    _emit(d, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dejitter", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp):
        sp.add_argument("--k", type=int, required=True)
        sp.add_argument("--m", type=int, required=True)
        sp.add_argument("--sigma-z", type=float, required=True)
        sp.add_argument("--sigma-w", type=float, required=True)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("simulate", help="draw a synthetic SampleSet")
    model_args(sp)
    sp.add_argument("--x", default="random", help="JSON file with coefficients, or 'random'")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="run one estimator on a SampleSet file")
    sp.add_argument("--method", choices=METHODS, required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--quad-order", type=int, default=DEFAULT_ORDER)
    sp.add_argument("--burn-in", type=int, default=500)
    sp.add_argument("--samples", type=int, default=2000)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iters", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("crb", help="Monte Carlo Cramer-Rao bound")
    model_args(sp)
    sp.add_argument("--x", default="random")
    sp.add_argument("--ns", type=int, default=1000)
    sp.add_argument("--quad-order", type=int, default=DEFAULT_ORDER)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_crb)

    sp = sub.add_parser("sweep", help="Monte Carlo MSE sweep")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--provenance")
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("improvement", help="jitter-tolerance improvement factor from a report")
    sp.add_argument("--report", required=True)
    sp.add_argument("--baseline", choices=ESTIMATORS, required=True)
    sp.add_argument("--candidate", choices=ESTIMATORS, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--sigma-w", type=float, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_improvement)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except NoComparableRangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_RANGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, KeyError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DejitterError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
