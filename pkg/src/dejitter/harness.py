"""Monte Carlo MSE sweeps, report persistence and the jitter-tolerance metric."""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _core
from ._rng import derive_seed, stream
from .bayes_gibbs import GibbsSettings, gibbs_run
from .crb import crb_trace, fisher_information
from .em_ml import EmSettings, em_run
from .errors import ConfigError, DejitterError, NoComparableRangeError, TimeBudgetExceeded
from .linear_estimators import (efficient_no_jitter_operator, linear_unbiased_operator,
                                lls_no_jitter_operator, lls_random_jitter_operator,
                                mean_observation_matrices)
from .quadrature import gauss_hermite_rule
from .signal_model import ModelConfig, draw_prior_parameters, generate_samples

ESTIMATORS = ("efficient-no-jitter", "linear-unbiased", "lls-no-jitter", "lls-random-jitter",
              "em", "gibbs-rejection", "gibbs-slice", "crb")
CSV_COLUMNS = ("estimator", "K", "M", "sigma_z", "sigma_w", "trials", "mse_mean", "mse_stderr",
               "failures", "wall_time_s", "seed")
MAX_SIGMA_Z = 0.5


@dataclass
class SweepSpec:
    K: int
    M_list: list
    sigma_z_list: list
    sigma_w_list: list
    trials: int
    estimators: list
    master_seed: int = 0
    quad_order: int = 20
    em_tol: float = 1e-8
    em_max_iters: int = 500
    gibbs_burn_in: int = 500
    gibbs_samples: int = 2000
    crb_ns: int = 1000
    time_budget: Optional[float] = None  # seconds per estimator per trial
    workers: int = 1
    allow_large_sigma_z: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for name in ("M_list", "sigma_z_list", "sigma_w_list", "estimators"):
            if not list(getattr(self, name)):
                raise ConfigError(f"{name} must be nonempty")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigError(f"unknown estimators {bad}; choose from {list(ESTIMATORS)}")
        if not self.allow_large_sigma_z and max(self.sigma_z_list) > MAX_SIGMA_Z:
            raise ConfigError(f"sigma_z above {MAX_SIGMA_Z} requires allow_large_sigma_z")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # validates every cell up front
        self.cells()

    def cells(self):
        return [ModelConfig(self.K, M, sz, sw)
                for M in self.M_list for sw in self.sigma_w_list for sz in self.sigma_z_list]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown sweep spec fields {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class ReportRow:
    estimator: str
    K: int
    M: int
    sigma_z: float
    sigma_w: float
    trials: int
    mse_mean: float
    mse_stderr: float
    failures: int
    wall_time_s: float
    seed: int

    def csv_values(self):
        return [self.estimator, self.K, self.M, repr(float(self.sigma_z)), repr(float(self.sigma_w)),
                self.trials, repr(float(self.mse_mean)), repr(float(self.mse_stderr)), self.failures,
                repr(float(self.wall_time_s)), self.seed]


@dataclass
class ExperimentReport:
    rows: list
    spec: Optional[SweepSpec] = None
    dataset_hashes: dict = field(default_factory=dict)
    failure_messages: dict = field(default_factory=dict)

    def select(self, estimator: str, M: int, sigma_w: float):
        return [r for r in self.rows if r.estimator == estimator and r.M == M and r.sigma_w == sigma_w]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow(r.csv_values())

    @classmethod
    def read_csv(cls, path) -> "ExperimentReport":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ConfigError(f"{path}: unexpected CSV columns {reader.fieldnames}")
            rows = [ReportRow(estimator=d["estimator"], K=int(d["K"]), M=int(d["M"]),
                              sigma_z=float(d["sigma_z"]), sigma_w=float(d["sigma_w"]),
                              trials=int(d["trials"]), mse_mean=float(d["mse_mean"]),
                              mse_stderr=float(d["mse_stderr"]), failures=int(d["failures"]),
                              wall_time_s=float(d["wall_time_s"]), seed=int(d["seed"]))
                    for d in reader]
        return cls(rows=rows)

    def provenance(self) -> dict:
        from . import __version__
        return {
            "artifact_version": f"dejitter {__version__} ({_core.BACKEND} kernels)",
            "spec": None if self.spec is None else self.spec.to_dict(),
            "seed_scheme": {"x": "stream(master_seed, trial, 0)",
                            "data": "derive_seed(master_seed, trial)",
                            "estimator": "derive_seed(master_seed, trial, 1)"},
            "mse_definition": "squared Euclidean error summed over the K coefficients, averaged over trials",
            "dataset_hashes": self.dataset_hashes,
            "failure_messages": self.failure_messages,
            "rows": [asdict(r) for r in self.rows],
        }

    def write_provenance(self, path):
        with open(path, "w") as fh:
            json.dump(self.provenance(), fh, indent=1, allow_nan=True)


def _cell_key(cfg: ModelConfig) -> str:
    return f"K={cfg.K},M={cfg.M},sigma_z={cfg.sigma_z!r},sigma_w={cfg.sigma_w!r}"


class _CellContext:
    """Per-cell operators shared by every trial of that cell."""

    def __init__(self, cfg: ModelConfig, spec: SweepSpec):
        self.cfg = cfg
        self.rule = gauss_hermite_rule(spec.quad_order)
        self._ops = {}
        self._errors = {}
        self.spec = spec

    def operator(self, name):
        if name in self._errors:
            raise self._errors[name]
        if name not in self._ops:
            try:
                if name == "efficient-no-jitter":
                    op = efficient_no_jitter_operator(self.cfg)
                elif name == "lls-no-jitter":
                    op = lls_no_jitter_operator(self.cfg)
                else:
                    means = mean_observation_matrices(self.cfg, self.rule)
                    op = (linear_unbiased_operator(means) if name == "linear-unbiased"
                          else lls_random_jitter_operator(means))
            except DejitterError as exc:
                self._errors[name] = exc
                raise
            self._ops[name] = op
        return self._ops[name]


def _estimate(name, samples, ctx: _CellContext, est_seed, budget):
    spec = ctx.spec
    if name in ("efficient-no-jitter", "lls-no-jitter", "linear-unbiased", "lls-random-jitter"):
        return ctx.operator(name) @ samples.y
    if name == "em":
        x, _ = em_run(samples, EmSettings(quad_order=spec.quad_order, tol=spec.em_tol,
                                          max_iters=spec.em_max_iters), ctx.rule)
        return x
    if name in ("gibbs-rejection", "gibbs-slice"):
        gs = GibbsSettings(burn_in=spec.gibbs_burn_in, samples=spec.gibbs_samples,
                           z_sampler=name.split("-")[1], seed=est_seed, time_budget=budget)
        return gibbs_run(samples, gs).x_hat
    raise ConfigError(f"unknown estimator {name!r}")


def run_trial(spec: SweepSpec, cfg: ModelConfig, trial: int, ctx: _CellContext | None = None):
    """Squared errors (or CRB values) of every estimator on one dataset.

    Returns ``(hash, {estimator: (value or None, seconds, error message)})``.
    """
    ctx = ctx or _CellContext(cfg, spec)
    x = draw_prior_parameters(cfg.K, stream(spec.master_seed, trial, 0))
    samples = generate_samples(x, cfg, derive_seed(spec.master_seed, trial))
    est_seed = derive_seed(spec.master_seed, trial, 1)
    out = {}
    for name in spec.estimators:
        t0 = time.perf_counter()
        try:
            if name == "crb":
                val = crb_trace(fisher_information(x, cfg, spec.crb_ns, ctx.rule, est_seed))
            else:
                xh = _estimate(name, samples, ctx, est_seed, spec.time_budget)
                val = float(np.sum((xh - x) ** 2))
            dt = time.perf_counter() - t0
            if spec.time_budget is not None and dt > spec.time_budget:
                raise TimeBudgetExceeded(f"{name} took {dt:.3g}s > budget {spec.time_budget}s")
            if not np.isfinite(val):
                raise DejitterError(f"{name} produced a non-finite result")
            out[name] = (val, dt, None)
        except (DejitterError, np.linalg.LinAlgError) as exc:
            out[name] = (None, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")
    return samples.digest(), out


def _cell_job(args):
    spec, cfg, trials = args
    ctx = _CellContext(cfg, spec)
    return [run_trial(spec, cfg, t, ctx) for t in trials]


def run_sweep(spec: SweepSpec, progress=None) -> ExperimentReport:
    """Run every estimator on ``spec.trials`` shared datasets per cell.

    Trial t of every cell uses the same prior draw of x and the same data
    seed, so estimators (and neighbouring sigma_z values) are compared on
    paired data. Results are reduced in (cell, trial) order.
    """
    cells = spec.cells()
    jobs = [(spec, cfg, list(range(spec.trials))) for cfg in cells]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_cell_job(job))
            if progress:
                progress(job[1])
    rows, hashes, failures = [], {}, {}
    for cfg, trials in zip(cells, results):
        key = _cell_key(cfg)
        hashes[key] = [h for h, _ in trials]
        for name in spec.estimators:
            vals = [o[name][0] for _, o in trials if o[name][0] is not None]
            msgs = [o[name][2] for _, o in trials if o[name][2] is not None]
            wall = sum(o[name][1] for _, o in trials)
            n = len(vals)
            mean = float(np.mean(vals)) if n else math.nan
            se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else (0.0 if n else math.nan)
            if msgs:
                failures[f"{name}|{key}"] = msgs[:5]
            rows.append(ReportRow(name, cfg.K, cfg.M, cfg.sigma_z, cfg.sigma_w, spec.trials,
                                  mean, se, spec.trials - n, wall, spec.master_seed))
    return ExperimentReport(rows=rows, spec=spec, dataset_hashes=hashes, failure_messages=failures)


# ---------------------------------------------------------------- improvement factor

@dataclass
class ImprovementResult:
    baseline: str
    candidate: str
    M: int
    sigma_w: float
    factor: float
    mse_level: float

    def to_dict(self) -> dict:
        return asdict(self)


def _curve(report: ExperimentReport, est: str, M: int, sigma_w: float, max_sigma_z: float):
    rows = [r for r in report.select(est, M, sigma_w)
            if 0 < r.sigma_z <= max_sigma_z and np.isfinite(r.mse_mean) and r.mse_mean > 0]
    rows.sort(key=lambda r: r.sigma_z)
    if len(rows) < 3:
        raise ConfigError(f"{est} has {len(rows)} usable sigma_z points at M={M}, sigma_w={sigma_w}; "
                          "need at least 3")
    return (np.log([r.sigma_z for r in rows]), np.log([r.mse_mean for r in rows]))


def _first_crossing(ls, lm, level):
    """Smallest log sigma_z at which the piecewise-linear curve reaches ``level``."""
    for i in range(len(ls) - 1):
        a, b = lm[i], lm[i + 1]
        if min(a, b) <= level <= max(a, b):
            if a == b:
                return ls[i]
            return ls[i] + (level - a) * (ls[i + 1] - ls[i]) / (b - a)
    return None


def improvement_factor(report: ExperimentReport, baseline: str, candidate: str, M: int,
                       sigma_w: float, max_sigma_z: float = MAX_SIGMA_Z) -> ImprovementResult:
    """Largest ratio sigma_z(candidate) / sigma_z(baseline) at equal MSE.

    Both curves are piecewise linear in (log sigma_z, log MSE). The log-ratio
    is piecewise linear in log MSE with kinks only at the curves' vertices, so
    its maximum over the shared MSE range is attained at one of those levels.
    """
    bs, bm = _curve(report, baseline, M, sigma_w, max_sigma_z)
    cs, cm = _curve(report, candidate, M, sigma_w, max_sigma_z)
    lo = max(bm.min(), cm.min())
    hi = min(bm.max(), cm.max())
    if lo > hi:
        raise NoComparableRangeError(f"{baseline} and {candidate} never reach a common MSE level")
    levels = np.unique(np.concatenate([bm, cm, [lo, hi]]))
    levels = levels[(levels >= lo) & (levels <= hi)]
    best, best_level = -math.inf, None
    for L in levels:
        sb = _first_crossing(bs, bm, L)
        sc = _first_crossing(cs, cm, L)
        if sb is None or sc is None:
            continue
        if sc - sb > best:
            best, best_level = sc - sb, L
    if best_level is None:
        raise NoComparableRangeError(f"{baseline} and {candidate} never reach a common MSE level")
    return ImprovementResult(baseline, candidate, int(M), float(sigma_w),
                             float(math.exp(best)), float(math.exp(best_level)))


def power_savings(factor: float) -> float:
    """Fractional ADC power reduction at equal accuracy: 1 - 1/factor^2."""
    if not factor >= 1:
        raise ConfigError(f"factor must be >= 1, got {factor}")
    return 1.0 - 1.0 / factor ** 2
