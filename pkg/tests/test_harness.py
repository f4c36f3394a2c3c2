import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dejitter.errors import ConfigError, NoComparableRangeError
from dejitter.harness import (CSV_COLUMNS, ExperimentReport, ReportRow, SweepSpec, improvement_factor,
                              power_savings, run_sweep, run_trial)
from dejitter.signal_model import ModelConfig


def small_spec(**kw):
    d = dict(K=4, M_list=[4], sigma_z_list=[0.0, 0.1, 0.2], sigma_w_list=[0.05], trials=6,
             estimators=["efficient-no-jitter", "linear-unbiased", "lls-no-jitter", "lls-random-jitter",
                         "em", "gibbs-rejection", "gibbs-slice", "crb"],
             master_seed=3, gibbs_burn_in=20, gibbs_samples=50, crb_ns=50)
    d.update(kw)
    return SweepSpec(**d)


def synthetic_report(curves, M=16, sw=0.05):
    rows = []
    for name, (sz, mse) in curves.items():
        for a, b in zip(sz, mse):
            rows.append(ReportRow(name, 10, M, float(a), sw, 10, float(b), 0.0, 0, 0.0, 0))
    return ExperimentReport(rows=rows)


@pytest.mark.parametrize("kw", [dict(trials=0), dict(M_list=[]), dict(estimators=["magic"]),
                                dict(sigma_z_list=[0.1, 0.6]), dict(workers=0), dict(sigma_w_list=[-1.0])])
def test_spec_validation(kw):
    with pytest.raises(ConfigError):
        small_spec(**kw)


def test_spec_allows_large_jitter_when_asked():
    assert small_spec(sigma_z_list=[0.7], allow_large_sigma_z=True).sigma_z_list == [0.7]


def test_spec_dict_roundtrip():
    s = small_spec()
    assert SweepSpec.from_dict(json.loads(json.dumps(s.to_dict()))) == s
    with pytest.raises(ConfigError):
        SweepSpec.from_dict({**s.to_dict(), "bogus": 1})
    with pytest.raises(ConfigError):
        SweepSpec.from_dict({"K": 3})


@pytest.fixture(scope="module")
def report():
    return run_sweep(small_spec())


def test_report_shape(report):
    spec = report.spec
    assert len(report.rows) == len(spec.cells()) * len(spec.estimators)
    for r in report.rows:
        assert r.mse_mean >= 0 and r.mse_stderr >= 0 and r.failures == 0
        assert r.trials == 6 and r.seed == 3
    assert len(report.dataset_hashes) == 3
    assert all(len(h) == 6 for h in report.dataset_hashes.values())


def test_sweep_is_deterministic(report):
    again = run_sweep(small_spec())
    strip = lambda rep: [{**r.__dict__, "wall_time_s": None} for r in rep.rows]
    assert strip(again) == strip(report)
    assert again.dataset_hashes == report.dataset_hashes


def test_paired_design_and_common_random_numbers(report):
    # every estimator consumed the dataset whose hash is recorded for the trial
    spec = report.spec
    for cfg in spec.cells():
        key = next(k for k in report.dataset_hashes if k.startswith(f"K={cfg.K},M={cfg.M},sigma_z={cfg.sigma_z!r}"))
        for t in range(2):
            h, _ = run_trial(spec.__class__(**{**spec.to_dict(), "estimators": ["efficient-no-jitter"]}), cfg, t)
            assert h == report.dataset_hashes[key][t]


def test_csv_roundtrip(report, tmp_path):
    p = tmp_path / "r.csv"
    report.write_csv(p)
    header = p.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    back = ExperimentReport.read_csv(p)
    assert [r.__dict__ for r in back.rows] == [r.__dict__ for r in report.rows]


def test_csv_rejects_wrong_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        ExperimentReport.read_csv(p)


def test_provenance(report, tmp_path):
    p = tmp_path / "r.json"
    report.write_provenance(p)
    d = json.loads(p.read_text())
    assert d["spec"]["master_seed"] == 3
    assert "artifact_version" in d and d["dataset_hashes"] == report.dataset_hashes
    assert len(d["rows"]) == len(report.rows)


def test_failures_are_recorded_not_raised():
    rep = run_sweep(small_spec(sigma_z_list=[0.2], estimators=["gibbs-slice", "efficient-no-jitter"],
                               gibbs_burn_in=1_000_000, time_budget=0.05, trials=2))
    g = next(r for r in rep.rows if r.estimator == "gibbs-slice")
    assert g.failures == 2 and np.isnan(g.mse_mean)
    assert any("TimeBudgetExceeded" in m for m in rep.failure_messages[next(iter(rep.failure_messages))])
    e = next(r for r in rep.rows if r.estimator == "efficient-no-jitter")
    assert e.failures == 0


def test_worker_pool_matches_serial():
    spec = small_spec(estimators=["efficient-no-jitter", "em"], trials=3)
    a = run_sweep(spec)
    spec.workers = 2
    b = run_sweep(spec)
    assert [(r.estimator, r.mse_mean, r.mse_stderr) for r in a.rows] == \
           [(r.estimator, r.mse_mean, r.mse_stderr) for r in b.rows]


def test_efficient_and_lls_cells_without_jitter():
    spec = SweepSpec(K=10, M_list=[16], sigma_z_list=[0.0], sigma_w_list=[0.05], trials=10_000,
                     estimators=["efficient-no-jitter", "lls-no-jitter"], master_seed=1)
    rep = run_sweep(spec)
    eff, lls = rep.rows
    assert eff.mse_mean == pytest.approx(1.5625e-3, rel=0.05)
    assert lls.mse_mean == pytest.approx(10 * 1.5618e-4, rel=0.05)


def test_stderr_calibration_and_monotonicity():
    base = dict(K=4, M_list=[4, 8], sigma_z_list=[0.05, 0.1, 0.2, 0.3, 0.4], sigma_w_list=[0.05], trials=200,
                estimators=["efficient-no-jitter", "linear-unbiased", "lls-no-jitter", "em"])
    a = run_sweep(SweepSpec(**base, master_seed=1))
    b = run_sweep(SweepSpec(**base, master_seed=2))
    ok = [abs(ra.mse_mean - rb.mse_mean) < 4 * ra.mse_stderr for ra, rb in zip(a.rows, b.rows)]
    assert np.mean(ok) >= 0.95
    for est in base["estimators"]:
        for M in base["M_list"]:
            rows = sorted(a.select(est, M, 0.05), key=lambda r: r.sigma_z)
            for lo, hi in zip(rows, rows[1:]):
                assert hi.mse_mean >= lo.mse_mean - 3 * np.hypot(lo.mse_stderr, hi.mse_stderr)


def test_improvement_shifted_curve():
    sz = np.array([0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5])
    base = 1e-3 * (sz / 0.05) ** 2
    rep = synthetic_report({"efficient-no-jitter": (sz / 2, base), "em": (sz, base)})
    res = improvement_factor(rep, "efficient-no-jitter", "em", 16, 0.05)
    assert res.factor == pytest.approx(2.0, rel=1e-12)


def test_improvement_identical_curves():
    sz = np.array([0.05, 0.1, 0.2, 0.3, 0.5])
    mse = np.array([1e-3, 3e-3, 1e-2, 3e-2, 0.1])
    rep = synthetic_report({"em": (sz, mse), "lls-no-jitter": (sz, mse)})
    assert improvement_factor(rep, "lls-no-jitter", "em", 16, 0.05).factor == pytest.approx(1.0)


@given(c=st.floats(0.2, 1.0), bump=st.lists(st.floats(0.5, 2.0), min_size=5, max_size=5))
def test_improvement_scale_equivariance(c, bump):
    sz = np.array([0.05, 0.1, 0.2, 0.3, 0.5])
    b = np.cumprod(bump) * 1e-3
    a = b * np.linspace(1.0, 0.3, 5)
    r1 = improvement_factor(synthetic_report({"em": (sz, a), "lls-no-jitter": (sz, b)}), "lls-no-jitter", "em", 16, 0.05)
    r2 = improvement_factor(synthetic_report({"em": (sz * c, a), "lls-no-jitter": (sz * c, b)}),
                            "lls-no-jitter", "em", 16, 0.05, max_sigma_z=0.5)
    assert r2.factor == pytest.approx(r1.factor, rel=1e-9)


def test_improvement_ignores_large_jitter_points():
    sz = np.array([0.05, 0.1, 0.2, 0.3, 0.5, 0.8])
    base = 1e-3 * (sz / 0.05) ** 2
    cand = base.copy()
    cand[-1] = 1e-9  # would be a huge factor if sigma_z = 0.8 were allowed
    rep = synthetic_report({"em": (sz, cand), "lls-no-jitter": (sz, base)})
    assert improvement_factor(rep, "lls-no-jitter", "em", 16, 0.05).factor == pytest.approx(1.0)


def test_improvement_errors():
    sz = np.array([0.05, 0.1, 0.2])
    rep = synthetic_report({"em": (sz, np.array([1e-4, 2e-4, 3e-4])),
                            "lls-no-jitter": (sz, np.array([1e-2, 2e-2, 3e-2]))})
    with pytest.raises(NoComparableRangeError):
        improvement_factor(rep, "lls-no-jitter", "em", 16, 0.05)
    with pytest.raises(ConfigError):
        improvement_factor(rep, "lls-no-jitter", "em", 8, 0.05)
    short = synthetic_report({"em": (sz[:2], np.array([1, 2.0])), "lls-no-jitter": (sz, np.ones(3))})
    with pytest.raises(ConfigError):
        improvement_factor(short, "lls-no-jitter", "em", 16, 0.05)


def test_power_savings():
    assert power_savings(1.0) == 0.0
    assert power_savings(2.0) == pytest.approx(0.75)
    assert power_savings(np.sqrt(2)) == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        power_savings(0.9)


def test_run_trial_squared_errors_are_consistent():
    spec = small_spec(estimators=["efficient-no-jitter"], trials=1)
    cfg = ModelConfig(4, 4, 0.0, 0.05)
    h, out = run_trial(spec, cfg, 0)
    val, dt, err = out["efficient-no-jitter"]
    assert err is None and val >= 0 and dt >= 0 and len(h) == 64
