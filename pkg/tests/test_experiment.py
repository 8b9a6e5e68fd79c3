import csv
import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from knn_extremes.experiment import (CSV_HEADER, SUMMARY_KEYS, SUMMARY_SCHEMA, ExperimentConfig,
                                     ks_gumbel, load_replicates, persist, pmf_from_counts,
                                     poisson_pmf, replicate_seed, run_experiment, run_replicate,
                                     run_replicates, sweep, tv_to_poisson, write_sweep_csv)
from knn_extremes.limits import expected_count

PIECEWISE = {"dim": 2, "kind": "piecewise", "m": 4,
             "weights": np.linspace(0.5, 1.5, 16).tolist()}


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n=2)
    with pytest.raises(ValueError):
        ExperimentConfig(n=100, k=100)
    with pytest.raises(ValueError):
        ExperimentConfig(n=100, replicates=0)
    with pytest.raises(ValueError, match="threshold out of range"):
        ExperimentConfig(n=3, t=5.0)
    with pytest.raises(ValueError):
        ExperimentConfig(n=1000, replicates=50, chenstein_diagnostics=True)
    with pytest.raises(ValueError):
        ExperimentConfig(n=1000, dim=3, density=PIECEWISE)
    with pytest.raises(ValueError, match="grid degenerate"):
        ExperimentConfig(n=5, epsilon=20.0)


def test_replicate_seed_is_counter_based():
    seeds = [replicate_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [replicate_seed(7, i) for i in range(100)]
    assert replicate_seed(8, 0) != seeds[0]
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_run_replicate_deterministic_and_consistent():
    cfg = ExperimentConfig(n=500, replicates=10, master_seed=3)
    a, b = run_replicate(cfg, 4), run_replicate(cfg, 4)
    assert a == b
    assert a.seed == replicate_seed(3, 4) and a.replicate_id == 4
    for i in range(10):
        r = run_replicate(cfg, i)
        assert (r.count == 0) == (r.centered_max <= cfg.t)
        assert 0 <= r.hat_count <= r.count


def test_fixed_sample_injection_hand_example():
    cfg = ExperimentConfig(n=3, dim=1, k=1, t=0.0, replicates=1)
    rec = run_replicate(cfg, 0, points=[[0.1], [0.5], [0.95]])
    assert rec.count == 3
    assert rec.max_content == pytest.approx(0.8, rel=1e-12)
    assert rec.centered_max == pytest.approx(2.4 - math.log(3), abs=1e-12)
    with pytest.raises(ValueError):
        run_replicate(cfg, 0, points=[[0.1], [0.5]])


def test_diagnostics_extra_fields():
    cfg = ExperimentConfig(n=1000, replicates=100, chenstein_diagnostics=True)
    rec = run_replicate(cfg, 1)
    assert len(rec.extra["exceeding_cells"]) == rec.hat_count
    assert rec.extra["collision"] == (rec.count != rec.hat_count)


def test_single_replicate_point_mass():
    rep = run_experiment(ExperimentConfig(n=300, replicates=1, master_seed=1))
    c = rep.records[0].count
    assert rep.pmf[c] == 1.0 and sum(rep.pmf) == 1.0
    assert rep.se_count == 0.0


def test_report_invariants_and_schema():
    rep = run_experiment(ExperimentConfig(n=400, replicates=120, master_seed=9,
                                          chenstein_diagnostics=True))
    assert sum(rep.pmf) == pytest.approx(1.0, abs=1e-12)
    assert rep.mean_count == pytest.approx(sum(m * p for m, p in enumerate(rep.pmf)), abs=1e-12)
    assert rep.expected_count == expected_count(400, 1, 0.0)
    js = rep.to_json()
    assert list(js) == SUMMARY_KEYS
    jsonschema.validate(js, SUMMARY_SCHEMA)
    assert js["diagnostics"]["bound"] == 2 * (js["diagnostics"]["b1"] + js["diagnostics"]["b2"])


@pytest.mark.parametrize("cfg", [
    ExperimentConfig(n=200, replicates=5),
    ExperimentConfig(n=300, dim=1, k=2, t=0.5, replicates=3, master_seed=2 ** 64 - 1),
    ExperimentConfig(n=600, replicates=100, density=PIECEWISE, chenstein_diagnostics=True),
])
def test_schema_on_sample_configs(cfg):
    jsonschema.validate(run_experiment(cfg).to_json(), SUMMARY_SCHEMA)


def test_schema_rejects_missing_key():
    js = run_experiment(ExperimentConfig(n=200, replicates=3)).to_json()
    del js["ks_to_gumbel"]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(js, SUMMARY_SCHEMA)


def test_worker_count_does_not_change_results():
    cfg = ExperimentConfig(n=500, replicates=12, master_seed=5)
    one = run_replicates(cfg, workers=1)
    two = run_replicates(cfg, workers=2)
    assert one == two
    assert [r.replicate_id for r in two] == list(range(12))


def test_persist_round_trip(tmp_path):
    rep = run_experiment(ExperimentConfig(n=300, replicates=25, master_seed=2))
    csv_path, json_path = persist(rep, tmp_path / "out")
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 26
    assert all(r[1].startswith("0x") and len(r[1]) == 18 for r in rows[1:])
    loaded = load_replicates(csv_path)
    assert pmf_from_counts([r["count"] for r in loaded]).tolist() == rep.pmf
    for r, rec in zip(loaded, rep.records):
        assert r["seed"] == rec.seed
        assert r["max_content"] == rec.max_content
        assert r["centered_max"] == rec.centered_max
    assert json.loads(json_path.read_text())["pmf"] == rep.pmf


def test_persist_reports_path_on_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rep = run_experiment(ExperimentConfig(n=200, replicates=2))
    with pytest.raises(OSError, match="file"):
        persist(rep, blocker / "sub")


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        load_replicates(path)


def test_poisson_pmf():
    pmf, tail = poisson_pmf(1.0)
    assert pmf[0] == pytest.approx(math.exp(-1), rel=1e-15)
    assert tail < 1e-12
    assert abs(pmf.sum() + tail - 1.0) < 1e-14
    assert 11 <= pmf.size - 1 <= 15
    for m in range(pmf.size - 1):
        assert pmf[m + 1] / pmf[m] == pytest.approx(1.0 / (m + 1), rel=1e-12)
    assert np.allclose(pmf, stats.poisson.pmf(np.arange(pmf.size), 1.0), rtol=1e-12)
    with pytest.raises(ValueError):
        poisson_pmf(0.0)


@given(st.floats(0.01, 30))
def test_poisson_pmf_cutoff_minimal(lam):
    pmf, tail = poisson_pmf(lam)
    m = pmf.size - 1
    assert tail < 1e-12
    assert stats.poisson.sf(m - 1, lam) >= 1e-12 or m == 0


def test_tv_to_poisson_exact_sample_is_small():
    counts = np.random.default_rng(0).poisson(1.0, 20_000)
    tv, se = tv_to_poisson(counts, 1.0)
    assert tv < 0.05 and 0 < se < 0.02
    # exact distance between Po(1) + 1 and Po(1)
    m = np.arange(40)
    exact = np.abs(stats.poisson.pmf(m - 1, 1.0) - stats.poisson.pmf(m, 1.0)).sum()
    shifted, _ = tv_to_poisson(counts + 1, 1.0)
    assert abs(shifted - exact) < 0.05


def test_tv_to_poisson_deterministic():
    counts = np.random.default_rng(1).poisson(1.0, 500)
    assert tv_to_poisson(counts, 1.0, seed=3) == tv_to_poisson(counts, 1.0, seed=3)


def test_ks_gumbel():
    assert ks_gumbel([-math.log(math.log(2))]) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        ks_gumbel([])
    u = np.random.default_rng(4).random(10_000)
    x = -np.log(-np.log(u))
    ks = ks_gumbel(x)
    assert ks <= 1.63 / math.sqrt(x.size)
    assert ks == pytest.approx(stats.kstest(x, stats.gumbel_r.cdf).statistic, abs=1e-12)
    assert ks_gumbel(x[::-1]) == ks


def test_mean_count_matches_expectation_uniform():
    rep = run_experiment(ExperimentConfig(n=2000, k=2, replicates=400, master_seed=17))
    assert abs(rep.mean_count - rep.expected_count) <= 4 * rep.se_count


def test_sweep_and_combined_csv(tmp_path):
    reports = sweep(ExperimentConfig(n=300, replicates=4), [500, 300, 400])
    assert [r.config.n for r in reports] == [300, 400, 500]
    path = write_sweep_csv(reports, tmp_path / "sweep.csv")
    rows = list(csv.DictReader(open(path)))
    assert [int(r["n"]) for r in rows] == [300, 400, 500]
