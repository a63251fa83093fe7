import json

import pytest

from csi_imitation.bench import CENSUS_COLUMNS, census_instance, run_census, run_sales_benchmark
from csi_imitation.generators import CensusConfig


class TestCensus:
    def test_rows_reproducible(self):
        cfg = CensusConfig(n=40, samples=6, seed=3)
        a = run_census(cfg, timing=False).to_csv()
        assert a == run_census(cfg, timing=False).to_csv()
        assert a.splitlines()[0] == ",".join(CENSUS_COLUMNS)
        assert len(a.splitlines()) == 7

    def test_workers_do_not_change_rows(self):
        cfg = CensusConfig(n=30, samples=6)
        assert run_census(cfg, [30, 40], threads=2, timing=False).to_csv() == \
            run_census(cfg, [30, 40], timing=False).to_csv()

    def test_no_labels_no_gap(self):
        res = run_census(CensusConfig(n=40, samples=10, label_prob=0.0), timing=False)
        s = res.summary[40]
        assert s["classic_fraction"] == s["csi_fraction"] and s["gap"] == 0

    def test_single_instance(self):
        row = census_instance(CensusConfig(n=50), 7, timing=False)
        assert row == census_instance(CensusConfig(n=50), 7, timing=False)
        assert set(row) == set(CENSUS_COLUMNS)

    def test_monotone(self):
        res = run_census(CensusConfig(n=60, samples=30), timing=False)
        assert all(r["csi_imitable"] for r in res.rows if r["classic_imitable"])
        assert res.summary[60]["monotonicity_violations"] == 0

    def test_resource_errors_are_recorded(self):
        res = run_census(CensusConfig(n=40, samples=3), cap=1, timing=False)
        assert res.summary[40]["errors"] == 3
        assert all(r["csi_imitable"] == "error" for r in res.rows)

    def test_plot_data(self):
        res = run_census(CensusConfig(n=30, samples=2), [30, 40], timing=False)
        assert [p["n"] for p in res.plot_data()] == [30, 40]


class TestPricingBenchmark:
    def test_exact(self):
        rep = run_sales_benchmark()
        m = rep.metrics
        assert rep.mode == {"mode": "exact-enumeration"}
        assert m["expert"]["expected_reward"] == pytest.approx(1.36676, abs=1e-12)
        assert m["surrogate_policy"]["decision"] == "Imitable"
        assert m["surrogate_policy"]["kl_reward"] <= 1e-6
        assert m["naive_marginal"]["kl_reward"] >= 0.01
        assert m["naive_conditional"]["kl_reward"] >= 0.01
        assert any("uniform" in n for n in rep.notes)
        json.loads(rep.to_json())

    def test_sampled(self):
        rep = run_sales_benchmark(20_000, seed=4, exact=False)
        assert rep.mode == {"mode": "finite-sample", "n": 20_000, "seed": 4}
        for name in ("naive_marginal", "naive_conditional", "surrogate_policy"):
            assert set(rep.metrics[name]["policy_kl"]) == {"T=0", "T=1"}
            assert max(rep.metrics[name]["policy_kl"].values()) < 0.05

    def test_sampled_needs_size(self):
        with pytest.raises(ValueError):
            run_sales_benchmark(None, exact=False)
