"""Experiment timing, clock injection, and run-record persistence."""

import hashlib

import numpy as np
import pytest

import bigann_bench as bb
from bigann_bench.errors import FormatError, ValidationError
from bigann_bench.harness import MAX_QUERY_CONFIGS


@pytest.fixture(scope="module")
def flat_setup():
    spec = bb.SyntheticSpec(n=1500, dim=8, seed=61, n_queries=10000, n_clusters=6)
    base, queries = bb.generate_synthetic(spec)
    gt = bb.brute_force_knn(base, queries, 10)
    index = bb.FlatIndex()
    index.build(base)
    return base, queries, gt, index


def configs(*names):
    return [bb.QueryConfig(name=n) for n in names]


class TestTiming:

    def test_fake_clock_exact_qps(self, flat_setup):
        base, queries, gt, index = flat_setup
        clock = bb.FakeClock([0, 2_000_000_000])
        records = bb.run_experiment(index, base, queries, gt,
                                    configs("c0"), clock=clock)
        assert records[0].qps == 5000.0
        assert records[0].wall_seconds == 2.0
        assert records[0].num_queries == 10000

    def test_best_of_repeats(self, flat_setup):
        base, queries, gt, index = flat_setup
        clock = bb.FakeClock([0, 2_000_000_000, 2_000_000_000, 3_000_000_000])
        records = bb.run_experiment(index, base, queries, gt,
                                    configs("c0"), repeats=2, clock=clock)
        assert records[0].qps == 10000.0

    def test_real_clock_flat_accuracy(self, flat_setup):
        base, queries, gt, index = flat_setup
        records = bb.run_experiment(index, base, queries, gt, configs("a", "b"))
        assert len(records) == 2
        for rec in records:
            assert rec.accuracy == 1.0
            assert rec.qps > 0
            assert rec.algorithm == "flat"
            assert rec.config in ("a", "b")
            assert rec.index_size_bytes == index.index_size_bytes()

    def test_worker_count_does_not_change_accuracy(self, flat_setup):
        base, queries, gt, index = flat_setup
        one = bb.run_experiment(index, base, queries, gt, configs("c"))
        four = bb.run_experiment(index, base, queries, gt, configs("c"), workers=4)
        assert one[0].accuracy == four[0].accuracy == 1.0

    def test_index_not_mutated_by_run(self, flat_setup, tmp_path):
        base, queries, gt, index = flat_setup

        def digest():
            path = tmp_path / "check.annidx"
            bb.save_index(index, path)
            return hashlib.sha256(path.read_bytes()).hexdigest()

        before = digest()
        bb.run_experiment(index, base, queries, gt, configs("c"))
        assert digest() == before

    def test_range_ground_truth_routes_to_range_search(self):
        spec = bb.SyntheticSpec(n=800, dim=8, seed=62, n_queries=30)
        base, queries = bb.generate_synthetic(spec)
        knn = bb.brute_force_knn(base, queries, 10)
        radius = float(np.median(knn.distances[:, -1]))
        gt = bb.brute_force_range(base, queries, radius)
        index = bb.FlatIndex()
        index.build(base)
        with pytest.warns(UserWarning, match="10000"):
            records = bb.run_experiment(index, base, queries, gt, configs("r"))
        assert records[0].accuracy == 1.0
        assert records[0].accuracy_kind == "range_ap"
        assert records[0].radius == pytest.approx(radius, rel=1e-6)

    def test_config_limit_enforced(self, flat_setup):
        base, queries, gt, index = flat_setup
        too_many = configs(*[f"c{i}" for i in range(MAX_QUERY_CONFIGS + 1)])
        with pytest.raises(ValidationError, match="limit is 10"):
            bb.run_experiment(index, base, queries, gt, too_many)
        with pytest.raises(ValidationError):
            bb.run_experiment(index, base, queries, gt, [])

    def test_gt_mismatch_rejected(self, flat_setup):
        base, queries, gt, index = flat_setup
        short = bb.KnnGroundTruth(k=gt.k, ids=gt.ids[:5], distances=gt.distances[:5])
        with pytest.raises(ValidationError, match="queries"):
            bb.run_experiment(index, base, queries, short, configs("c"))

    def test_bad_search_param_named(self, flat_setup):
        base, queries, gt, index = flat_setup
        cfg = [bb.QueryConfig(name="bad", params=bb.Params({"bogus": 1}))]
        with pytest.raises(ValidationError, match="bogus"):
            bb.run_experiment(index, base, queries, gt, cfg)

    def test_small_query_set_warns(self):
        spec = bb.SyntheticSpec(n=500, dim=4, seed=63, n_queries=20)
        base, queries = bb.generate_synthetic(spec)
        gt = bb.brute_force_knn(base, queries, 10)
        index = bb.FlatIndex()
        index.build(base)
        with pytest.warns(UserWarning, match="at least 10000"):
            bb.run_experiment(index, base, queries, gt, configs("c"))


class TestPersistence:

    def _some_records(self, flat_setup, n=3):
        base, queries, gt, index = flat_setup
        return bb.run_experiment(index, base, queries, gt,
                                 configs(*[f"c{i}" for i in range(n)]))

    def test_roundtrip(self, flat_setup, tmp_path):
        records = self._some_records(flat_setup)
        path = tmp_path / "runs.jsonl"
        bb.persist_runs(records, path)
        assert bb.load_runs(path) == records

    def test_empty_file(self, tmp_path):
        path = tmp_path / "runs.jsonl"
        path.write_text("")
        assert bb.load_runs(path) == []

    def test_concatenation_is_union(self, flat_setup, tmp_path):
        records = self._some_records(flat_setup)
        p1, p2, cat = (tmp_path / n for n in ("a.jsonl", "b.jsonl", "cat.jsonl"))
        bb.persist_runs(records[:2], p1)
        bb.persist_runs(records[2:], p2)
        cat.write_bytes(p1.read_bytes() + p2.read_bytes())
        assert bb.load_runs(cat) == records

    def test_append_mode(self, flat_setup, tmp_path):
        records = self._some_records(flat_setup)
        path = tmp_path / "runs.jsonl"
        bb.persist_runs(records[:1], path)
        bb.persist_runs(records[1:], path, append=True)
        assert bb.load_runs(path) == records

    def test_malformed_line_reports_number(self, flat_setup, tmp_path):
        records = self._some_records(flat_setup, n=2)
        path = tmp_path / "runs.jsonl"
        bb.persist_runs(records, path)
        lines = path.read_text().splitlines()
        lines.insert(1, "{ not json }")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="line 2"):
            bb.load_runs(path)

    def test_unknown_schema_rejected(self, flat_setup, tmp_path):
        records = self._some_records(flat_setup, n=1)
        path = tmp_path / "runs.jsonl"
        bb.persist_runs(records, path)
        text = path.read_text().replace('"schema": 1', '"schema": 99')
        path.write_text(text)
        with pytest.raises(FormatError, match="line 1"):
            bb.load_runs(path)
