"""Brute-force reference search, cross-checked against an independent
float64 rescan built on scipy."""

import numpy as np
import pytest

import bigann_bench as bb
from bigann_bench.errors import ValidationError
from conftest import f64_rescan_knn, f64_rescan_range


def _dataset(arr, kind=bb.ScalarKind.F32):
    return bb.VectorDataset(kind, np.asarray(arr, dtype=kind.dtype))


class TestKnn:

    def test_hand_example_1d(self):
        base = _dataset([[0.0], [1.0], [2.0]])
        queries = _dataset([[0.6]])
        gt = bb.brute_force_knn(base, queries, 2)
        assert gt.ids.tolist() == [[1, 0]]
        assert np.allclose(gt.distances, [[0.16, 0.36]], atol=1e-7)

    def test_query_equals_base_point(self, tiny):
        base, _, _ = tiny
        queries = bb.VectorDataset(base.kind, base.data[123:124].copy())
        gt = bb.brute_force_knn(base, queries, 1)
        assert gt.ids[0, 0] == 123
        assert gt.distances[0, 0] == 0.0

    def test_matches_f64_rescan(self):
        spec = bb.SyntheticSpec(n=10000, dim=32, n_clusters=20, seed=17, n_queries=50)
        base, queries = bb.generate_synthetic(spec)
        gt = bb.brute_force_knn(base, queries, 10)
        ref_ids, ref_dists = f64_rescan_knn(base, queries, 10)
        assert np.array_equal(gt.ids, ref_ids)
        assert np.allclose(gt.distances, ref_dists, rtol=1e-5)

    def test_matches_f64_rescan_inner_product(self, tiny):
        base, queries, _ = tiny
        gt = bb.brute_force_knn(base, queries, 5, bb.Metric.INNER_PRODUCT)
        ref_ids, ref_dists = f64_rescan_knn(base, queries, 5, bb.Metric.INNER_PRODUCT)
        assert np.array_equal(gt.ids, ref_ids)
        assert np.allclose(gt.distances, ref_dists, rtol=1e-5)

    def test_full_ranking_prefix_property(self, tiny):
        base, queries, _ = tiny
        full = bb.brute_force_knn(base, queries, base.count)
        for k in (1, 3, 10, 57):
            part = bb.brute_force_knn(base, queries, k)
            assert np.array_equal(full.ids[:, :k], part.ids)
            assert np.array_equal(full.distances[:, :k], part.distances)

    def test_distances_non_decreasing(self, medium):
        _, _, gt = medium
        assert (np.diff(gt.distances.astype(np.float64), axis=1) >= 0).all()

    def test_tie_break_by_id(self):
        row = [1.0, 2.0]
        base = _dataset([row, [50.0, 50.0], row, row])  # ids 0, 2, 3 are duplicates
        gt = bb.brute_force_knn(base, _dataset([row]), 3)
        assert gt.ids.tolist() == [[0, 2, 3]]

    def test_worker_independence(self, medium):
        base, queries, gt = medium
        for workers in (2, 3, 7):
            alt = bb.brute_force_knn(base, queries, 10, workers=workers)
            assert alt == gt

    def test_preconditions(self, tiny):
        base, queries, _ = tiny
        with pytest.raises(ValidationError):
            bb.brute_force_knn(base, queries, base.count + 1)
        with pytest.raises(ValidationError):
            bb.brute_force_knn(base, _dataset([[1.0, 2.0]]), 1)
        empty = bb.VectorDataset(bb.ScalarKind.F32, np.empty((0, 16), np.float32))
        with pytest.raises(ValidationError):
            bb.brute_force_knn(empty, queries, 1)


class TestRange:

    def test_radius_zero_exact_match(self):
        base = _dataset([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        gt = bb.brute_force_range(base, _dataset([[1.0, 0.0]]), 0.0)
        assert gt.ids[0].tolist() == [1]
        assert gt.distances[0].tolist() == [0.0]

    def test_radius_below_min_distance(self, tiny):
        base, queries, knn_gt = tiny
        radius = float(knn_gt.distances.min()) * 0.5
        gt = bb.brute_force_range(base, queries, radius)
        before = bb.brute_force_knn(base, queries, 1)
        for q in range(queries.count):
            if before.distances[q, 0] > radius:
                assert gt.ids[q].size == 0

    def test_matches_f64_rescan(self, medium):
        base, queries, knn_gt = medium
        # radius calibrated so the mean result length is around 20
        radius = float(np.median(knn_gt.distances[:, -1])) * 2.0
        gt = bb.brute_force_range(base, queries, radius)
        ref = f64_rescan_range(base, queries, radius)
        mismatched = 0
        for q in range(queries.count):
            ref_ids, ref_d = ref[q]
            if not np.array_equal(gt.ids[q], ref_ids):
                mismatched += 1  # f32 vs f64 boundary membership may differ
                continue
            assert np.allclose(gt.distances[q], ref_d, rtol=1e-5, atol=1e-6)
        assert mismatched <= queries.count // 50

    def test_monotone_in_radius(self, tiny):
        base, queries, knn_gt = tiny
        r1 = float(np.median(knn_gt.distances[:, 2]))
        r2 = r1 * 2.0
        small = bb.brute_force_range(base, queries, r1)
        large = bb.brute_force_range(base, queries, r2)
        for q in range(queries.count):
            assert set(small.ids[q].tolist()) <= set(large.ids[q].tolist())
            assert (small.distances[q] <= np.float32(r1)).all()

    def test_worker_independence(self, tiny):
        base, queries, knn_gt = tiny
        radius = float(np.median(knn_gt.distances[:, -1]))
        one = bb.brute_force_range(base, queries, radius)
        four = bb.brute_force_range(base, queries, radius, workers=4)
        assert one == four

    def test_preconditions(self, tiny):
        base, queries, _ = tiny
        with pytest.raises(ValidationError, match="L2"):
            bb.brute_force_range(base, queries, 1.0, bb.Metric.INNER_PRODUCT)
        with pytest.raises(ValidationError, match="radius"):
            bb.brute_force_range(base, queries, -1.0)
