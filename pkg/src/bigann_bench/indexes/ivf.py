"""Inverted-file index with exact in-list distances.

Points are partitioned by nearest coarse centroid; a search scans the
``nprobe`` lists whose centroids are closest to the query. Lists store either
raw float32 vectors (``encoding="flat"``) or 8-bit scalar-quantized codes
(``encoding="sq8"``).
"""

from __future__ import annotations

import numpy as np

from ..dataset import Metric, VectorDataset, metric_keys_batch
from ..errors import ValidationError
from ..oracle import top_k_by_key
from ..quantization import (
    Sq8Model,
    kmeans_train,
    sample_rows,
    sq8_decode_many,
    sq8_encode_many,
    sq8_train,
)
from .base import AnnIndex, Params, ResultSet, register_index


def assign_to_centroids(points: np.ndarray, centroids: np.ndarray,
                        chunk: int = 8192) -> np.ndarray:
    """Nearest-centroid id per row, ties to the lowest centroid index."""
    c2 = np.einsum("ij,ij->i", centroids, centroids)
    out = np.empty(points.shape[0], dtype=np.int64)
    for lo in range(0, points.shape[0], chunk):
        block = points[lo: lo + chunk]
        # per-row constant ||x||^2 dropped: argmin is unaffected
        scores = c2[None, :] - 2.0 * (block @ centroids.T)
        out[lo: lo + chunk] = np.argmin(scores, axis=1)
    return out


@register_index
class IvfFlatIndex(AnnIndex):

    algorithm = "ivf"
    BUILD_KEYS = {"metric", "nlist", "seed", "encoding", "kmeans_iters", "train_cap"}
    SEARCH_KEYS = {"nprobe"}

    def __init__(self):
        self._built = False
        self.metric = Metric.L2
        self.nlist = 0
        self.encoding = "flat"
        self.seed = 0
        self.centroids = None       # (nlist, d) f32
        self.list_ids = None        # (n,) u32, grouped by list then ascending id
        self.offsets = None         # (nlist + 1,) i64
        self.vecs = None            # (n, d) f32, grouped, when encoding == flat
        self.codes = None           # (n, d) u8, grouped, when encoding == sq8
        self.sq8 = None
        self.dataset_name = ""
        self.count = 0
        self.dim = 0

    def build(self, dataset: VectorDataset, params=None) -> None:
        p = Params.of(params)
        p.ensure_known(self.BUILD_KEYS)
        if dataset.count < 1:
            raise ValidationError("cannot build an IVF index over an empty dataset")
        self.metric = p.get_metric()
        self.nlist = p.get_int("nlist", 64)
        self.seed = p.get_int("seed", 0)
        self.encoding = p.get_str("encoding", "flat")
        if self.encoding not in ("flat", "sq8"):
            raise ValidationError(f"encoding must be 'flat' or 'sq8', got '{self.encoding}'")
        if not 1 <= self.nlist <= dataset.count:
            raise ValidationError(f"nlist={self.nlist} must be in [1, {dataset.count}]")
        iters = p.get_int("kmeans_iters", 25)
        cap = p.get_int("train_cap", 256 * self.nlist)

        x = dataset.as_float32()
        train = sample_rows(x, cap, self.seed)
        self.centroids = kmeans_train(train, self.nlist, max_iters=iters,
                                      seed=self.seed).centroids
        assign = assign_to_centroids(x, self.centroids)
        order = np.lexsort((np.arange(dataset.count), assign))
        self.list_ids = order.astype(np.uint32)
        counts = np.bincount(assign, minlength=self.nlist)
        self.offsets = np.zeros(self.nlist + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])

        if self.encoding == "flat":
            self.vecs = x[order]
        else:
            self.sq8 = sq8_train(x)
            self.codes = sq8_encode_many(self.sq8, x)[order]
        self.dataset_name = dataset.name
        self.count = dataset.count
        self.dim = dataset.dim
        self._built = True

    # -- search helpers ----------------------------------------------------

    def _probe_order(self, query: np.ndarray, nprobe: int) -> np.ndarray:
        _, keys = metric_keys_batch(self.centroids, query, self.metric)
        return top_k_by_key(keys, nprobe)

    def _gather(self, probes: np.ndarray):
        spans = [np.arange(self.offsets[c], self.offsets[c + 1]) for c in probes]
        pos = np.concatenate(spans) if spans else np.empty(0, dtype=np.int64)
        if self.encoding == "flat":
            rows = self.vecs[pos]
        else:
            rows = sq8_decode_many(self.sq8, self.codes[pos])
        return self.list_ids[pos], rows

    def _validate_nprobe(self, params) -> int:
        p = Params.of(params)
        p.ensure_known(self.SEARCH_KEYS)
        nprobe = p.get_int("nprobe", 1)
        if not 1 <= nprobe <= self.nlist:
            raise ValidationError(f"nprobe={nprobe} must be in [1, nlist={self.nlist}]")
        return nprobe

    def search_knn(self, queries: VectorDataset, k: int, params=None) -> ResultSet:
        self._require_built()
        nprobe = self._validate_nprobe(params)
        self._check_queries(queries, self.dim)
        qmat = queries.as_float32()
        ids_out, dists_out = [], []
        for q in range(queries.count):
            cand_ids, rows = self._gather(self._probe_order(qmat[q], nprobe))
            vals, keys = metric_keys_batch(rows, qmat[q], self.metric)
            sel = top_k_by_key(keys, min(k, cand_ids.shape[0]), ids=cand_ids)
            ids_out.append(cand_ids[sel])
            dists_out.append(vals[sel])
        return ResultSet(ids_out, dists_out)

    def search_range(self, queries: VectorDataset, radius: float, params=None) -> ResultSet:
        self._require_built()
        nprobe = self._validate_nprobe(params)
        self._check_queries(queries, self.dim)
        if self.metric is not Metric.L2:
            raise ValidationError("range search supports only the L2 metric")
        qmat = queries.as_float32()
        r32 = np.float32(radius)
        ids_out, dists_out = [], []
        for q in range(queries.count):
            cand_ids, rows = self._gather(self._probe_order(qmat[q], nprobe))
            vals, keys = metric_keys_batch(rows, qmat[q], Metric.L2)
            hit = np.flatnonzero(keys <= r32)
            order = np.lexsort((cand_ids[hit], keys[hit]))
            ids_out.append(cand_ids[hit[order]])
            dists_out.append(vals[hit[order]])
        return ResultSet(ids_out, dists_out)

    def describe(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "build_params": {
                "metric": self.metric.value,
                "nlist": self.nlist,
                "encoding": self.encoding,
                "seed": self.seed,
            },
        }

    def index_size_bytes(self) -> int:
        self._require_built()
        total = self.centroids.nbytes + self.list_ids.nbytes + self.offsets.nbytes
        if self.encoding == "flat":
            total += self.vecs.nbytes
        else:
            total += self.codes.nbytes + self.sq8.min.nbytes + self.sq8.scale.nbytes
        return int(total)

    def _state(self):
        self._require_built()
        meta = {
            "metric": self.metric.value,
            "nlist": self.nlist,
            "encoding": self.encoding,
            "seed": self.seed,
            "dataset_name": self.dataset_name,
            "count": self.count,
            "dim": self.dim,
        }
        arrays = {
            "centroids": self.centroids,
            "list_ids": self.list_ids,
            "offsets": self.offsets,
        }
        if self.encoding == "flat":
            arrays["vecs"] = self.vecs
        else:
            arrays["codes"] = self.codes
            arrays["sq8_min"] = self.sq8.min
            arrays["sq8_scale"] = self.sq8.scale
        return meta, arrays

    @classmethod
    def _restore(cls, meta, arrays):
        index = cls()
        index.metric = Metric(meta["metric"])
        index.nlist = meta["nlist"]
        index.encoding = meta["encoding"]
        index.seed = meta["seed"]
        index.dataset_name = meta["dataset_name"]
        index.count = meta["count"]
        index.dim = meta["dim"]
        index.centroids = arrays["centroids"]
        index.list_ids = arrays["list_ids"]
        index.offsets = arrays["offsets"]
        if index.encoding == "flat":
            index.vecs = arrays["vecs"]
        else:
            index.codes = arrays["codes"]
            index.sq8 = Sq8Model(min=arrays["sq8_min"].copy(),
                                 scale=arrays["sq8_scale"].copy())
        index._built = True
        return index
