"""Inverted-file index over product-quantized residuals.

Each point is stored as the PQ code of its residual against the assigned
coarse centroid. A search builds one asymmetric-distance table per probed
list from the query residual and scores codes by table lookup. Raw vectors
are retained so the optional exact re-ranking stage can rescore the top
candidates; re-ranking is off by default.
"""

from __future__ import annotations

import numpy as np

from ..dataset import Metric, VectorDataset, l2_squared_batch
from ..errors import ValidationError
from ..oracle import top_k_by_key
from ..quantization import (
    PqCodebook,
    adc_lookup_many,
    kmeans_train,
    pq_adc_table,
    pq_encode_many,
    pq_train,
    sample_rows,
)
from .base import AnnIndex, Params, ResultSet, register_index
from .ivf import assign_to_centroids


@register_index
class IvfPqIndex(AnnIndex):

    algorithm = "ivfpq"
    BUILD_KEYS = {"metric", "nlist", "m", "nbits", "seed", "kmeans_iters",
                  "train_cap", "pq_train_cap"}
    SEARCH_KEYS = {"nprobe", "rerank"}

    def __init__(self):
        self._built = False
        self.nlist = 0
        self.m = 0
        self.nbits = 0
        self.seed = 0
        self.centroids = None   # (nlist, d) f32
        self.book: PqCodebook | None = None
        self.list_ids = None    # (n,) u32 grouped by list then id
        self.offsets = None     # (nlist + 1,) i64
        self.codes = None       # (n, m) grouped residual codes
        self.vecs = None        # (n, d) f32 grouped raw vectors (for re-ranking)
        self.dataset_name = ""
        self.count = 0
        self.dim = 0

    def build(self, dataset: VectorDataset, params=None) -> None:
        p = Params.of(params)
        p.ensure_known(self.BUILD_KEYS)
        if p.get_metric() is not Metric.L2:
            raise ValidationError("ivfpq supports only the L2 metric")
        if dataset.count < 1:
            raise ValidationError("cannot build an IVFPQ index over an empty dataset")
        self.nlist = p.get_int("nlist", 64)
        self.m = p.get_int("m", 8)
        self.nbits = p.get_int("nbits", 8)
        self.seed = p.get_int("seed", 0)
        if not 1 <= self.nlist <= dataset.count:
            raise ValidationError(f"nlist={self.nlist} must be in [1, {dataset.count}]")
        if dataset.dim % self.m != 0:
            raise ValidationError(f"dim {dataset.dim} not divisible by m={self.m}")
        iters = p.get_int("kmeans_iters", 25)
        cap = p.get_int("train_cap", 256 * self.nlist)
        pq_cap = p.get_int("pq_train_cap", 256 * 2 ** self.nbits)

        rng = np.random.default_rng(self.seed)
        coarse_seed = int(rng.integers(2 ** 63 - 1))
        pq_seed = int(rng.integers(2 ** 63 - 1))

        x = dataset.as_float32()
        train = sample_rows(x, cap, coarse_seed)
        self.centroids = kmeans_train(train, self.nlist, max_iters=iters,
                                      seed=coarse_seed).centroids
        assign = assign_to_centroids(x, self.centroids)
        residuals = x - self.centroids[assign]
        self.book = pq_train(residuals, self.m, self.nbits, seed=pq_seed,
                             max_iters=iters, train_cap=pq_cap)
        codes = pq_encode_many(self.book, residuals)

        order = np.lexsort((np.arange(dataset.count), assign))
        self.list_ids = order.astype(np.uint32)
        counts = np.bincount(assign, minlength=self.nlist)
        self.offsets = np.zeros(self.nlist + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])
        self.codes = codes[order]
        self.vecs = x[order]
        self.dataset_name = dataset.name
        self.count = dataset.count
        self.dim = dataset.dim
        self._built = True

    def search_knn(self, queries: VectorDataset, k: int, params=None) -> ResultSet:
        self._require_built()
        p = Params.of(params)
        p.ensure_known(self.SEARCH_KEYS)
        nprobe = p.get_int("nprobe", 1)
        rerank = p.get_int("rerank", 0)
        if not 1 <= nprobe <= self.nlist:
            raise ValidationError(f"nprobe={nprobe} must be in [1, nlist={self.nlist}]")
        if rerank < 0:
            raise ValidationError("rerank must be >= 0")
        self._check_queries(queries, self.dim)

        qmat = queries.as_float32()
        ids_out, dists_out = [], []
        for q in range(queries.count):
            query = qmat[q]
            ckeys = l2_squared_batch(self.centroids, query)
            probes = top_k_by_key(ckeys, nprobe)
            pos_parts, adc_parts = [], []
            for c in probes:
                lo, hi = self.offsets[c], self.offsets[c + 1]
                if hi == lo:
                    continue
                table = pq_adc_table(self.book, query - self.centroids[c])
                pos_parts.append(np.arange(lo, hi))
                adc_parts.append(adc_lookup_many(table, self.codes[lo:hi]))
            if not pos_parts:
                ids_out.append(np.empty(0, np.uint32))
                dists_out.append(np.empty(0, np.float32))
                continue
            pos = np.concatenate(pos_parts)
            adc = np.concatenate(adc_parts)
            cand_ids = self.list_ids[pos]
            if rerank > 0:
                pre = top_k_by_key(adc, min(rerank, pos.shape[0]), ids=cand_ids)
                exact = l2_squared_batch(self.vecs[pos[pre]], query)
                sel = top_k_by_key(exact, min(k, pre.shape[0]), ids=cand_ids[pre])
                ids_out.append(cand_ids[pre][sel])
                dists_out.append(exact[sel])
            else:
                sel = top_k_by_key(adc, min(k, pos.shape[0]), ids=cand_ids)
                ids_out.append(cand_ids[sel])
                dists_out.append(adc[sel])
        return ResultSet(ids_out, dists_out)

    def search_range(self, queries: VectorDataset, radius: float, params=None) -> ResultSet:
        raise ValidationError(
            "range search is not supported by ivfpq; use flat, ivf, or vamana"
        )

    def describe(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "build_params": {
                "metric": Metric.L2.value,
                "nlist": self.nlist,
                "m": self.m,
                "nbits": self.nbits,
                "seed": self.seed,
            },
        }

    def index_size_bytes(self) -> int:
        self._require_built()
        return int(
            self.centroids.nbytes + self.book.codebooks.nbytes + self.list_ids.nbytes
            + self.offsets.nbytes + self.codes.nbytes + self.vecs.nbytes
        )

    def _state(self):
        self._require_built()
        meta = {
            "nlist": self.nlist,
            "m": self.m,
            "nbits": self.nbits,
            "seed": self.seed,
            "dataset_name": self.dataset_name,
            "count": self.count,
            "dim": self.dim,
        }
        arrays = {
            "centroids": self.centroids,
            "codebooks": self.book.codebooks,
            "list_ids": self.list_ids,
            "offsets": self.offsets,
            "codes": self.codes,
            "vecs": self.vecs,
        }
        return meta, arrays

    @classmethod
    def _restore(cls, meta, arrays):
        index = cls()
        index.nlist = meta["nlist"]
        index.m = meta["m"]
        index.nbits = meta["nbits"]
        index.seed = meta["seed"]
        index.dataset_name = meta["dataset_name"]
        index.count = meta["count"]
        index.dim = meta["dim"]
        index.centroids = arrays["centroids"]
        index.book = PqCodebook(m=index.m, nbits=index.nbits,
                                codebooks=arrays["codebooks"])
        index.list_ids = arrays["list_ids"]
        index.offsets = arrays["offsets"]
        index.codes = arrays["codes"]
        index.vecs = arrays["vecs"]
        index._built = True
        return index
