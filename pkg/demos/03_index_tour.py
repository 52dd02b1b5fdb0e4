# A tour of the baseline indexes: flat scan, IVF (flat and SQ8 lists),
# IVFPQ with optional exact re-ranking, and the Vamana graph.
#
# Builds each index over the same 20k-point dataset and reports recall@10
# against exact ground truth, index size, and the knobs that matter.

import time

import numpy as np

import bigann_bench as bb

spec = bb.SyntheticSpec(n=20_000, dim=64, n_clusters=64, cluster_std=0.25,
                        seed=3, n_queries=200)
base, queries = bb.generate_synthetic(spec)
gt = bb.brute_force_knn(base, queries, 10, workers=4)


def trial(label, algo, build_params, search_params):
    index = bb.create_index(algo)
    t0 = time.perf_counter()
    index.build(base, build_params)
    build_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    results = index.search_knn(queries, 10, search_params)
    search_s = time.perf_counter() - t0
    recall = bb.recall_at_k(results, gt, 10).value
    mib = index.index_size_bytes() / 2**20
    print(f"{label:>8} {str(search_params):<28} recall {recall:.4f}  "
          f"build {build_s:5.1f}s  search {search_s*1e3:6.1f}ms  size {mib:6.1f} MiB")
    return index


print(f"dataset: {base.count} x {base.dim}, 200 queries, k=10\n")

trial("flat", "flat", {}, {})

# IVF: coarse k-means partition; nprobe trades recall for speed
ivf = trial("ivf", "ivf", {"nlist": 128, "seed": 0}, {"nprobe": 4})
for nprobe in (16, 128):
    r = ivf.search_knn(queries, 10, {"nprobe": nprobe})
    print(f"        ivf nprobe={nprobe:<4} recall {bb.recall_at_k(r, gt, 10).value:.4f}")

# full probe scans everything with exact distances: identical to flat
flat_res = bb.create_index("flat")
flat_res.build(base, {})
assert ivf.search_knn(queries, 10, {"nprobe": 128}) == flat_res.search_knn(queries, 10, {})

trial("ivf-sq8", "ivf", {"nlist": 128, "encoding": "sq8", "seed": 0}, {"nprobe": 16})

# IVFPQ: residuals against the coarse centroid are PQ-coded; rerank rescores
# the top candidates with exact distances from the retained raw vectors
pq = trial("ivfpq", "ivfpq", {"nlist": 128, "m": 8, "nbits": 8, "seed": 0}, {"nprobe": 16})
r = pq.search_knn(queries, 10, {"nprobe": 16, "rerank": 100})
print(f"        ivfpq + rerank=100  recall {bb.recall_at_k(r, gt, 10).value:.4f}")

# Vamana: bounded-degree proximity graph searched by a best-first beam
vam = trial("vamana", "vamana",
            {"max_degree": 32, "build_width": 64, "alpha": 1.2, "seed": 0},
            {"search_width": 100})
for width in (10, 40):
    r = vam.search_knn(queries, 10, {"search_width": width})
    print(f"        vamana width={width:<4} recall {bb.recall_at_k(r, gt, 10).value:.4f}")

# every index persists to one file and answers identically after reload
import tempfile
from pathlib import Path

path = Path(tempfile.mkdtemp()) / "vamana.annidx"
bb.save_index(vam, path)
assert bb.load_index(path).search_knn(queries, 10, {"search_width": 100}) == \
    vam.search_knn(queries, 10, {"search_width": 100})
print(f"\nsaved and reloaded {path.name}: searches are bit-identical")
