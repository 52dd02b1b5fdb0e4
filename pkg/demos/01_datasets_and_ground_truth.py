# Datasets, binary formats, and exact ground truth.
#
# Generates a seeded synthetic dataset, writes it in the binary vector
# format, computes exact k-NN and range ground truth with the brute-force
# oracle, and shows prefix slicing for reduced-scale runs.

import tempfile
from pathlib import Path

import numpy as np

import bigann_bench as bb

out = Path(tempfile.mkdtemp(prefix="bigann-demo-"))
print(f"writing demo files under {out}\n")

# --- seeded synthetic data -------------------------------------------------
# A mixture of 16 Gaussians in 32 dimensions. The same spec always produces
# bit-identical files, so experiments are reproducible end to end.
spec = bb.SyntheticSpec(n=20_000, dim=32, n_clusters=16, seed=42, n_queries=100)
base, queries = bb.generate_synthetic(spec)
print(f"base:    {base.count} x {base.dim} ({base.kind.value})")
print(f"queries: {queries.count} x {queries.dim}")

base_path = out / "demo.base.fbin"
bb.write_vectors(base, base_path)
print(f"\n{base_path.name}: {base_path.stat().st_size} bytes "
      f"(8-byte header + {base.count}x{base.dim} float32)")
assert np.array_equal(bb.read_vectors(base_path).data, base.data)

# u8 datasets use the same header with 1-byte scalars
u8_spec = bb.SyntheticSpec(n=1000, dim=128, kind=bb.ScalarKind.U8, seed=1)
u8_base, _ = bb.generate_synthetic(u8_spec)
bb.write_vectors(u8_base, out / "sift-like.u8bin")
print(f"sift-like.u8bin: {(out / 'sift-like.u8bin').stat().st_size} bytes")

# --- exact k-NN ground truth -------------------------------------------------
gt = bb.brute_force_knn(base, queries, k=100, workers=4)
bb.write_knn_gt(gt, out / "demo.knn.gt")
print(f"\n10 nearest ids of query 0: {gt.ids[0][:10].tolist()}")
print(f"their squared L2 distances: {np.round(gt.distances[0][:10], 4).tolist()}")

# distances are squared L2: order-equivalent to true L2, no sqrt in hot loops
d0 = bb.compute_distance(queries.row(0), base.row(int(gt.ids[0][0])))
assert np.float32(d0) == gt.distances[0][0]

# --- range ground truth -----------------------------------------------------
# radius chosen so an average query has a handful of in-range points
radius = float(np.median(gt.distances[:, 9]))
range_gt = bb.brute_force_range(base, queries, radius)
lengths = [ids.size for ids in range_gt.ids]
bb.write_range_gt(range_gt, out / "demo.range.gt")
print(f"\nrange search at radius {radius:.3f}: "
      f"mean result length {np.mean(lengths):.1f}, max {max(lengths)}")

# --- prefix slicing -----------------------------------------------------------
# Reduced-scale variants reuse the same file: ids in recomputed ground truth
# refer to positions within the slice.
small = bb.slice_prefix(base, 2000)
small_gt = bb.brute_force_knn(small, queries, k=10)
print(f"\nsliced to {small.count} rows; gt ids all < {small.count}: "
      f"{bool((small_gt.ids < small.count).all())}")
