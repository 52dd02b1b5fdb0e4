# Vector codecs: k-means, product quantization, and 8-bit scalar quantization.
#
# Shows codebook training, encode/decode roundtrips, the asymmetric distance
# table a PQ search uses, and how compression trades memory for error.

import numpy as np

import bigann_bench as bb
from bigann_bench.quantization import (
    pq_decode_many,
    pq_encode_many,
    sq8_decode_many,
    sq8_encode_many,
)

spec = bb.SyntheticSpec(n=10_000, dim=64, n_clusters=32, seed=7, n_queries=1)
base, _ = bb.generate_synthetic(spec)
x = base.as_float32()

# --- k-means ----------------------------------------------------------------
model = bb.kmeans_train(x, k=64, max_iters=25, seed=0)
print(f"k-means: {model.k} centroids, {model.iterations_run} iterations")
print(f"inertia history head: {[round(v) for v in model.inertia_history[:5]]}")
assert all(b <= a for a, b in zip(model.inertia_history, model.inertia_history[1:]))

# --- product quantization ------------------------------------------------------
# 64 dims -> 8 subspaces x 8 bits: each vector becomes 8 bytes (32x smaller).
book = bb.pq_train(x, m=8, nbits=8, seed=0)
codes = pq_encode_many(book, x)
decoded = pq_decode_many(book, codes)
mse = float(((decoded - x) ** 2).sum(axis=1).mean())
print(f"\nPQ m=8 nbits=8: {x.nbytes} raw bytes -> {codes.nbytes} code bytes, "
      f"mean squared reconstruction error {mse:.4f}")

for m in (4, 8, 16):
    b = bb.pq_train(x, m=m, nbits=8, seed=0)
    d = pq_decode_many(b, pq_encode_many(b, x))
    print(f"  m={m:>2}: mse {float(((d - x) ** 2).sum(axis=1).mean()):.4f}")

# asymmetric distance: one (m x 256) table per query scores any code by lookup
query = x[123] + 0.05
table = bb.pq_adc_table(book, query)
adc = bb.adc_lookup(table, codes[123])
exact = bb.compute_distance(query, decoded[123])
print(f"\nADC lookup {adc:.5f} vs recomputed distance to decode {exact:.5f}")

# --- SQ8 ----------------------------------------------------------------------
sq8 = bb.sq8_train(x)
sq_codes = sq8_encode_many(sq8, x)
sq_decoded = sq8_decode_many(sq8, sq_codes)
worst = float(np.abs(sq_decoded - x).max())
print(f"\nSQ8: 4 bytes/dim -> 1 byte/dim, max roundtrip error {worst:.5f} "
      f"(bound max scale/2 = {float(sq8.scale.max() / 2):.5f})")
