# Benchmarking an out-of-process algorithm over the REST protocol.
#
# The server wraps any index behind five JSON endpoints; the client adaptor
# satisfies the same interface as an in-process index, so the harness drives
# both identically. Vector payloads travel as base64 of the binary dataset
# format, which keeps the loopback bit-exact.

import warnings

import numpy as np

import bigann_bench as bb
from bigann_bench.rest import remote_index, serve_algorithm

spec = bb.SyntheticSpec(n=5000, dim=32, n_clusters=16, seed=13, n_queries=200)
base, queries = bb.generate_synthetic(spec)
gt = bb.brute_force_knn(base, queries, 10)
warnings.filterwarnings("ignore", message=".*at least 10000.*")

with serve_algorithm(lambda: bb.create_index("ivf")) as server:
    print(f"server listening at {server.address}")

    remote = remote_index(server.address)
    remote.build(base, {"nlist": 64, "seed": 0})
    print(f"remote describe: {remote.describe()['remote']}")
    print(f"remote index size: {remote.index_size_bytes() / 2**20:.1f} MiB")

    # the adaptor is a drop-in index: the harness times it like any other
    records = bb.run_experiment(
        remote, base, queries, gt,
        [bb.QueryConfig(name="probe8", params=bb.Params({"nprobe": 8}))],
    )
    rec = records[0]
    print(f"\nremote run: qps={rec.qps:.0f} recall@10={rec.accuracy:.4f} "
          f"(includes HTTP + base64 overhead)")

    # loopback results are bit-identical to in-process execution
    local = bb.create_index("ivf")
    local.build(base, {"nlist": 64, "seed": 0})
    r_remote = remote.search_knn(queries, 10, {"nprobe": 8})
    r_local = local.search_knn(queries, 10, {"nprobe": 8})
    print(f"\nremote == local: {r_remote == r_local}")

print("\nserver stopped")
print("the same server is available from the command line: "
      "bigann-bench serve --algo ivf --listen 127.0.0.1:8080")
