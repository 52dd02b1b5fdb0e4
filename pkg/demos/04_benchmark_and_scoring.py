# The measurement pipeline: timed batch experiments -> run records ->
# Pareto curves -> leaderboard scores and tradeoff plots.
#
# Mirrors the evaluation methodology end to end at desk scale: each search
# configuration is timed over the whole query batch, accuracy is scored
# against exact ground truth, and the leaderboard reports the best accuracy
# reachable at a QPS threshold, as improvement over a baseline.

import json
import tempfile
import warnings
from pathlib import Path

import numpy as np

import bigann_bench as bb

out = Path(tempfile.mkdtemp(prefix="bigann-demo-"))
spec = bb.SyntheticSpec(n=20_000, dim=32, n_clusters=48, cluster_std=0.2,
                        seed=9, n_queries=2000)
base, queries = bb.generate_synthetic(spec)
gt = bb.brute_force_knn(base, queries, 10, workers=4)
warnings.filterwarnings("ignore", message=".*at least 10000.*")  # desk scale

# --- run experiments ----------------------------------------------------------
# One build configuration and up to ten search configurations per algorithm.
experiments = {
    "ivf-baseline": ("ivf", {"nlist": 128, "seed": 0},
                     [("probe1", {"nprobe": 1}), ("probe4", {"nprobe": 4}),
                      ("probe16", {"nprobe": 16}), ("probe64", {"nprobe": 64})]),
    "graph": ("vamana", {"max_degree": 32, "seed": 0},
              [("w10", {"search_width": 10}), ("w20", {"search_width": 20}),
               ("w50", {"search_width": 50}), ("w150", {"search_width": 150})]),
}

records = []
for label, (algo, build_params, configs) in experiments.items():
    index = bb.create_index(algo)
    index.build(base, build_params)
    runs = bb.run_experiment(
        index, base, queries, gt,
        [bb.QueryConfig(name=n, params=bb.Params(p)) for n, p in configs],
        repeats=3, workers=4,
    )
    for rec in runs:
        rec.algorithm = label  # distinguish entries on the leaderboard
        print(f"{label:>12} {rec.config:<8} qps={rec.qps:>9.0f} "
              f"recall@10={rec.accuracy:.4f}")
    records.extend(runs)

runs_path = out / "runs.jsonl"
bb.persist_runs(records, runs_path)
print(f"\npersisted {len(records)} run records to {runs_path}")

# --- score --------------------------------------------------------------------
curves = bb.curves_from_runs(bb.load_runs(runs_path))
threshold = float(np.median([r.qps for r in records]))
board = bb.leaderboard(curves, baseline="ivf-baseline", qps_threshold=threshold,
                       min_datasets=1)
print(f"\nrecall-at-qps leaderboard (threshold {threshold:.0f} QPS):")
for entry in board.entries:
    print(f"  {entry.rank}. {entry.algorithm:<14} aggregate {entry.aggregate:+.4f}")

# --- plot ----------------------------------------------------------------------
flat_curves = {algo: next(iter(per_ds.values())) for algo, per_ds in curves.items()}
bb.emit_tradeoff_plot(flat_curves, out / "tradeoff.svg", fmt="svg",
                      qps_cutoff=threshold)
bb.emit_tradeoff_plot(flat_curves, out / "tradeoff.csv", fmt="csv")
print(f"\nwrote {out / 'tradeoff.svg'} and .csv")

# --- power and replication cost -------------------------------------------------
# Energy comes from integrating a sampled power trace; cost is the number of
# machines needed to serve 100k QPS for four years, hardware plus electricity.
trace_t = np.linspace(0, 30, 61)
trace_w = 180 + 40 * np.sin(trace_t / 4)
energy = bb.integrate_power_trace(trace_t, trace_w)
best_qps = max(r.qps for r in records)
print(f"\nsimulated power trace: {energy:.0f} J over 30s "
      f"-> {bb.joules_per_query(energy, len(queries.data) * 3):.4f} J/query")
cost = bb.capacity_cost(bb.CostModelInput(
    machine_msrp_usd=8000.0, avg_power_watts=220.0, achieved_qps=best_qps))
print(f"capacity cost to serve 100k QPS for 4 years at {best_qps:.0f} QPS/machine: "
      f"${cost:,.0f}")
