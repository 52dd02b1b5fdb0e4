"""Leaderboard arithmetic: Pareto frontiers over (QPS, accuracy) points, the
four ranking modes, the replication cost model, energy integration, and
tradeoff plot/CSV emission."""

from __future__ import annotations

import enum
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# conventional QPS thresholds per standardized hardware track
TRACK_QPS_THRESHOLDS = {"T1": 10000.0, "T2": 1500.0, "T3": 2000.0}


@dataclass
class TradeoffPoint:
    qps: float
    accuracy: float
    config: str = ""
    energy_joules_per_query: float | None = None
    record: object = None  # source RunRecord, if any

    def __post_init__(self):
        if self.qps <= 0:
            raise ValidationError(f"qps must be > 0, got {self.qps}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValidationError(f"accuracy must be in [0, 1], got {self.accuracy}")


@dataclass
class ParetoCurve:
    """Non-dominated points, sorted by qps descending; accuracy strictly
    increases as qps decreases."""

    points: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def pareto_frontier(points) -> ParetoCurve:
    """Exactly the non-dominated points. A point is dominated when another
    has >= qps and >= accuracy with at least one strict; full ties keep the
    first point in input order."""
    points = list(points)
    if not points:
        raise ValidationError("cannot build a Pareto frontier from no points")
    order = sorted(range(len(points)),
                   key=lambda i: (-points[i].qps, -points[i].accuracy, i))
    kept = []
    best_acc = -math.inf
    for i in order:
        if points[i].accuracy > best_acc:
            kept.append(points[i])
            best_acc = points[i].accuracy
    return ParetoCurve(points=kept)


def accuracy_at_qps(curve: ParetoCurve, threshold_qps: float) -> float | None:
    """Maximum accuracy over points with at least ``threshold_qps``; None if
    no point qualifies."""
    qualifying = [p.accuracy for p in curve if p.qps >= threshold_qps]
    return max(qualifying) if qualifying else None


def qps_at_accuracy(curve: ParetoCurve, min_accuracy: float) -> float | None:
    """Maximum qps over points with at least ``min_accuracy``; None if no
    point qualifies."""
    qualifying = [p.qps for p in curve if p.accuracy >= min_accuracy]
    return max(qualifying) if qualifying else None


# ---------------------------------------------------------------------------
# power and cost
# ---------------------------------------------------------------------------

def integrate_power_trace(timestamps_s, watts) -> float:
    """Trapezoidal energy (joules) of a sampled power trace."""
    t = np.asarray(timestamps_s, dtype=np.float64)
    w = np.asarray(watts, dtype=np.float64)
    if t.size == 0:
        raise ValidationError("power trace has no samples")
    if t.shape != w.shape or t.ndim != 1:
        raise ValidationError("timestamps and watts must be matching 1-d sequences")
    if t.size > 1 and (np.diff(t) < 0).any():
        raise ValidationError("power trace timestamps must be non-decreasing")
    if t.size == 1:
        return 0.0
    return float(np.sum(np.diff(t) * (w[1:] + w[:-1]) * 0.5))


def joules_per_query(energy_joules_total: float, num_queries: int) -> float:
    if num_queries <= 0:
        raise ValidationError("num_queries must be > 0")
    if energy_joules_total < 0:
        raise ValidationError("energy must be >= 0")
    return energy_joules_total / num_queries


def gated_joules_per_query(points, qps_threshold: float,
                           min_accuracy: float = 0.9) -> float:
    """Best joules/query over configs meeting both the QPS threshold and the
    accuracy floor."""
    qualifying = [
        p.energy_joules_per_query for p in points
        if p.energy_joules_per_query is not None
        and p.qps >= qps_threshold and p.accuracy >= min_accuracy
    ]
    if not qualifying:
        raise ValidationError(
            f"no configuration reaches both {qps_threshold} QPS and "
            f"accuracy {min_accuracy} with energy data"
        )
    return min(qualifying)


@dataclass
class CostModelInput:
    machine_msrp_usd: float
    avg_power_watts: float
    achieved_qps: float
    target_qps: float = 100000.0
    horizon_years: float = 4.0
    energy_rate_usd_per_kwh: float = 0.10

    def __post_init__(self):
        for name in ("machine_msrp_usd", "avg_power_watts", "achieved_qps",
                     "target_qps", "horizon_years", "energy_rate_usd_per_kwh"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")


def machines_required(achieved_qps: float, target_qps: float = 100000.0) -> int:
    if achieved_qps <= 0:
        raise ValidationError("achieved_qps must be > 0")
    return math.ceil(target_qps / achieved_qps)


def capacity_cost(inp: CostModelInput) -> float:
    """Machines needed to horizontally serve the target QPS, times per-machine
    hardware price plus energy over the horizon (365-day years)."""
    machines = machines_required(inp.achieved_qps, inp.target_qps)
    horizon_hours = inp.horizon_years * 365 * 24
    per_machine = (inp.machine_msrp_usd
                   + inp.avg_power_watts / 1000.0 * horizon_hours
                   * inp.energy_rate_usd_per_kwh)
    return machines * per_machine


# ---------------------------------------------------------------------------
# leaderboards
# ---------------------------------------------------------------------------

class LeaderboardMode(enum.Enum):
    RECALL_AT_QPS = "recall-at-qps"
    QPS_AT_RECALL = "qps-at-recall"
    JOULES_PER_QUERY = "joules-per-query"
    CAPACITY_COST = "capacity-cost"


@dataclass
class LeaderboardEntry:
    algorithm: str
    cells: dict                      # dataset -> value or None
    improvements: dict = field(default_factory=dict)  # recall mode only
    aggregate: float | None = None
    eligible: bool | None = None
    rank: int | None = None

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "cells": self.cells,
            "improvements": self.improvements,
            "aggregate": self.aggregate,
            "eligible": self.eligible,
            "rank": self.rank,
        }


@dataclass
class Leaderboard:
    mode: LeaderboardMode
    qps_threshold: float
    min_accuracy: float
    min_datasets: int
    baseline: str
    datasets: list
    entries: list
    per_dataset_rankings: dict | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "qps_threshold": self.qps_threshold,
            "min_accuracy": self.min_accuracy,
            "min_datasets": self.min_datasets,
            "baseline": self.baseline,
            "datasets": self.datasets,
            "entries": [e.to_dict() for e in self.entries],
            "per_dataset_rankings": self.per_dataset_rankings,
        }


def leaderboard(
    curves: dict,
    baseline: str,
    mode: LeaderboardMode = LeaderboardMode.RECALL_AT_QPS,
    qps_threshold: float = 10000.0,
    min_datasets: int = 3,
    min_accuracy: float = 0.9,
    hardware: dict | None = None,
) -> Leaderboard:
    """Rank algorithms from per-(algorithm, dataset) Pareto curves.

    ``curves`` maps algorithm -> {dataset -> ParetoCurve}. The recall mode
    scores each dataset as the accuracy improvement over the baseline at the
    QPS threshold and sums over datasets (missing datasets contribute 0);
    algorithms qualifying on fewer than ``min_datasets`` datasets are flagged
    ineligible. The remaining modes report per-dataset tables, ranked per
    dataset, with no cross-dataset aggregate. ``hardware`` supplies
    {algorithm: {"machine_msrp_usd": .., "avg_power_watts": ..}} for the
    capacity-cost mode.
    """
    if baseline not in curves:
        raise ValidationError(f"baseline '{baseline}' has no curves")
    datasets = sorted({ds for per_ds in curves.values() for ds in per_ds})
    missing = [ds for ds in datasets if ds not in curves[baseline]]
    if missing:
        raise ValidationError(
            f"baseline '{baseline}' is missing curves for: {', '.join(missing)}"
        )

    def cell_value(algo: str, ds: str) -> float | None:
        curve = curves[algo].get(ds)
        if curve is None:
            return None
        if mode is LeaderboardMode.RECALL_AT_QPS:
            return accuracy_at_qps(curve, qps_threshold)
        if mode is LeaderboardMode.QPS_AT_RECALL:
            return qps_at_accuracy(curve, min_accuracy)
        if mode is LeaderboardMode.JOULES_PER_QUERY:
            try:
                return gated_joules_per_query(curve.points, qps_threshold, min_accuracy)
            except ValidationError:
                return None
        if mode is LeaderboardMode.CAPACITY_COST:
            spec = (hardware or {}).get(algo)
            if spec is None:
                return None
            best = None
            for p in curve:
                if p.accuracy < min_accuracy:
                    continue
                cost = capacity_cost(CostModelInput(
                    machine_msrp_usd=spec["machine_msrp_usd"],
                    avg_power_watts=spec["avg_power_watts"],
                    achieved_qps=p.qps,
                ))
                best = cost if best is None else min(best, cost)
            return best
        raise ValidationError(f"unsupported leaderboard mode {mode}")

    entries = []
    for algo in sorted(curves):
        cells = {ds: cell_value(algo, ds) for ds in datasets}
        entries.append(LeaderboardEntry(algorithm=algo, cells=cells))

    if mode is LeaderboardMode.RECALL_AT_QPS:
        base_cells = {ds: cell_value(baseline, ds) for ds in datasets}
        for entry in entries:
            improvements = {}
            qualifying = 0
            for ds in datasets:
                cell = entry.cells[ds]
                if cell is None:
                    continue
                qualifying += 1
                improvements[ds] = cell - (base_cells[ds] or 0.0)
            entry.improvements = improvements
            entry.aggregate = float(sum(improvements.values()))
            entry.eligible = qualifying >= min_datasets
        entries.sort(key=lambda e: (not e.eligible, -e.aggregate, e.algorithm))
        for rank, entry in enumerate(entries, start=1):
            entry.rank = rank
        rankings = None
    else:
        reverse = mode is LeaderboardMode.QPS_AT_RECALL  # higher is better
        rankings = {}
        for ds in datasets:
            scored = [e for e in entries if e.cells[ds] is not None]
            scored.sort(key=lambda e: (-e.cells[ds] if reverse else e.cells[ds],
                                       e.algorithm))
            rankings[ds] = [e.algorithm for e in scored]

    return Leaderboard(
        mode=mode,
        qps_threshold=qps_threshold,
        min_accuracy=min_accuracy,
        min_datasets=min_datasets,
        baseline=baseline,
        datasets=datasets,
        entries=entries,
        per_dataset_rankings=rankings,
    )


def points_from_runs(records) -> dict:
    """Group run records into {algorithm: {dataset: [TradeoffPoint]}}."""
    out: dict = {}
    for rec in records:
        point = TradeoffPoint(
            qps=rec.qps,
            accuracy=rec.accuracy,
            config=rec.config,
            energy_joules_per_query=(
                rec.energy_joules / rec.num_queries
                if rec.energy_joules is not None else None
            ),
            record=rec,
        )
        out.setdefault(rec.algorithm, {}).setdefault(rec.dataset, []).append(point)
    return out


def curves_from_runs(records) -> dict:
    """Pareto curves per (algorithm, dataset) from raw run records."""
    return {
        algo: {ds: pareto_frontier(points) for ds, points in per_ds.items()}
        for algo, per_ds in points_from_runs(records).items()
    }


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def write_tradeoff_csv(curves: dict, path) -> None:
    """Rows of ``algorithm,config,qps,accuracy``; floats use repr so a
    re-ingested file reproduces the curves exactly."""
    with open(path, "w", encoding="utf-8") as fp:
        fp.write("algorithm,config,qps,accuracy\n")
        for algo in sorted(curves):
            for p in curves[algo]:
                fp.write(f"{algo},{p.config},{p.qps!r},{p.accuracy!r}\n")


def read_tradeoff_csv(path) -> dict:
    """Inverse of ``write_tradeoff_csv``: {algorithm: ParetoCurve}."""
    out: dict = {}
    with open(path, "r", encoding="utf-8") as fp:
        header = fp.readline().strip()
        if header != "algorithm,config,qps,accuracy":
            raise ValidationError(f"unexpected csv header: {header!r}")
        for line in fp:
            line = line.strip()
            if not line:
                continue
            algo, config, qps, accuracy = line.split(",")
            out.setdefault(algo, []).append(
                TradeoffPoint(qps=float(qps), accuracy=float(accuracy), config=config)
            )
    return {algo: ParetoCurve(points=pts) for algo, pts in out.items()}


_PLOT_W, _PLOT_H = 720, 480
_MARGIN = 60
_SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                  "#8c564b", "#e377c2", "#7f7f7f"]


def write_tradeoff_svg(curves: dict, path, qps_cutoff: float | None = None,
                       title: str = "QPS / accuracy tradeoff") -> None:
    """Log-QPS vs accuracy plot: one path per algorithm series, plus an
    optional vertical cutoff line at the leaderboard threshold."""
    all_points = [p for curve in curves.values() for p in curve]
    if not all_points:
        raise ValidationError("nothing to plot: no curve points")
    qps_values = [p.qps for p in all_points]
    if qps_cutoff is not None:
        qps_values.append(qps_cutoff)
    lo = math.log10(min(qps_values)) - 0.05
    hi = math.log10(max(qps_values)) + 0.05
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5

    def x_of(qps: float) -> float:
        return _MARGIN + (math.log10(qps) - lo) / (hi - lo) * (_PLOT_W - 2 * _MARGIN)

    def y_of(acc: float) -> float:
        return _PLOT_H - _MARGIN - acc * (_PLOT_H - 2 * _MARGIN)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg",
                     width=str(_PLOT_W), height=str(_PLOT_H))
    ET.SubElement(svg, "text", x=str(_PLOT_W // 2), y="24",
                  attrib={"text-anchor": "middle", "font-size": "14"}).text = title
    axis_style = {"stroke": "#333333", "stroke-width": "1"}
    ET.SubElement(svg, "line", attrib={
        "x1": str(_MARGIN), "y1": str(_PLOT_H - _MARGIN),
        "x2": str(_PLOT_W - _MARGIN), "y2": str(_PLOT_H - _MARGIN), **axis_style})
    ET.SubElement(svg, "line", attrib={
        "x1": str(_MARGIN), "y1": str(_MARGIN),
        "x2": str(_MARGIN), "y2": str(_PLOT_H - _MARGIN), **axis_style})
    ET.SubElement(svg, "text", x=str(_PLOT_W // 2), y=str(_PLOT_H - 16),
                  attrib={"text-anchor": "middle", "font-size": "12"}
                  ).text = "queries per second (log scale)"
    ET.SubElement(svg, "text", x="18", y=str(_PLOT_H // 2),
                  attrib={"font-size": "12",
                          "transform": f"rotate(-90 18 {_PLOT_H // 2})",
                          "text-anchor": "middle"}).text = "accuracy"

    if qps_cutoff is not None:
        x = x_of(qps_cutoff)
        ET.SubElement(svg, "line", x1=f"{x:.2f}", y1=str(_MARGIN),
                      x2=f"{x:.2f}", y2=str(_PLOT_H - _MARGIN),
                      attrib={"stroke": "#999999", "stroke-width": "1",
                              "stroke-dasharray": "4 3"})
        ET.SubElement(svg, "text", x=f"{x + 4:.2f}", y=str(_MARGIN + 12),
                      attrib={"font-size": "11", "fill": "#666666"}
                      ).text = f"cutoff {qps_cutoff:g}"

    for idx, algo in enumerate(sorted(curves)):
        pts = sorted(curves[algo], key=lambda p: p.qps)
        if not pts:
            continue
        color = _SERIES_COLORS[idx % len(_SERIES_COLORS)]
        d = " ".join(
            f"{'M' if i == 0 else 'L'} {x_of(p.qps):.2f} {y_of(p.accuracy):.2f}"
            for i, p in enumerate(pts)
        )
        ET.SubElement(svg, "path", d=d,
                      attrib={"fill": "none", "stroke": color, "stroke-width": "1.5",
                              "data-series": algo})
        ET.SubElement(svg, "text", x=str(_PLOT_W - _MARGIN + 6),
                      y=str(_MARGIN + 16 * idx + 10),
                      attrib={"font-size": "11", "fill": color}).text = algo

    ET.ElementTree(svg).write(path, encoding="unicode", xml_declaration=True)


def emit_tradeoff_plot(curves: dict, path, fmt: str = "svg",
                       qps_cutoff: float | None = None) -> None:
    """Write curves as ``svg`` (plot) or ``csv`` (rows)."""
    if fmt == "svg":
        write_tradeoff_svg(curves, path, qps_cutoff=qps_cutoff)
    elif fmt == "csv":
        write_tradeoff_csv(curves, path)
    else:
        raise ValidationError(f"unknown plot format '{fmt}' (use 'svg' or 'csv')")
