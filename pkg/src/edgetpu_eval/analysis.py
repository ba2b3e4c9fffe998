"""Batch-result analyses: correlations, best-accelerator buckets, structural trends, op swaps."""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .nas_graph import INTERIOR_OPS, CellGraph, OperationKind, canonical_hash


@dataclass(frozen=True)
class ResultRow:
    cell_hash: str
    accel: str
    latency_ms: float
    energy_mj: float
    total_params: int
    total_macs: int
    depth: int
    width: int
    n_conv3x3: int
    n_conv1x1: int
    n_maxpool3x3: int
    bound_fraction_memory: float
    mean_validation_accuracy: float | None = None

    @property
    def latency_s(self) -> float:
        return self.latency_ms * 1e-3

    @property
    def energy_j(self) -> float:
        return self.energy_mj * 1e-3


# -- correlation ---------------------------------------------------------------


def _check_pair(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("correlation undefined for constant input")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _check_pair(xs, ys)
    dx = x - x.mean()
    dy = y - y.mean()
    # rescale so tiny or huge magnitudes cannot under/overflow the dot products
    dx /= np.abs(dx).max()
    dy /= np.abs(dy).max()
    r =float(np.dot(dx, dy) / np.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return max(-1.0, min(1.0, r))


def rank_average(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    sv = v[order]
    starts = np.r_[True, sv[1:] != sv[:-1]]
    group = np.cumsum(starts) - 1
    first = np.flatnonzero(starts)
    last = np.r_[first[1:], len(v)] - 1
    avg = (first + last) / 2.0 + 1.0
    ranks = np.empty(len(v))
    ranks[order] = avg[group]
    return ranks


def spearman(xs, ys) -> float:
    x, y = _check_pair(xs, ys)
    return pearson(rank_average(x), rank_average(y))


# -- best-configuration buckets ------------------------------------------------


@dataclass
class Bucket:
    count: int
    mean_latency_ms: dict[str, float]
    mean_energy_mj: dict[str, float]


@dataclass
class BucketReport:
    accels: tuple[str, ...]
    buckets: dict[str, Bucket]
    ties: int
    # Tied cells by their lexicographically first fastest accelerator.
    ties_by_first: dict[str, int] = field(default_factory=dict)

    @property
    def num_cells(self) -> int:
        return sum(b.count for b in self.buckets.values()) + self.ties


def _by_cell(rows: Iterable[ResultRow]) -> dict[str, dict[str, ResultRow]]:
    grouped: dict[str, dict[str, ResultRow]] = defaultdict(dict)
    for row in rows:
        grouped[row.cell_hash][row.accel] = row
    return grouped


def best_config_buckets(rows: Iterable[ResultRow]) -> BucketReport:
    """Assign each cell to the accelerator on which it is fastest.

    Cells whose minimum latency is shared by several accelerators are
    counted as ties and left out of every bucket's means.
    """
    grouped = _by_cell(rows)
    accels = tuple(sorted({a for per in grouped.values() for a in per}))
    members: dict[str, list[dict[str, ResultRow]]] = {a: [] for a in accels}
    ties = 0
    ties_by_first: dict[str, int] = {a: 0 for a in accels}
    for cell_hash, per in grouped.items():
        missing = [a for a in accels if a not in per]
        if missing:
            raise ValueError(f"cell {cell_hash} has no result for {', '.join(missing)}")
        best = min(per[a].latency_ms for a in accels)
        winners = [a for a in accels if per[a].latency_ms == best]
        if len(winners) > 1:
            ties += 1
            ties_by_first[winners[0]] += 1
        else:
            members[winners[0]].append(per)
    buckets = {}
    for a in accels:
        group = members[a]
        lat = {b: float(np.mean([m[b].latency_ms for m in group])) if group else float("nan") for b in accels}
        en = {b: float(np.mean([m[b].energy_mj for m in group])) if group else float("nan") for b in accels}
        buckets[a] = Bucket(len(group), lat, en)
    return BucketReport(accels, buckets, ties, ties_by_first)


# -- operation swaps -----------------------------------------------------------


@dataclass
class SwapEntry:
    mean_delta_ms: float = 0.0
    mean_pct_delta: float = 0.0
    count: int = 0
    exact_matches: int = 0
    fallback_matches: int = 0


@dataclass
class SwapImpactMatrix:
    accel: str
    entries: dict[tuple[OperationKind, OperationKind], SwapEntry]
    attempts: int
    matched: int

    @property
    def match_rate(self) -> float:
        return self.matched / self.attempts if self.attempts else 0.0

    def __getitem__(self, key: tuple[OperationKind, OperationKind]) -> SwapEntry:
        return self.entries[key]


def swap_impact(
    cells: Iterable[CellGraph],
    latency_ms: Mapping[str, float],
    accel: str = "",
) -> SwapImpactMatrix:
    """Mean latency change from replacing one interior op with another.

    ``latency_ms`` maps canonical hash to latency for a single accelerator.
    A swapped cell is matched first by identical adjacency and op list, then
    by canonical hash; unmatched swaps are skipped.
    """
    cells = [c for c in cells if canonical_hash(c) in latency_ms]
    exact = {(c.ops, c.adjacency): latency_ms[canonical_hash(c)] for c in cells}
    sums = defaultdict(lambda: [0.0, 0.0, 0, 0, 0])
    attempts = matched = 0
    for cell in cells:
        base = exact[(cell.ops, cell.adjacency)]
        for v in range(1, cell.num_vertices - 1):
            orig = cell.ops[v]
            for repl in INTERIOR_OPS:
                if repl == orig:
                    continue
                attempts += 1
                swapped = cell.with_op(v, repl)
                key = (swapped.ops, swapped.adjacency)
                if key in exact:
                    other, how = exact[key], 3
                else:
                    other = latency_ms.get(canonical_hash(swapped))
                    how = 4
                    if other is None:
                        continue
                matched += 1
                acc = sums[(orig, repl)]
                acc[0] += other - base
                acc[1] += (other - base) / base * 100.0
                acc[2] += 1
                acc[how] += 1
    entries = {}
    for orig in INTERIOR_OPS:
        for repl in INTERIOR_OPS:
            acc = sums.get((orig, repl))
            if orig == repl or acc is None:
                entries[(orig, repl)] = SwapEntry()
            else:
                entries[(orig, repl)] = SwapEntry(acc[0] / acc[2], acc[1] / acc[2], acc[2], acc[3], acc[4])
    return SwapImpactMatrix(accel, entries, attempts, matched)


def swap_matrix_csv(matrices: Sequence[SwapImpactMatrix]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["accel", "original", "replacement", "mean_delta_ms", "mean_pct_delta", "count",
                "exact_matches", "fallback_matches"])
    for m in matrices:
        for (orig, repl), e in m.entries.items():
            w.writerow([m.accel, orig.label, repl.label, repr(e.mean_delta_ms), repr(e.mean_pct_delta),
                        e.count, e.exact_matches, e.fallback_matches])
    return out.getvalue()


# -- structural trends ---------------------------------------------------------

TREND_FEATURES = ("n_conv3x3", "n_conv1x1", "n_maxpool3x3", "depth", "width", "params_bin")

INCREASING = "monotone increasing"
DECREASING = "monotone decreasing"
NON_MONOTONE = "non-monotone"


@dataclass
class GroupStat:
    key: int
    count: int
    min_ms: float
    mean_ms: float
    max_ms: float


@dataclass
class Trend:
    accel: str
    feature: str
    groups: list[GroupStat]
    verdict: str | None


def _verdict(means: Sequence[float]) -> str | None:
    if len(means) < 2:
        return None
    diffs = np.diff(means)
    if np.all(diffs > 0):
        return INCREASING
    if np.all(diffs < 0):
        return DECREASING
    return NON_MONOTONE


def params_bins(params: Sequence[int], bins: int) -> np.ndarray:
    """Quantile bin index of each parameter count (0 = smallest)."""
    p = np.asarray(params, dtype=np.float64)
    edges = np.unique(np.quantile(p, np.linspace(0, 1, bins + 1)[1:-1]))
    return np.searchsorted(edges, p, side="right")


def trend_report(rows: Iterable[ResultRow], params_quantiles: int = 10) -> list[Trend]:
    """Latency min/mean/max grouped by op counts, depth, width and parameter quantile."""
    per_accel: dict[str, list[ResultRow]] = defaultdict(list)
    for row in rows:
        per_accel[row.accel].append(row)
    trends = []
    for accel in sorted(per_accel):
        group_rows = per_accel[accel]
        lat = np.array([r.latency_ms for r in group_rows])
        pbin = params_bins([r.total_params for r in group_rows], params_quantiles)
        for feature in TREND_FEATURES:
            keys = pbin if feature == "params_bin" else np.array([getattr(r, feature) for r in group_rows])
            groups = []
            for k in np.unique(keys):
                sel = lat[keys == k]
                groups.append(GroupStat(int(k), len(sel), float(sel.min()), float(sel.mean()), float(sel.max())))
            trends.append(Trend(accel, feature, groups, _verdict([g.mean_ms for g in groups])))
    return trends


def trends_csv(trends: Sequence[Trend]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["accel", "feature", "group", "count", "min_latency_ms", "mean_latency_ms", "max_latency_ms", "verdict"])
    for t in trends:
        for g in t.groups:
            w.writerow([t.accel, t.feature, g.key, g.count, repr(g.min_ms), repr(g.mean_ms), repr(g.max_ms),
                        t.verdict or ""])
    return out.getvalue()


@dataclass
class LatencyBucket:
    lo_ms: float
    hi_ms: float
    count: int
    mean_conv3x3: float
    mean_accuracy: float | None


def latency_buckets(rows: Iterable[ResultRow], edges_ms: Sequence[float]) -> dict[str, list[LatencyBucket]]:
    """Per accelerator, cells binned by latency with their mean conv3x3 count and accuracy."""
    per_accel: dict[str, list[ResultRow]] = defaultdict(list)
    for row in rows:
        per_accel[row.accel].append(row)
    bounds = [-np.inf, *edges_ms, np.inf]
    out = {}
    for accel, group in sorted(per_accel.items()):
        buckets = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sel = [r for r in group if lo <= r.latency_ms < hi]
            accs = [r.mean_validation_accuracy for r in sel if r.mean_validation_accuracy is not None]
            buckets.append(
                LatencyBucket(
                    float(lo), float(hi), len(sel),
                    float(np.mean([r.n_conv3x3 for r in sel])) if sel else float("nan"),
                    float(np.mean(accs)) if accs else None,
                )
            )
        out[accel] = buckets
    return out


def long_format_csv(rows: Iterable[ResultRow]) -> str:
    """One (accel, cell_hash, variable, value) line per measurement, for external plotting."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["accel", "cell_hash", "variable", "value"])
    variables = ("latency_ms", "energy_mj", "total_params", "total_macs", "depth", "width",
                 "n_conv3x3", "n_conv1x1", "n_maxpool3x3", "mean_validation_accuracy")
    for r in rows:
        for var in variables:
            value = getattr(r, var)
            if value is not None:
                w.writerow([r.accel, r.cell_hash, var, repr(value)])
    return out.getvalue()


def text_summary(rows: Sequence[ResultRow], params_quantiles: int = 10) -> str:
    lines = []
    accels = sorted({r.accel for r in rows})
    lines.append(f"{len({r.cell_hash for r in rows})} cells x {len(accels)} accelerators")
    for accel in accels:
        lat = np.array([r.latency_ms for r in rows if r.accel == accel])
        en = np.array([r.energy_mj for r in rows if r.accel == accel])
        lines.append(
            f"{accel}: latency ms min {lat.min():.6f} max {lat.max():.6f} mean {lat.mean():.6f}; "
            f"energy mJ min {en.min():.6f} max {en.max():.6f} mean {en.mean():.6f}"
        )
    if len(accels) > 1:
        try:
            report = best_config_buckets(rows)
        except ValueError as exc:
            lines.append(f"buckets skipped: {exc}")
        else:
            lines.append(f"best-accelerator buckets (ties: {report.ties})")
            for a, b in report.buckets.items():
                lat = ", ".join(f"{k} {v:.4f}" for k, v in b.mean_latency_ms.items())
                lines.append(f"  Latency({a}) <=: {b.count} cells; mean latency ms {lat}")
    for t in trend_report(rows, params_quantiles):
        means = " ".join(f"{g.key}:{g.mean_ms:.4f}" for g in t.groups)
        lines.append(f"{t.accel} {t.feature}: {t.verdict or 'single group'} [{means}]")
    return "\n".join(lines) + "\n"
