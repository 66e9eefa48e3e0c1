"""Measurement and analysis: utilization traces, interleaving score, reports.

The interleaving score over a window is 1 minus the fraction of busy time
bins in which two or more jobs transmit simultaneously (1.0 when nothing is
busy).  A job is "active" in a bin when it delivered at least 5% of the
bin's wire capacity, which ignores ack and retransmit trickle.  Utilization
is accounted as wire time: each packet's serialization interval is split
exactly across the bins it spans, so per-bin totals can never exceed
capacity.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

from .engine import NS_PER_SEC, SimTime
from .workload import IterationRecord

ACTIVITY_FRACTION = 0.05


class UtilizationTrace:
    """Per-link, per-bin, per-job delivered wire time (exact integer ns)."""

    def __init__(self, link_id: str, bin_ns: SimTime, rate_bps: int):
        assert bin_ns > 0
        self.link_id = link_id
        self.bin_ns = bin_ns
        self.rate_bps = rate_bps
        self.bins: dict[int, dict[str, int]] = {}

    def add_interval(self, job_id: str, start: SimTime, end: SimTime) -> None:
        """Attribute the wire interval [start, end) to job_id, split by bin."""
        bins = self.bins
        width = self.bin_ns
        t = start
        while t < end:
            idx = t // width
            chunk = min(end, (idx + 1) * width) - t
            per_job = bins.get(idx)
            if per_job is None:
                per_job = bins[idx] = {}
            per_job[job_id] = per_job.get(job_id, 0) + chunk
            # wire-time conservation: a bin can never hold more than itself
            assert sum(per_job.values()) <= width
            t += chunk

    def bytes_in_bin(self, idx: int) -> dict[str, int]:
        per_job = self.bins.get(idx, {})
        return {job: ns * self.rate_bps // (8 * NS_PER_SEC) for job, ns in per_job.items()}

    def active_jobs(self, idx: int) -> list[str]:
        threshold = ACTIVITY_FRACTION * self.bin_ns
        per_job = self.bins.get(idx, {})
        return [job for job, ns in per_job.items() if ns >= threshold]

    def span(self) -> tuple[int, int]:
        if not self.bins:
            return (0, 0)
        return (min(self.bins), max(self.bins) + 1)


def interleaving_score(trace: UtilizationTrace, window: SimTime | None = None,
                       start: SimTime | None = None) -> float:
    """Score over [start, start+window); defaults to the whole trace.

    1.0 = perfectly interleaved (or idle); 0.0 = always colliding.
    """
    lo, hi = trace.span()
    if window is not None:
        assert trace.bin_ns <= window // 100, (
            f"bin width {trace.bin_ns} too coarse for window {window}")
        if start is None:
            start = hi * trace.bin_ns - window
        lo = max(lo, start // trace.bin_ns)
        hi = min(hi, (start + window + trace.bin_ns - 1) // trace.bin_ns)
    busy = 0
    collisions = 0
    for idx in range(lo, hi):
        n = len(trace.active_jobs(idx))
        if n >= 1:
            busy += 1
            if n >= 2:
                collisions += 1
    if busy == 0:
        return 1.0
    return 1.0 - collisions / busy


def score_between(trace: UtilizationTrace, t0: SimTime, t1: SimTime) -> float:
    """Interleaving score over an explicit [t0, t1) interval."""
    assert t1 > t0
    lo = t0 // trace.bin_ns
    hi = (t1 + trace.bin_ns - 1) // trace.bin_ns
    busy = 0
    collisions = 0
    for idx in range(lo, hi):
        n = len(trace.active_jobs(idx))
        if n >= 1:
            busy += 1
            if n >= 2:
                collisions += 1
    if busy == 0:
        return 1.0
    return 1.0 - collisions / busy


def percentile(values, p: float):
    """Nearest-rank percentile: the ceil(p/100 * n)-th order statistic."""
    if not values:
        raise ValueError("percentile of empty input")
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"percentile p={p} outside [0, 100]")
    ordered = sorted(values)
    k = max(1, math.ceil(p / 100.0 * len(ordered)))
    return ordered[k - 1]


class MetricsCollector:
    """Engine-side hooks: drops, ECN marks, and wire-time utilization."""

    def __init__(self, bin_ns: SimTime):
        self.bin_ns = bin_ns
        self.traces: dict[str, UtilizationTrace] = {}
        self.drops: dict[str, list[SimTime]] = {}
        self.marks: dict[str, list[SimTime]] = {}
        self._job_of_flow: dict[str, str] = {}
        self._measured: set[str] = set()

    def watch_link(self, link_id: str, rate_bps: int) -> None:
        self._measured.add(link_id)
        self.traces[link_id] = UtilizationTrace(link_id, self.bin_ns, rate_bps)

    def map_flow(self, flow_id: str, job_id: str) -> None:
        self._job_of_flow[flow_id] = job_id

    def record_transmit(self, link_id: str, pkt, start: SimTime, end: SimTime) -> None:
        trace = self.traces.get(link_id)
        if trace is None:
            return
        job = self._job_of_flow.get(pkt.flow_id, pkt.flow_id)
        trace.add_interval(job, start, end)

    def record_drop(self, link_id: str, now: SimTime) -> None:
        self.drops.setdefault(link_id, []).append(now)

    def record_mark(self, link_id: str, now: SimTime) -> None:
        self.marks.setdefault(link_id, []).append(now)


@dataclass
class RunReport:
    """Everything a finished run exposes for analysis and CSV output."""

    iterations: dict[str, list[IterationRecord]]
    drops: dict[str, list[SimTime]]
    marks: dict[str, list[SimTime]]
    traces: dict[str, UtilizationTrace]
    job_links: dict[str, list[str]]        # job -> measured links on its path
    score_series: dict[str, list[float]]   # link -> per-window scores
    window_ns: SimTime = 0
    seed: int = 0

    def job_ids(self) -> list[str]:
        return sorted(self.iterations)

    def durations(self, job_id: str) -> list[int]:
        return [r.duration for r in self.iterations[job_id]]

    def mean_duration(self, job_id: str) -> float:
        durs = self.durations(job_id)
        return sum(durs) / len(durs)

    def p99_duration(self, job_id: str) -> int:
        return percentile(self.durations(job_id), 99)

    def job_score(self, job_id: str) -> float:
        """Worst full-run interleaving score across the job's measured links."""
        links = self.job_links.get(job_id) or list(self.traces)
        scores = [interleaving_score(self.traces[l]) for l in links if l in self.traces]
        return min(scores) if scores else 1.0

    def drops_between(self, link_id: str, t0: SimTime, t1: SimTime) -> int:
        return sum(1 for t in self.drops.get(link_id, ()) if t0 <= t < t1)

    def marks_between(self, link_id: str, t0: SimTime, t1: SimTime) -> int:
        return sum(1 for t in self.marks.get(link_id, ()) if t0 <= t < t1)


def speedup(baseline: RunReport, candidate: RunReport, stat: str = "mean"):
    """Per-job and pooled iteration-time ratios, baseline over candidate.

    > 1.0 means the candidate finishes iterations faster than the baseline.
    """
    if stat not in ("mean", "p99"):
        raise ValueError(f"stat must be 'mean' or 'p99', got {stat!r}")
    if baseline.job_ids() != candidate.job_ids():
        raise ValueError(
            f"job sets differ: {baseline.job_ids()} vs {candidate.job_ids()}")

    def evaluate(values):
        return (sum(values) / len(values)) if stat == "mean" else percentile(values, 99)

    per_job = {}
    for job in baseline.job_ids():
        per_job[job] = evaluate(baseline.durations(job)) / evaluate(candidate.durations(job))
    pooled_base = evaluate([d for j in baseline.job_ids() for d in baseline.durations(j)])
    pooled_cand = evaluate([d for j in candidate.job_ids() for d in candidate.durations(j)])
    per_job["__all__"] = pooled_base / pooled_cand
    return per_job


def write_report(report: RunReport, directory: str) -> list[str]:
    """Write iterations/drops/utilization/summary CSVs; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []

    path = os.path.join(directory, "iterations.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["job", "index", "start_ns", "duration_ns"])
        for job in report.job_ids():
            for rec in report.iterations[job]:
                w.writerow([job, rec.iteration_index, rec.start, rec.duration])
    paths.append(path)

    path = os.path.join(directory, "drops.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link", "second", "drops", "ecn_marks"])
        links = sorted(set(report.drops) | set(report.marks) | set(report.traces))
        for link in links:
            per_sec: dict[int, list[int]] = {}
            for t in report.drops.get(link, ()):
                per_sec.setdefault(t // NS_PER_SEC, [0, 0])[0] += 1
            for t in report.marks.get(link, ()):
                per_sec.setdefault(t // NS_PER_SEC, [0, 0])[1] += 1
            for sec in sorted(per_sec):
                w.writerow([link, sec, per_sec[sec][0], per_sec[sec][1]])
    paths.append(path)

    path = os.path.join(directory, "utilization.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link", "bin_start_ns", "job", "bytes"])
        for link in sorted(report.traces):
            trace = report.traces[link]
            for idx in sorted(trace.bins):
                row_bytes = trace.bytes_in_bin(idx)
                for job in sorted(row_bytes):
                    w.writerow([link, idx * trace.bin_ns, job, row_bytes[job]])
    paths.append(path)

    path = os.path.join(directory, "summary.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["job", "mean_ns", "p99_ns", "interleaving_score"])
        for job in report.job_ids():
            w.writerow([job, repr(report.mean_duration(job)), report.p99_duration(job),
                        repr(report.job_score(job))])
    paths.append(path)

    return paths
