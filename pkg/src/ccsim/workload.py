"""Synthetic periodic training jobs.

A job alternates compute and communication: at each iteration start it
schedules its communication peaks (offset, bytes) and, once every byte is
acked AND the compute time has elapsed, immediately starts the next
iteration.  That barrier models synchronous training: iteration i+1 never
begins before iteration i's traffic is fully delivered.

Stragglers are per-iteration random compute delays, uniform over a
configured fraction of the isolation iteration time.  Straggler draws use a
dedicated per-job RNG stream so a baseline and a variant run with the same
seed experience the very same straggler events.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .engine import Engine, EventKind, SimTime


@dataclass(frozen=True)
class JobSpec:
    job_id: str
    compute_time_ns: SimTime
    comm_pattern: tuple          # ((offset_ns, bytes), ...), offsets strictly increasing
    iterations: int
    start_time_ns: SimTime = 0
    flows: int = 1
    straggler_prob: float = 0.0
    straggler_range: tuple = (0.05, 0.10)
    # node placement; filled by the topology builder when left empty
    src_host: str = ""
    dst_host: str = ""

    def __post_init__(self):
        if self.total_bytes <= 0:
            raise ValueError(f"{self.job_id}: total bytes per iteration must be positive")
        offsets = [o for o, _ in self.comm_pattern]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError(f"{self.job_id}: peak offsets must strictly increase")
        if any(o < 0 for o in offsets):
            raise ValueError(f"{self.job_id}: peak offsets must be non-negative")
        if not (0.0 <= self.straggler_range[0] <= self.straggler_range[1] <= 1.0):
            raise ValueError(f"{self.job_id}: straggler_range must be within [0, 1]")
        if not 0.0 <= self.straggler_prob <= 1.0:
            raise ValueError(f"{self.job_id}: straggler_prob must be a probability")
        if self.flows < 1:
            raise ValueError(f"{self.job_id}: flows must be >= 1")
        if self.iterations < 1:
            raise ValueError(f"{self.job_id}: iterations must be >= 1")

    @property
    def total_bytes(self) -> int:
        return sum(b for _, b in self.comm_pattern)


@dataclass
class IterationRecord:
    job_id: str
    iteration_index: int
    start: SimTime
    comm_start: SimTime
    comm_end: SimTime
    duration: SimTime
    bytes_delivered: int
    straggler_delay: SimTime = 0


def sample_straggler(spec: JobSpec, rng: random.Random,
                     isolation_iter_ns: SimTime) -> SimTime:
    """Per-iteration compute delay: 0, or uniform in range * isolation time."""
    if spec.straggler_prob <= 0.0:
        return 0
    if rng.random() >= spec.straggler_prob:
        return 0
    lo, hi = spec.straggler_range
    return int(rng.uniform(lo, hi) * isolation_iter_ns)


def isolation_iteration_ns(spec: JobSpec, bottleneck_rate_bps: int,
                           mtu: int = 1500) -> SimTime:
    """Iteration duration with the network to itself (no straggler).

    The transfer estimate is pure serialization at the path bottleneck; the
    sub-RTT tail (last ack return) is ignored, which is what the straggler
    fraction and duty-cycle labels are defined against.
    """
    end = spec.compute_time_ns
    for offset, nbytes in spec.comm_pattern:
        transfer = (nbytes * 8 * 1_000_000_000 + bottleneck_rate_bps - 1) // bottleneck_rate_bps
        end = max(end, offset + transfer)
    return end


def compatibility_score(jobs: list[JobSpec], link_rate_bps: int) -> float:
    """Packing measure of how well jobs' communication duty cycles interleave.

    duty(j) = comm time on the link / isolation iteration period.  With equal
    periods the score is min(1, 1 / sum(duty)); 1.0 means the communication
    phases can be packed with no overlap.  Unequal periods scale the score by
    min_period / max_period, a crude penalty for drifting alignments.
    """
    if not jobs:
        raise ValueError("compatibility_score needs at least one job")
    duties = []
    periods = []
    for spec in jobs:
        period = isolation_iteration_ns(spec, link_rate_bps)
        comm = sum((b * 8 * 1_000_000_000 + link_rate_bps - 1) // link_rate_bps
                   for _, b in spec.comm_pattern)
        periods.append(period)
        duties.append(comm / period)
    total = sum(duties)
    score = 1.0 if total <= 1.0 else 1.0 / total
    mismatch = min(periods) / max(periods)
    return score * mismatch


class Job:
    """Runtime actor driving one JobSpec over its flows."""

    def __init__(self, engine: Engine, spec: JobSpec, flows: list,
                 isolation_iter_ns: SimTime, rng: random.Random):
        self.engine = engine
        self.spec = spec
        self.flows = flows
        self.isolation_iter_ns = isolation_iter_ns
        self.rng = rng
        self.records: list[IterationRecord] = []
        self.done = False
        self._iter_start: SimTime = 0
        self._comm_start: SimTime = 0
        self._comm_end: SimTime = 0
        self._straggler: SimTime = 0
        self._compute_done = False
        self._bytes_done = False
        self._pending_flows = 0
        self._bytes_at_start = 0
        self._iter_gen = 0

    def start(self) -> None:
        self.engine.schedule(self.spec.start_time_ns, EventKind.ITERATION_START,
                             self._start_iteration)

    # -- one iteration ----------------------------------------------------------

    def _start_iteration(self) -> None:
        spec = self.spec
        now = self.engine.now
        self._iter_start = now
        self._iter_gen += 1
        gen = self._iter_gen
        self._straggler = sample_straggler(spec, self.rng, self.isolation_iter_ns)
        self._compute_done = False
        self._bytes_done = False
        self._comm_start = None
        self._bytes_at_start = sum(f.acked_bytes for f in self.flows)

        self.engine.schedule(now + spec.compute_time_ns + self._straggler,
                             EventKind.TIMER_EXPIRY, self._compute_finished, gen)
        last_peak = len(spec.comm_pattern) - 1
        for i, (offset, nbytes) in enumerate(spec.comm_pattern):
            self.engine.schedule(now + offset + self._straggler, EventKind.APP_SEND,
                                 self._emit_peak, gen, nbytes, i == last_peak)

    def _emit_peak(self, gen: int, nbytes: int, is_last: bool) -> None:
        if gen != self._iter_gen:
            return
        if self._comm_start is None:
            self._comm_start = self.engine.now
        n = len(self.flows)
        share = nbytes // n
        for k, flow in enumerate(self.flows):
            amount = share + (nbytes - share * n if k == 0 else 0)
            if amount > 0:
                flow.app_push(amount)
        if is_last:
            # Preset the counter: a target that is already satisfied fires its
            # callback synchronously inside add_ack_target.
            self._pending_flows = len(self.flows)
            for flow in self.flows:
                flow.add_ack_target(flow.stream_end, self._flow_done(gen))

    def _flow_done(self, gen: int):
        def cb(now: SimTime) -> None:
            if gen != self._iter_gen:
                return
            self._pending_flows -= 1
            if self._pending_flows == 0:
                self._bytes_done = True
                self._comm_end = now
                self._maybe_finish()
        return cb

    def _compute_finished(self, gen: int) -> None:
        if gen != self._iter_gen:
            return
        self._compute_done = True
        self._maybe_finish()

    def _maybe_finish(self) -> None:
        if not (self._compute_done and self._bytes_done):
            return
        now = self.engine.now
        delivered = sum(f.acked_bytes for f in self.flows) - self._bytes_at_start
        assert delivered == self.spec.total_bytes, (
            f"{self.spec.job_id}: delivered {delivered} != {self.spec.total_bytes}")
        self.records.append(IterationRecord(
            job_id=self.spec.job_id,
            iteration_index=len(self.records),
            start=self._iter_start,
            comm_start=self._comm_start,
            comm_end=self._comm_end,
            duration=now - self._iter_start,
            bytes_delivered=delivered,
            straggler_delay=self._straggler,
        ))
        if len(self.records) >= self.spec.iterations:
            self.done = True
            return
        self.engine.schedule(now, EventKind.ITERATION_START, self._start_iteration)
