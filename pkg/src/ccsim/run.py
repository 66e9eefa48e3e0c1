"""Build and execute one scenario end to end.

Each run owns its engine, network, flows, and RNG streams; runs never share
mutable state, so parameter sweeps can execute them in parallel processes.
Noise streams are purpose-keyed on the scenario seed (ECN marking per link,
stragglers per job), which keeps straggler events identical between a
baseline run and a scaled-variant run of the same scenario seed.
"""

from __future__ import annotations

import random

from .aggressiveness import AggressivenessFunction
from .engine import Engine, SimulationError
from .flow import RateFlow, WindowFlow
from .metrics import MetricsCollector, RunReport, interleaving_score
from .mltcp import MltcpCubic, MltcpMode, MltcpReno, Mlqcn
from .scenario import ScenarioSpec
from .tracker import JobProgressTracker
from .topology import build_network
from .transport import (CubicState, DcqcnState, FixedRateState, RenoState)
from .workload import Job, isolation_iteration_ns

RUN_SAFETY_LIMIT_NS = 1_000 * 1_000_000_000  # no scenario runs longer than 1000 s
RUN_CHUNK_NS = 5_000_000


def run_scenario(spec: ScenarioSpec, trace: bool = False) -> RunReport:
    sim = Simulation(spec, trace=trace)
    return sim.run()


class Simulation:
    def __init__(self, spec: ScenarioSpec, trace: bool = False):
        self.spec = spec
        self.engine = Engine(trace=trace)
        self.collector = MetricsCollector(bin_ns=1)  # bin resolved below
        self.net = build_network(spec.topology, self.engine, spec.seed, self.collector)

        if len(self.net.endpoints) < len(spec.jobs):
            raise SimulationError(
                f"topology offers {len(self.net.endpoints)} job slots, "
                f"scenario defines {len(spec.jobs)} jobs")

        # endpoint assignment: explicit placement wins, otherwise slot order
        self.placement = []
        for i, job in enumerate(spec.jobs):
            if job.src_host:
                self.placement.append((job.src_host, job.dst_host))
            else:
                self.placement.append(self.net.endpoints[i])

        src0, dst0 = self.placement[0]
        self.base_rtt_ns = self.net.base_rtt_ns(src0, dst0, spec.tracker.mtu)
        self.collector.bin_ns = spec.metrics.bin_ns or max(1_000, self.base_rtt_ns // 2)

        measure = spec.metrics.measure_links or tuple(self.net.core_link_ids)
        for link_id in measure:
            if link_id not in self.net.links:
                raise SimulationError(f"measure link {link_id!r} does not exist")
            self.collector.watch_link(link_id, self.net.links[link_id].rate_bps)
        self.measure_links = list(measure)

        self.flows: dict[str, object] = {}
        self.jobs: list[Job] = []
        self._build_jobs()
        self.net.register_flows(self.flows)

    # -- construction -----------------------------------------------------------

    def _bottleneck_rate(self, src: str, dst: str) -> int:
        return min(self.net.links[l].rate_bps for l in self.net.path_links(src, dst))

    def _build_jobs(self) -> None:
        spec = self.spec
        init_gap = spec.tracker.init_comm_gap_ns or 4 * self.base_rtt_ns
        for i, job_spec in enumerate(spec.jobs):
            src, dst = self.placement[i]
            line_rate = self._bottleneck_rate(src, dst)
            iso = isolation_iteration_ns(job_spec, line_rate, spec.tracker.mtu)
            job_tracker = None
            if spec.cc.scaled and not spec.tracker.per_flow:
                job_tracker = JobProgressTracker(
                    total_bytes=job_spec.total_bytes, init_comm_gap=init_gap,
                    now=job_spec.start_time_ns, g=spec.tracker.g,
                    gamma=spec.tracker.gamma, mtu=spec.tracker.mtu)
            flows = []
            n = job_spec.flows
            share = job_spec.total_bytes // n
            for k in range(n):
                flow_id = f"{job_spec.job_id}/{k}"
                tracker = job_tracker
                if spec.cc.scaled and spec.tracker.per_flow:
                    per_flow_total = share + (job_spec.total_bytes - share * n if k == 0 else 0)
                    tracker = JobProgressTracker(
                        total_bytes=per_flow_total, init_comm_gap=init_gap,
                        now=job_spec.start_time_ns, g=spec.tracker.g,
                        gamma=spec.tracker.gamma, mtu=spec.tracker.mtu)
                controller = self._build_controller(line_rate, tracker, i)
                flow_cls = WindowFlow if controller.kind == "window" else RateFlow
                kwargs = {}
                if flow_cls is RateFlow:
                    kwargs = {
                        "alpha_timer_ns": spec.cc.param("alpha_timer_ns", 55_000),
                        "rate_timer_ns": spec.cc.param("rate_timer_ns", 300_000),
                        "cnp_interval_ns": spec.cc.param("cnp_interval_ns", 50_000),
                    }
                flow = flow_cls(self.engine, flow_id, job_spec.job_id,
                                self.net.nodes[src], self.net.nodes[dst],
                                mtu=spec.tracker.mtu, controller=controller,
                                tracker=tracker, **kwargs)
                if flow_cls is RateFlow:
                    flow.start_timers()
                self.flows[flow_id] = flow
                self.collector.map_flow(flow_id, job_spec.job_id)
                flows.append(flow)
            rng = random.Random(f"{spec.seed}/straggler/{job_spec.job_id}")
            self.jobs.append(Job(self.engine, job_spec, flows, iso, rng))

    def _build_controller(self, line_rate: int, tracker, job_index: int):
        cc = self.spec.cc
        p = cc.param
        func = self.spec.aggressiveness
        mode = MltcpMode.WINDOW_INCREASE if cc.variant == "mltcp-wi" else \
            MltcpMode.MULTIPLICATIVE_DECREASE

        if cc.variant == "static":
            shares = cc.param("shares")
            n = len(self.spec.jobs)
            if shares is None:
                # default skew: proportional to n-i, like the 60/40-style splits
                weights = [n - j for j in range(n)]
                total = sum(weights)
                shares = [w / total for w in weights]
            return FixedRateState(rate=shares[job_index] * line_rate)

        if cc.algorithm == "reno":
            kwargs = dict(
                cwnd=float(p("initial_cwnd", 10.0)),
                ssthresh=float(p("ssthresh", 32.0)),
                rto_min=int(p("rto_min_ns", 1_000_000)),
                max_cwnd=float(p("max_cwnd", 256.0)),
            )
            if cc.variant == "base":
                return RenoState(**kwargs)
            return MltcpReno(mode=mode, func=func, tracker=tracker, **kwargs)

        if cc.algorithm == "cubic":
            kwargs = dict(
                cwnd=float(p("initial_cwnd", 10.0)),
                w_max=float(p("initial_cwnd", 10.0)),
                beta=float(p("beta", 0.7)),
                c_scale=float(p("c_scale", 0.4)),
                ssthresh=float(p("ssthresh", 32.0)),
                rto_min=int(p("rto_min_ns", 1_000_000)),
                max_cwnd=float(p("max_cwnd", 256.0)),
            )
            if cc.variant == "base":
                return CubicState(**kwargs)
            return MltcpCubic(mode=mode, func=func, tracker=tracker, **kwargs)

        # dcqcn
        kwargs = dict(
            line_rate=float(line_rate),
            r_ai=float(p("r_ai_bps", line_rate / 1000.0)),
            alpha_g=float(p("alpha_g", 1.0 / 16.0)),
            byte_counter_threshold=int(p("byte_counter_bytes", 10_000_000)),
            min_rate=float(p("min_rate_bps", line_rate / 1000.0)),
        )
        if cc.variant == "base":
            return DcqcnState(**kwargs)
        return Mlqcn(mode=mode, func=func, tracker=tracker, **kwargs)

    # -- execution --------------------------------------------------------------

    def run(self) -> RunReport:
        for job in self.jobs:
            job.start()
        limit = self.spec.duration_ns or RUN_SAFETY_LIMIT_NS
        engine = self.engine
        while engine.now < limit and not all(job.done for job in self.jobs):
            engine.run_until(min(limit, engine.now + RUN_CHUNK_NS))
        if not all(job.done for job in self.jobs) and self.spec.duration_ns is None:
            raise SimulationError(
                "run hit the safety limit before all jobs finished; "
                "check rates and byte counts")
        self._check_conservation()
        return self._report()

    def _check_conservation(self) -> None:
        # offered = accepted + dropped, and every accepted packet either left
        # the queue or is still sitting in it
        for link_id, link in self.net.links.items():
            q = link.queue
            if q.enqueued_count != q.dequeued_count + len(q):
                raise SimulationError(f"packet conservation violated at {link_id}")

    def _report(self) -> RunReport:
        spec = self.spec
        iterations = {job.spec.job_id: job.records for job in self.jobs}
        job_links = {}
        for i, job_spec in enumerate(spec.jobs):
            src, dst = self.placement[i]
            path = set(self.net.path_links(src, dst))
            job_links[job_spec.job_id] = [l for l in self.measure_links if l in path]
        window = spec.metrics.window_ns
        if not window:
            first = spec.jobs[0]
            window = isolation_iteration_ns(first, self._bottleneck_rate(*self.placement[0]),
                                            spec.tracker.mtu)
        series = {}
        for link_id in self.measure_links:
            trace = self.collector.traces[link_id]
            lo, hi = trace.span()
            end_ns = hi * trace.bin_ns
            series[link_id] = [
                interleaving_score(trace, window=window, start=start)
                for start in range(0, max(0, end_ns - window + 1), window)
            ]
        return RunReport(
            iterations=iterations,
            drops=dict(self.collector.drops),
            marks=dict(self.collector.marks),
            traces=dict(self.collector.traces),
            job_links=job_links,
            score_series=series,
            window_ns=window,
            seed=spec.seed,
        )
