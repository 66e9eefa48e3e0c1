"""Scenario files: parsing, validation, defaults, and serialization.

Scenarios are YAML mappings.  Validation is strict: unknown keys, missing
required fields, and invariant violations are reported as distinct error
categories, each naming the offending field path and, where available, the
source line.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import yaml

from .aggressiveness import (FORMS, LINEAR, AggressivenessError,
                             AggressivenessFunction)
from .topology import LinkSpec, QueueConfig, TopologyError, TopologySpec
from .workload import JobSpec

ALGORITHMS = ("reno", "cubic", "dcqcn")
VARIANTS = ("base", "mltcp-wi", "mltcp-md", "static")

CC_PARAM_KEYS = {
    "initial_cwnd", "ssthresh", "max_cwnd", "rto_min_ns",
    "beta", "c_scale",
    "r_ai_bps", "alpha_g", "byte_counter_bytes", "alpha_timer_ns",
    "rate_timer_ns", "cnp_interval_ns", "min_rate_bps",
    "shares",
}


class ScenarioError(ValueError):
    category = "scenario"

    def __init__(self, field_path: str, message: str, line: int | None = None):
        self.field_path = field_path
        self.line = line
        where = f"{field_path} (line {line})" if line else field_path
        super().__init__(f"{where}: {message}")


class UnknownKeyError(ScenarioError):
    category = "unknown-key"


class MissingFieldError(ScenarioError):
    category = "missing-field"


class InvalidValueError(ScenarioError):
    category = "invalid-value"


@dataclass(frozen=True)
class CcSpec:
    algorithm: str = "reno"
    variant: str = "base"
    params: tuple = ()   # sorted (key, value) pairs; see CC_PARAM_KEYS

    def param(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    @property
    def scaled(self) -> bool:
        return self.variant in ("mltcp-wi", "mltcp-md")


@dataclass(frozen=True)
class TrackerSpec:
    g: float = 0.75
    gamma: float = 0.5
    init_comm_gap_ns: int = 0    # 0 = auto: 4x the scenario's base RTT
    per_flow: bool = False
    mtu: int = 1500


@dataclass(frozen=True)
class MetricsSpec:
    bin_ns: int = 0              # 0 = auto: base RTT / 2
    window_ns: int = 0           # 0 = auto: first job's isolation iteration
    measure_links: tuple = ()    # empty = the topology's core links


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "scenario"
    seed: int = 1
    duration_ns: int | None = None
    topology: TopologySpec = field(default_factory=TopologySpec)
    cc: CcSpec = field(default_factory=CcSpec)
    aggressiveness: AggressivenessFunction = field(default_factory=AggressivenessFunction)
    tracker: TrackerSpec = field(default_factory=TrackerSpec)
    metrics: MetricsSpec = field(default_factory=MetricsSpec)
    jobs: tuple = ()


# --------------------------------------------------------------------------
# YAML plumbing: load data plus a field-path -> line-number map.

def _line_map(text: str) -> dict[str, int]:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    lines: dict[str, int] = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, f"{path}.{k.value}" if path else str(k.value))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}[{i}]")

    if root is not None:
        walk(root, "")
    return lines


class _Ctx:
    """Carries the line map around during validation."""

    def __init__(self, text: str):
        self.lines = _line_map(text)

    def line(self, path: str) -> int | None:
        return self.lines.get(path)

    def take(self, mapping, path, key, required=False, default=None):
        sub = f"{path}.{key}" if path else key
        if key not in mapping:
            if required:
                raise MissingFieldError(sub, "required field is missing", self.line(path))
            return default
        return mapping.pop(key)

    def reject_unknown(self, mapping, path) -> None:
        for key in mapping:
            sub = f"{path}.{key}" if path else key
            raise UnknownKeyError(sub, "unknown key", self.line(sub))

    def expect(self, condition: bool, path: str, message: str) -> None:
        if not condition:
            raise InvalidValueError(path, message, self.line(path))


def _as_mapping(value, path, ctx) -> dict:
    if value is None:
        return {}
    ctx.expect(isinstance(value, dict), path, f"expected a mapping, got {type(value).__name__}")
    return dict(value)


# --------------------------------------------------------------------------

def parse_scenario(text: str) -> ScenarioSpec:
    """Parse and fully validate scenario text; raises ScenarioError subtypes."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else None
        raise InvalidValueError("<document>", f"not valid YAML: {exc}", line) from exc
    ctx = _Ctx(text)
    if data is None:
        raise MissingFieldError("<document>", "empty scenario file")
    ctx.expect(isinstance(data, dict), "<document>", "scenario must be a mapping")
    data = dict(data)

    name = ctx.take(data, "", "name", default="scenario")
    seed = ctx.take(data, "", "seed", default=1)
    ctx.expect(isinstance(seed, int), "seed", "seed must be an integer")
    duration = ctx.take(data, "", "duration_ns", default=None)
    if duration is not None:
        ctx.expect(isinstance(duration, int) and duration > 0, "duration_ns",
                   "duration_ns must be a positive integer")

    topology = _parse_topology(_as_mapping(ctx.take(data, "", "topology"), "topology", ctx), ctx)
    cc = _parse_cc(_as_mapping(ctx.take(data, "", "cc"), "cc", ctx), ctx)
    aggressiveness = _parse_aggressiveness(
        _as_mapping(ctx.take(data, "", "aggressiveness"), "aggressiveness", ctx),
        "aggressiveness", ctx)
    tracker = _parse_tracker(_as_mapping(ctx.take(data, "", "tracker"), "tracker", ctx), ctx)
    metrics = _parse_metrics(_as_mapping(ctx.take(data, "", "metrics"), "metrics", ctx), ctx)

    jobs_raw = ctx.take(data, "", "jobs", required=True)
    ctx.expect(isinstance(jobs_raw, list) and jobs_raw, "jobs", "need at least one job")
    jobs = tuple(_parse_job(job, f"jobs[{i}]", ctx, aggressiveness, i)
                 for i, job in enumerate(jobs_raw))
    ctx.reject_unknown(data, "")

    spec = ScenarioSpec(name=name, seed=seed, duration_ns=duration, topology=topology,
                        cc=cc, aggressiveness=aggressiveness, tracker=tracker,
                        metrics=metrics, jobs=jobs)
    _validate_cross(spec, ctx)
    return spec


def _parse_topology(data: dict, ctx: _Ctx) -> TopologySpec:
    kind = ctx.take(data, "topology", "kind", default="dumbbell")
    queue = _parse_queue(_as_mapping(ctx.take(data, "topology", "queue"), "topology.queue", ctx), ctx)
    links_raw = ctx.take(data, "topology", "links", default=[]) or []
    links = []
    for i, entry in enumerate(links_raw):
        path = f"topology.links[{i}]"
        entry = _as_mapping(entry, path, ctx)
        links.append(LinkSpec(
            src=ctx.take(entry, path, "src", required=True),
            dst=ctx.take(entry, path, "dst", required=True),
            rate_bps=ctx.take(entry, path, "rate_bps", required=True),
            prop_delay_ns=ctx.take(entry, path, "prop_delay_ns", default=5_000),
            core=ctx.take(entry, path, "core", default=False),
        ))
        ctx.reject_unknown(entry, path)
    kwargs = dict(
        kind=kind,
        pairs=ctx.take(data, "topology", "pairs", default=2),
        link_rate_bps=ctx.take(data, "topology", "link_rate_bps", default=5_000_000_000),
        access_rate_bps=ctx.take(data, "topology", "access_rate_bps", default=None),
        access_delay_ns=ctx.take(data, "topology", "access_delay_ns", default=5_000),
        core_delay_ns=ctx.take(data, "topology", "core_delay_ns", default=5_000),
        queue=queue,
        hosts_per_rack=ctx.take(data, "topology", "hosts_per_rack", default=2),
        racks=ctx.take(data, "topology", "racks", default=2),
        oversubscription=ctx.take(data, "topology", "oversubscription", default=1.0),
        hosts=tuple(ctx.take(data, "topology", "hosts", default=[]) or []),
        switches=tuple(ctx.take(data, "topology", "switches", default=[]) or []),
        links=tuple(links),
    )
    ctx.reject_unknown(data, "topology")
    try:
        return TopologySpec(**kwargs)
    except TopologyError as exc:
        raise InvalidValueError("topology", str(exc), ctx.line("topology")) from exc


def _parse_queue(data: dict, ctx: _Ctx) -> QueueConfig:
    cfg = QueueConfig(
        mode=ctx.take(data, "topology.queue", "mode", default="drop-tail-loss"),
        capacity_bytes=ctx.take(data, "topology.queue", "capacity_bytes", default=50_000),
        ecn_kmin_bytes=ctx.take(data, "topology.queue", "ecn_kmin_bytes", default=10_000),
        ecn_kmax_bytes=ctx.take(data, "topology.queue", "ecn_kmax_bytes", default=40_000),
        ecn_pmax=ctx.take(data, "topology.queue", "ecn_pmax", default=0.2),
        pause_threshold_bytes=ctx.take(data, "topology.queue", "pause_threshold_bytes", default=None),
    )
    ctx.reject_unknown(data, "topology.queue")
    ctx.expect(cfg.mode in ("drop-tail-loss", "drop-tail-ecn"), "topology.queue.mode",
               f"mode must be drop-tail-loss or drop-tail-ecn, got {cfg.mode!r}")
    ctx.expect(cfg.capacity_bytes > 0, "topology.queue.capacity_bytes", "must be positive")
    if cfg.pause_threshold_bytes is not None:
        ctx.expect(0 < cfg.pause_threshold_bytes < cfg.capacity_bytes,
                   "topology.queue.pause_threshold_bytes",
                   "pause threshold must leave headroom below capacity")
    return cfg


def _parse_cc(data: dict, ctx: _Ctx) -> CcSpec:
    algorithm = ctx.take(data, "cc", "algorithm", default="reno")
    variant = ctx.take(data, "cc", "variant", default="base")
    params = _as_mapping(ctx.take(data, "cc", "params"), "cc.params", ctx)
    ctx.reject_unknown(data, "cc")
    ctx.expect(algorithm in ALGORITHMS, "cc.algorithm",
               f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    ctx.expect(variant in VARIANTS, "cc.variant",
               f"variant must be one of {VARIANTS}, got {variant!r}")
    if variant == "static":
        ctx.expect(algorithm == "dcqcn", "cc.variant",
                   "the static-share variant models a rate-based fabric; use algorithm: dcqcn")
    for key in params:
        if key not in CC_PARAM_KEYS:
            raise UnknownKeyError(f"cc.params.{key}", "unknown cc parameter",
                                  ctx.line(f"cc.params.{key}"))
    shares = params.get("shares")
    if shares is not None:
        ctx.expect(isinstance(shares, list) and all(s > 0 for s in shares),
                   "cc.params.shares", "shares must be a list of positive numbers")
        params = dict(params)
        params["shares"] = tuple(shares)
    return CcSpec(algorithm=algorithm, variant=variant,
                  params=tuple(sorted(params.items())))


def _parse_aggressiveness(data: dict, path: str, ctx: _Ctx) -> AggressivenessFunction:
    form = ctx.take(data, path, "form", default=LINEAR)
    slope = ctx.take(data, path, "slope", default=1.75)
    intercept = ctx.take(data, path, "intercept", default=0.25)
    table_raw = ctx.take(data, path, "table", default=[]) or []
    ctx.reject_unknown(data, path)
    ctx.expect(form in FORMS, f"{path}.form", f"form must be one of {FORMS}, got {form!r}")
    table = tuple((float(r), float(v)) for r, v in table_raw)
    try:
        return AggressivenessFunction(form=form, slope=float(slope),
                                      intercept=float(intercept), table=table)
    except AggressivenessError as exc:
        raise InvalidValueError(path, str(exc), ctx.line(path)) from exc


def _parse_tracker(data: dict, ctx: _Ctx) -> TrackerSpec:
    spec = TrackerSpec(
        g=ctx.take(data, "tracker", "g", default=0.75),
        gamma=ctx.take(data, "tracker", "gamma", default=0.5),
        init_comm_gap_ns=ctx.take(data, "tracker", "init_comm_gap_ns", default=0),
        per_flow=ctx.take(data, "tracker", "per_flow", default=False),
        mtu=ctx.take(data, "tracker", "mtu", default=1500),
    )
    ctx.reject_unknown(data, "tracker")
    ctx.expect(0.0 < spec.g, "tracker.g", "noise tolerance must be positive")
    ctx.expect(0.0 < spec.gamma <= 1.0, "tracker.gamma", "EWMA factor must be in (0, 1]")
    ctx.expect(spec.mtu > 0, "tracker.mtu", "mtu must be positive")
    return spec


def _parse_metrics(data: dict, ctx: _Ctx) -> MetricsSpec:
    spec = MetricsSpec(
        bin_ns=ctx.take(data, "metrics", "bin_ns", default=0),
        window_ns=ctx.take(data, "metrics", "window_ns", default=0),
        measure_links=tuple(ctx.take(data, "metrics", "measure_links", default=[]) or []),
    )
    ctx.reject_unknown(data, "metrics")
    return spec


def _parse_job(data, path: str, ctx: _Ctx,
               global_func: AggressivenessFunction, index: int) -> JobSpec:
    data = _as_mapping(data, path, ctx)
    pattern_raw = ctx.take(data, path, "comm_pattern", required=True)
    ctx.expect(isinstance(pattern_raw, list) and pattern_raw, f"{path}.comm_pattern",
               "comm_pattern needs at least one peak")
    pattern = []
    for i, peak in enumerate(pattern_raw):
        ppath = f"{path}.comm_pattern[{i}]"
        peak = _as_mapping(peak, ppath, ctx)
        pattern.append((ctx.take(peak, ppath, "offset_ns", required=True),
                        ctx.take(peak, ppath, "bytes", required=True)))
        ctx.reject_unknown(peak, ppath)
    override = ctx.take(data, path, "aggressiveness", default=None)
    if override is not None:
        func = _parse_aggressiveness(_as_mapping(override, f"{path}.aggressiveness", ctx),
                                     f"{path}.aggressiveness", ctx)
        # every scaled flow in a run must share one aggressiveness function
        ctx.expect(func == global_func, f"{path}.aggressiveness",
                   "all jobs must share one aggressiveness function "
                   f"(differs from the scenario-level configuration)")
    straggler_range = ctx.take(data, path, "straggler_range", default=[0.05, 0.10])
    kwargs = dict(
        job_id=ctx.take(data, path, "job_id", default=f"job{index}"),
        compute_time_ns=ctx.take(data, path, "compute_time_ns", required=True),
        comm_pattern=tuple(pattern),
        iterations=ctx.take(data, path, "iterations", required=True),
        start_time_ns=ctx.take(data, path, "start_time_ns", default=0),
        flows=ctx.take(data, path, "flows", default=1),
        straggler_prob=ctx.take(data, path, "straggler_prob", default=0.0),
        straggler_range=tuple(straggler_range),
        src_host=ctx.take(data, path, "src_host", default=""),
        dst_host=ctx.take(data, path, "dst_host", default=""),
    )
    ctx.reject_unknown(data, path)
    try:
        return JobSpec(**kwargs)
    except ValueError as exc:
        raise InvalidValueError(path, str(exc), ctx.line(path)) from exc


def _validate_cross(spec: ScenarioSpec, ctx: _Ctx) -> None:
    job_ids = [j.job_id for j in spec.jobs]
    ctx.expect(len(set(job_ids)) == len(job_ids), "jobs", "duplicate job_id")
    if spec.topology.kind == "triangle":
        ctx.expect(len(spec.jobs) == 3, "jobs", "triangle topology needs exactly 3 jobs")
    if spec.topology.kind == "dumbbell":
        ctx.expect(len(spec.jobs) <= spec.topology.pairs, "jobs",
                   f"{len(spec.jobs)} jobs but only {spec.topology.pairs} host pairs")
    if spec.topology.kind == "custom":
        for i, job in enumerate(spec.jobs):
            ctx.expect(bool(job.src_host) and bool(job.dst_host), f"jobs[{i}]",
                       "custom topologies need explicit src_host/dst_host")
    shares = spec.cc.param("shares")
    if spec.cc.variant == "static" and shares is not None:
        ctx.expect(len(shares) >= len(spec.jobs), "cc.params.shares",
                   "need one share per job")
    if spec.cc.algorithm == "dcqcn":
        ctx.expect(spec.topology.queue.mode == "drop-tail-ecn",
                   "topology.queue.mode", "dcqcn needs an ECN-marking queue")
        ctx.expect(spec.topology.queue.pause_threshold_bytes is not None,
                   "topology.queue.pause_threshold_bytes",
                   "dcqcn models a lossless fabric; set a pause threshold")


# --------------------------------------------------------------------------

def serialize_scenario(spec: ScenarioSpec) -> str:
    """Inverse of parse_scenario: parse(serialize(spec)) == spec."""
    doc = {
        "name": spec.name,
        "seed": spec.seed,
        "topology": {
            "kind": spec.topology.kind,
            "pairs": spec.topology.pairs,
            "link_rate_bps": spec.topology.link_rate_bps,
            "access_rate_bps": spec.topology.access_rate_bps,
            "access_delay_ns": spec.topology.access_delay_ns,
            "core_delay_ns": spec.topology.core_delay_ns,
            "hosts_per_rack": spec.topology.hosts_per_rack,
            "racks": spec.topology.racks,
            "oversubscription": spec.topology.oversubscription,
            "queue": {
                "mode": spec.topology.queue.mode,
                "capacity_bytes": spec.topology.queue.capacity_bytes,
                "ecn_kmin_bytes": spec.topology.queue.ecn_kmin_bytes,
                "ecn_kmax_bytes": spec.topology.queue.ecn_kmax_bytes,
                "ecn_pmax": spec.topology.queue.ecn_pmax,
                "pause_threshold_bytes": spec.topology.queue.pause_threshold_bytes,
            },
        },
        "cc": {
            "algorithm": spec.cc.algorithm,
            "variant": spec.cc.variant,
            "params": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in spec.cc.params},
        },
        "aggressiveness": {
            "form": spec.aggressiveness.form,
            "slope": spec.aggressiveness.slope,
            "intercept": spec.aggressiveness.intercept,
            "table": [list(entry) for entry in spec.aggressiveness.table],
        },
        "tracker": {
            "g": spec.tracker.g,
            "gamma": spec.tracker.gamma,
            "init_comm_gap_ns": spec.tracker.init_comm_gap_ns,
            "per_flow": spec.tracker.per_flow,
            "mtu": spec.tracker.mtu,
        },
        "metrics": {
            "bin_ns": spec.metrics.bin_ns,
            "window_ns": spec.metrics.window_ns,
            "measure_links": list(spec.metrics.measure_links),
        },
        "jobs": [_job_doc(job) for job in spec.jobs],
    }
    if spec.duration_ns is not None:
        doc["duration_ns"] = spec.duration_ns
    if spec.topology.kind == "custom":
        doc["topology"]["hosts"] = list(spec.topology.hosts)
        doc["topology"]["switches"] = list(spec.topology.switches)
        doc["topology"]["links"] = [
            {"src": l.src, "dst": l.dst, "rate_bps": l.rate_bps,
             "prop_delay_ns": l.prop_delay_ns, "core": l.core}
            for l in spec.topology.links
        ]
    return yaml.safe_dump(doc, sort_keys=False)


def _job_doc(job: JobSpec) -> dict:
    return {
        "job_id": job.job_id,
        "start_time_ns": job.start_time_ns,
        "compute_time_ns": job.compute_time_ns,
        "comm_pattern": [{"offset_ns": o, "bytes": b} for o, b in job.comm_pattern],
        "flows": job.flows,
        "iterations": job.iterations,
        "straggler_prob": job.straggler_prob,
        "straggler_range": list(job.straggler_range),
        "src_host": job.src_host,
        "dst_host": job.dst_host,
    }
