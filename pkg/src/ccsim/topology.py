"""Topology construction: dumbbell, two-tier, triangle, and custom graphs.

All links are directed; each direction carries its own queue.  Contended
("core") links get the scenario's queue configuration, host access links get
generous buffers so the interesting queueing happens where it should.
Routing is static shortest-path, precomputed at build time.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .engine import Engine, SimTime
from .network import Link, Node, Queue, QueueMode, compute_routes, serialization_ns

DUMBBELL = "dumbbell"
TWO_TIER = "two-tier"
TRIANGLE = "triangle"
CUSTOM = "custom"

ACCESS_QUEUE_CAPACITY = 4_000_000


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class QueueConfig:
    mode: str = "drop-tail-loss"          # drop-tail-loss | drop-tail-ecn
    capacity_bytes: int = 50_000
    ecn_kmin_bytes: int = 10_000
    ecn_kmax_bytes: int = 40_000
    ecn_pmax: float = 0.2
    pause_threshold_bytes: int | None = None   # set => lossless

    def build(self, capacity: int | None = None,
              pause: int | None = None) -> Queue:
        mode = QueueMode.ECN if self.mode == "drop-tail-ecn" else QueueMode.DROP_TAIL
        return Queue(
            capacity=capacity if capacity is not None else self.capacity_bytes,
            mode=mode,
            ecn_kmin=self.ecn_kmin_bytes,
            ecn_kmax=self.ecn_kmax_bytes,
            ecn_pmax=self.ecn_pmax,
            pause_threshold=pause if pause is not None else self.pause_threshold_bytes,
        )


@dataclass(frozen=True)
class LinkSpec:
    """Explicit link for custom topologies."""
    src: str
    dst: str
    rate_bps: int
    prop_delay_ns: SimTime
    core: bool = False   # core links carry the scenario queue config & metrics


@dataclass(frozen=True)
class TopologySpec:
    kind: str = DUMBBELL
    pairs: int = 2                       # dumbbell/triangle host pairs
    link_rate_bps: int = 5_000_000_000   # desk-scale default (10:1 scale-down)
    access_rate_bps: int | None = None   # defaults to link_rate_bps
    access_delay_ns: SimTime = 5_000
    core_delay_ns: SimTime = 5_000
    queue: QueueConfig = field(default_factory=QueueConfig)
    # two-tier parameters
    hosts_per_rack: int = 2
    racks: int = 2
    oversubscription: float = 1.0
    # custom topologies
    hosts: tuple = ()
    switches: tuple = ()
    links: tuple = ()                    # LinkSpec entries

    def __post_init__(self):
        if self.kind not in (DUMBBELL, TWO_TIER, TRIANGLE, CUSTOM):
            raise TopologyError(f"unknown topology kind {self.kind!r}")
        if self.kind in (DUMBBELL, TRIANGLE) and self.pairs < 1:
            raise TopologyError("pairs must be >= 1")
        if self.kind == TRIANGLE and self.pairs != 3:
            raise TopologyError("triangle topology is defined for exactly 3 jobs")
        if self.kind == CUSTOM and not self.links:
            raise TopologyError("custom topology needs explicit links")


class Network:
    """Built topology: nodes, links, endpoint assignment, metric links."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self.nodes: dict[str, Node] = {}
        self.links: dict[str, Link] = {}
        self._link_src: dict[str, str] = {}
        self.core_link_ids: list[str] = []
        self.endpoints: list[tuple[str, str]] = []  # (src_host, dst_host) per job slot

    def add_node(self, node_id: str, is_host: bool) -> Node:
        node = Node(node_id, is_host)
        self.nodes[node_id] = node
        return node

    def add_link(self, link_id: str, src: str, dst: str, rate_bps: int,
                 prop_delay_ns: SimTime, queue: Queue, rng: random.Random,
                 collector=None, core: bool = False) -> Link:
        link = Link(self.engine, link_id, rate_bps, prop_delay_ns, queue,
                    self.nodes[dst], rng, collector)
        self.links[link_id] = link
        self._link_src[link_id] = src
        if core:
            self.core_link_ids.append(link_id)
        return link

    def finalize(self) -> None:
        compute_routes(self.nodes, list(self.links.values()), self._link_src)

    def path_links(self, src: str, dst: str) -> list[str]:
        """Link ids along the static route src -> dst."""
        path = []
        node = self.nodes[src]
        seen = set()
        while node.node_id != dst:
            if node.node_id in seen:
                raise TopologyError(f"routing loop from {src} to {dst}")
            seen.add(node.node_id)
            link = node.routes.get(dst)
            if link is None:
                raise TopologyError(f"no route from {node.node_id} to {dst}")
            path.append(link.link_id)
            node = link.dst_node
        return path

    def base_rtt_ns(self, src: str, dst: str, mtu: int = 1500) -> SimTime:
        """Unloaded round-trip estimate: serialization + propagation each way."""
        total = 0
        for link_id in self.path_links(src, dst):
            link = self.links[link_id]
            total += link.prop_delay_ns + serialization_ns(mtu, link.rate_bps)
        for link_id in self.path_links(dst, src):
            link = self.links[link_id]
            total += link.prop_delay_ns + serialization_ns(40, link.rate_bps)
        return total

    def register_flows(self, flow_map: dict) -> None:
        for node in self.nodes.values():
            node.flow_registry = flow_map
        for link in self.links.values():
            link.flow_registry = flow_map


def _access_queue(cfg: QueueConfig) -> tuple[int, int | None]:
    """Access links: huge buffer; keep lossless back-pressure when configured."""
    if cfg.pause_threshold_bytes is not None:
        return ACCESS_QUEUE_CAPACITY, ACCESS_QUEUE_CAPACITY - 200_000
    return ACCESS_QUEUE_CAPACITY, None


def build_network(spec: TopologySpec, engine: Engine, seed: int,
                  collector=None) -> Network:
    net = Network(engine)
    builder = {
        DUMBBELL: _build_dumbbell,
        TWO_TIER: _build_two_tier,
        TRIANGLE: _build_triangle,
        CUSTOM: _build_custom,
    }[spec.kind]
    builder(spec, net, seed, collector)
    net.finalize()
    # every endpoint pair must actually be routable
    for src, dst in net.endpoints:
        net.path_links(src, dst)
        net.path_links(dst, src)
    return net


def _link_rng(seed: int, link_id: str) -> random.Random:
    return random.Random(f"{seed}/ecn/{link_id}")


def _build_dumbbell(spec: TopologySpec, net: Network, seed: int, collector) -> None:
    access_rate = spec.access_rate_bps or spec.link_rate_bps
    net.add_node("sw0", is_host=False)
    net.add_node("sw1", is_host=False)
    cap, pause = _access_queue(spec.queue)
    for i in range(spec.pairs):
        hs, hd = f"h{i}s", f"h{i}d"
        net.add_node(hs, is_host=True)
        net.add_node(hd, is_host=True)
        for a, b in ((hs, "sw0"), ("sw0", hs), ("sw1", hd), (hd, "sw1")):
            link_id = f"{a}->{b}"
            net.add_link(link_id, a, b, access_rate, spec.access_delay_ns,
                         spec.queue.build(capacity=cap, pause=pause),
                         _link_rng(seed, link_id), collector)
        net.endpoints.append((hs, hd))
    net.add_link("core", "sw0", "sw1", spec.link_rate_bps, spec.core_delay_ns,
                 spec.queue.build(), _link_rng(seed, "core"), collector, core=True)
    net.add_link("core-rev", "sw1", "sw0", spec.link_rate_bps, spec.core_delay_ns,
                 spec.queue.build(), _link_rng(seed, "core-rev"), collector)


def _build_triangle(spec: TopologySpec, net: Network, seed: int, collector) -> None:
    """Directed 3-switch ring; each job crosses two of the three ring links."""
    access_rate = spec.access_rate_bps or spec.link_rate_bps
    for i in range(3):
        net.add_node(f"sw{i}", is_host=False)
    ring = (("l1", "sw0", "sw1"), ("l2", "sw1", "sw2"), ("l3", "sw2", "sw0"))
    for link_id, a, b in ring:
        net.add_link(link_id, a, b, spec.link_rate_bps, spec.core_delay_ns,
                     spec.queue.build(), _link_rng(seed, link_id), collector, core=True)
    cap, pause = _access_queue(spec.queue)
    # job i: source at sw{i}, destination reached via two ring hops
    placements = ((0, 2), (1, 0), (2, 1))
    for i, (src_sw, dst_sw) in enumerate(placements):
        hs, hd = f"j{i}s", f"j{i}d"
        net.add_node(hs, is_host=True)
        net.add_node(hd, is_host=True)
        for a, b in ((hs, f"sw{src_sw}"), (f"sw{src_sw}", hs),
                     (f"sw{dst_sw}", hd), (hd, f"sw{dst_sw}")):
            link_id = f"{a}->{b}"
            net.add_link(link_id, a, b, access_rate, spec.access_delay_ns,
                         spec.queue.build(capacity=cap, pause=pause),
                         _link_rng(seed, link_id), collector)
        net.endpoints.append((hs, hd))


def _build_two_tier(spec: TopologySpec, net: Network, seed: int, collector) -> None:
    """Leaf/spine hierarchy with a configurable oversubscription factor."""
    access_rate = spec.access_rate_bps or spec.link_rate_bps
    uplink_rate = int(access_rate * spec.hosts_per_rack / spec.oversubscription)
    net.add_node("spine", is_host=False)
    cap, pause = _access_queue(spec.queue)
    for r in range(spec.racks):
        leaf = f"leaf{r}"
        net.add_node(leaf, is_host=False)
        for link_id, a, b in ((f"up{r}", leaf, "spine"), (f"down{r}", "spine", leaf)):
            net.add_link(link_id, a, b, uplink_rate, spec.core_delay_ns,
                         spec.queue.build(), _link_rng(seed, link_id), collector,
                         core=True)
        for k in range(spec.hosts_per_rack):
            host = f"r{r}h{k}"
            net.add_node(host, is_host=True)
            for a, b in ((host, leaf), (leaf, host)):
                link_id = f"{a}->{b}"
                net.add_link(link_id, a, b, access_rate, spec.access_delay_ns,
                             spec.queue.build(capacity=cap, pause=pause),
                             _link_rng(seed, link_id), collector)
    # job slots: host k of rack 0 talks to host k of rack 1 (wraps over racks)
    for k in range(spec.hosts_per_rack):
        net.endpoints.append((f"r0h{k}", f"r{spec.racks - 1}h{k}"))


def _build_custom(spec: TopologySpec, net: Network, seed: int, collector) -> None:
    for host in spec.hosts:
        net.add_node(host, is_host=True)
    for sw in spec.switches:
        net.add_node(sw, is_host=False)
    cap, pause = _access_queue(spec.queue)
    for ls in spec.links:
        if ls.src not in net.nodes or ls.dst not in net.nodes:
            raise TopologyError(f"link {ls.src}->{ls.dst} references unknown node")
        link_id = f"{ls.src}->{ls.dst}"
        queue = spec.queue.build() if ls.core else spec.queue.build(capacity=cap, pause=pause)
        net.add_link(link_id, ls.src, ls.dst, ls.rate_bps, ls.prop_delay_ns,
                     queue, _link_rng(seed, link_id), collector, core=ls.core)
