"""Packets, queues, links, and static routing.

The network is a directed graph: every link has its own FIFO queue and a
single transmit server.  Latency comes from serialization + propagation +
queueing only; host processing delay is zero.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .engine import Engine, EventKind, SimTime, SimulationError

ACK_SIZE = 40  # bytes on the wire for ack and congestion-notification packets


@dataclass(slots=True)
class Packet:
    flow_id: str
    seq: int              # byte offset of the first payload byte
    size: int             # bytes on the wire, in (0, MTU]
    src: str              # source host id (routing)
    dst: str              # destination host id (routing)
    is_ack: bool = False
    acked_count: int = 0  # cumulative in-order segments covered (acks only)
    ecn_marked: bool = False
    cnp: bool = False     # congestion notification packet (rate-based feedback)


class QueueMode(Enum):
    DROP_TAIL = "drop-tail-loss"
    ECN = "drop-tail-ecn"


class EnqueueOutcome(Enum):
    ENQUEUED = "enqueued"
    ENQUEUED_MARKED = "enqueued-marked"
    DROPPED = "dropped"
    SENDER_PAUSED = "sender-paused"


@dataclass
class Queue:
    """Drop-tail FIFO with optional RED-style ECN marking and lossless pause.

    With `pause_threshold` set the queue is lossless: nothing is dropped,
    and enqueues at or above the threshold report SENDER_PAUSED so the
    engine can pause the packet's source (single-hop pause approximation).
    """

    capacity: int                     # bytes
    mode: QueueMode = QueueMode.DROP_TAIL
    ecn_kmin: int = 0                 # bytes; no marking below
    ecn_kmax: int = 0                 # bytes; marking probability 1 at/above
    ecn_pmax: float = 0.0             # ramp endpoint probability
    pause_threshold: int | None = None
    occupancy: int = 0
    _packets: list = field(default_factory=list, repr=False)
    _head: int = 0
    # end-of-run conservation counters
    enqueued_count: int = 0
    dequeued_count: int = 0
    dropped_count: int = 0
    marked_count: int = 0

    def enqueue(self, pkt: Packet, rng: random.Random) -> EnqueueOutcome:
        assert pkt.size > 0, "zero-size packet"
        lossless = self.pause_threshold is not None
        if not lossless and self.occupancy + pkt.size > self.capacity:
            self.dropped_count += 1
            return EnqueueOutcome.DROPPED

        marked = False
        if self.mode is QueueMode.ECN and self.ecn_kmax > self.ecn_kmin:
            occ = self.occupancy
            if occ >= self.ecn_kmax:
                marked = True
            elif occ >= self.ecn_kmin:
                p = (occ - self.ecn_kmin) / (self.ecn_kmax - self.ecn_kmin) * self.ecn_pmax
                marked = rng.random() < p
            if marked:
                # Only queues set this bit, never senders.
                pkt.ecn_marked = True
                self.marked_count += 1

        paused = lossless and self.occupancy >= self.pause_threshold
        self.occupancy += pkt.size
        if self.occupancy > self.capacity:
            raise SimulationError(
                f"queue occupancy {self.occupancy} exceeds capacity {self.capacity}; "
                "lossless headroom above pause_threshold is too small"
            )
        self._packets.append(pkt)
        self.enqueued_count += 1
        if paused:
            return EnqueueOutcome.SENDER_PAUSED
        return EnqueueOutcome.ENQUEUED_MARKED if marked else EnqueueOutcome.ENQUEUED

    def dequeue(self) -> Packet:
        pkt = self._packets[self._head]
        self._head += 1
        # Amortized compaction keeps the backing list from growing unbounded.
        if self._head > 512 and self._head * 2 > len(self._packets):
            del self._packets[: self._head]
            self._head = 0
        self.occupancy -= pkt.size
        self.dequeued_count += 1
        return pkt

    def __len__(self) -> int:
        return len(self._packets) - self._head


def serialization_ns(size_bytes: int, rate_bps: int) -> SimTime:
    """Wire time for a packet, rounded up to a whole nanosecond."""
    return (size_bytes * 8 * 1_000_000_000 + rate_bps - 1) // rate_bps


class Link:
    """Directed link: one queue, one transmit server, fixed propagation delay."""

    def __init__(self, engine: Engine, link_id: str, rate_bps: int,
                 prop_delay_ns: SimTime, queue: Queue, dst_node: "Node",
                 rng: random.Random, collector=None):
        self.engine = engine
        self.link_id = link_id
        self.rate_bps = rate_bps
        self.prop_delay_ns = prop_delay_ns
        self.queue = queue
        self.dst_node = dst_node
        self.rng = rng
        self.collector = collector   # metrics hook; may be None
        self.busy = False
        self._paused_flows: set[str] = set()
        self.flow_registry: dict = {}  # filled by the simulation builder

    def send(self, pkt: Packet) -> EnqueueOutcome:
        outcome = self.queue.enqueue(pkt, self.rng)
        if outcome is EnqueueOutcome.DROPPED:
            if self.collector is not None:
                self.collector.record_drop(self.link_id, self.engine.now)
            return outcome
        if outcome is EnqueueOutcome.ENQUEUED_MARKED and self.collector is not None:
            self.collector.record_mark(self.link_id, self.engine.now)
        if outcome is EnqueueOutcome.SENDER_PAUSED:
            # Port-style pause: brake every flow with traffic in this queue,
            # each at most once until the queue drains back below threshold.
            for flow_id in {p.flow_id for p in self.queue._packets[self.queue._head:]}:
                flow = self.flow_registry.get(flow_id)
                if flow is not None and flow_id not in self._paused_flows:
                    self._paused_flows.add(flow_id)
                    flow.pause()
        if not self.busy:
            self._start_transmit()
        return outcome

    def _start_transmit(self) -> None:
        self.busy = True
        pkt = self.queue.dequeue()
        ser = serialization_ns(pkt.size, self.rate_bps)
        start = self.engine.now
        self.engine.schedule(start + ser, EventKind.PACKET_DEPARTURE,
                             self._finish_transmit, pkt, start)

    def _finish_transmit(self, pkt: Packet, start: SimTime) -> None:
        now = self.engine.now
        if self.collector is not None:
            self.collector.record_transmit(self.link_id, pkt, start, now)
        self.engine.schedule(now + self.prop_delay_ns, EventKind.PACKET_ARRIVAL,
                             self.dst_node.on_packet, pkt)
        # Work conservation: immediately pull the next queued packet.
        if len(self.queue):
            self._start_transmit()
        else:
            self.busy = False
        self._maybe_resume()

    def _maybe_resume(self) -> None:
        if not self._paused_flows:
            return
        threshold = self.queue.pause_threshold
        if threshold is None:
            return
        # Hysteresis: resume once the queue has drained a little below the
        # pause point, to avoid pause/resume churn on every packet.
        if self.queue.occupancy <= max(0, threshold - 3000):
            flows, self._paused_flows = self._paused_flows, set()
            for flow_id in sorted(flows):
                flow = self.flow_registry.get(flow_id)
                if flow is not None:
                    flow.resume()


class Node:
    """A host or switch.  Hosts deliver packets to flows; switches forward."""

    def __init__(self, node_id: str, is_host: bool):
        self.node_id = node_id
        self.is_host = is_host
        self.routes: dict[str, Link] = {}   # destination host id -> next-hop link
        self.flow_registry: dict = {}       # host only

    def on_packet(self, pkt: Packet) -> None:
        if pkt.dst == self.node_id:
            flow = self.flow_registry.get(pkt.flow_id)
            if flow is None:
                raise SimulationError(f"packet for unknown flow {pkt.flow_id} at {self.node_id}")
            flow.deliver(pkt)
            return
        link = self.routes.get(pkt.dst)
        if link is None:
            raise SimulationError(f"no route from {self.node_id} to {pkt.dst}")
        link.send(pkt)

    def output(self, pkt: Packet) -> EnqueueOutcome:
        """Host-side entry point: put a locally generated packet on the wire."""
        link = self.routes.get(pkt.dst)
        if link is None:
            raise SimulationError(f"no route from {self.node_id} to {pkt.dst}")
        return link.send(pkt)


def compute_routes(nodes: dict[str, Node], links: list[Link],
                   link_src: dict[str, str]) -> None:
    """Static shortest-path routing (BFS hop count), precomputed per node.

    `link_src` maps link_id -> source node id.  Deterministic tie-break:
    links are considered in their listing order.
    """
    out_links: dict[str, list[Link]] = {nid: [] for nid in nodes}
    for link in links:
        out_links[link_src[link.link_id]].append(link)

    hosts = [nid for nid, n in nodes.items() if n.is_host]
    for dst in hosts:
        # BFS backwards is awkward with directed links; BFS forward from every
        # node is fine at these graph sizes.
        for src in nodes:
            if src == dst:
                continue
            first_hop = _bfs_first_hop(src, dst, out_links)
            if first_hop is not None:
                nodes[src].routes[dst] = first_hop


def _bfs_first_hop(src: str, dst: str, out_links: dict[str, list[Link]]):
    from collections import deque

    # BFS carrying the first-hop link forward; the first time we reach dst
    # we know which of src's links starts the shortest path.
    queue = deque()
    seen = {src}
    for link in out_links[src]:
        nxt = link.dst_node.node_id
        if nxt == dst:
            return link
        if nxt not in seen:
            seen.add(nxt)
            queue.append((nxt, link))
    while queue:
        node, first = queue.popleft()
        for link in out_links[node]:
            nxt = link.dst_node.node_id
            if nxt == dst:
                return first
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, first))
    return None
