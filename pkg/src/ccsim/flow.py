"""Flow endpoints: a reliable windowed sender/receiver and a rate-paced one.

One Flow object covers both ends of a connection: the destination host
delivers data packets to it (receiver role) and the source host delivers
acks/CNPs back to it (sender role).  The engine stays single-threaded, so
this is just method dispatch, not shared state.

Window flows implement classic loss recovery: per-packet cumulative acks,
fast retransmit on three duplicate acks (one retransmission per recovery
episode), and go-back-N on retransmission timeout.  SACK is not modeled.
Rate flows assume a lossless fabric: packets arrive in order and loss
recovery is unnecessary; congestion feedback arrives as CNPs.
"""

from __future__ import annotations

from .engine import Engine, EventKind, SimTime, SimulationError
from .network import ACK_SIZE, EnqueueOutcome, Node, Packet, serialization_ns
from .tracker import JobProgressTracker

RTO_MAX_NS = 200_000_000
CNP_MIN_INTERVAL_NS = 50_000


class Flow:
    """Shared plumbing: app byte stream, receiver state, ack targets."""

    def __init__(self, engine: Engine, flow_id: str, job_id: str,
                 src_node: Node, dst_node: Node, mtu: int = 1500,
                 controller=None, tracker: JobProgressTracker | None = None):
        self.engine = engine
        self.flow_id = flow_id
        self.job_id = job_id
        self.src_node = src_node
        self.dst_node = dst_node
        self.mtu = mtu
        self.controller = controller
        self.tracker = tracker

        # sender-side stream state
        self.stream_end = 0        # bytes pushed by the application
        self.acked_bytes = 0       # cumulative bytes acked
        self.pause_depth = 0
        self._targets: list = []   # (cum_bytes, callback), FIFO, increasing

        # receiver-side state
        self.recv_expected = 0
        self._recv_ooo: dict[int, int] = {}
        self._recv_segments = 0    # cumulative in-order segments received
        self._last_cnp_ns = -(10 ** 18)
        self.cnp_interval_ns = CNP_MIN_INTERVAL_NS
        self.pause_count = 0

    # -- application interface -------------------------------------------------

    def app_push(self, nbytes: int) -> None:
        assert nbytes > 0
        self.stream_end += nbytes
        self._on_new_data()

    def add_ack_target(self, cum_bytes: int, callback) -> None:
        assert not self._targets or cum_bytes >= self._targets[-1][0]
        self._targets.append((cum_bytes, callback))
        self._check_targets()

    def _check_targets(self) -> None:
        while self._targets and self.acked_bytes >= self._targets[0][0]:
            _, cb = self._targets.pop(0)
            cb(self.engine.now)

    # -- pause/resume (lossless fabric back-pressure) ---------------------------

    def pause(self) -> None:
        self.pause_depth += 1
        self.pause_count += 1

    def resume(self) -> None:
        assert self.pause_depth > 0
        self.pause_depth -= 1
        if self.pause_depth == 0:
            self._on_resume()

    # -- packet delivery (called by the destination node) ----------------------

    def deliver(self, pkt: Packet) -> None:
        if pkt.cnp:
            self._on_cnp_packet(pkt)
        elif pkt.is_ack:
            self._on_ack_packet(pkt)
        else:
            self._on_data_packet(pkt)

    # -- receiver role ----------------------------------------------------------

    def _on_data_packet(self, pkt: Packet) -> None:
        if pkt.seq == self.recv_expected:
            self.recv_expected += pkt.size
            self._recv_segments += 1
            ooo = self._recv_ooo
            while self.recv_expected in ooo:
                self.recv_expected += ooo.pop(self.recv_expected)
                self._recv_segments += 1
        elif pkt.seq > self.recv_expected:
            self._recv_ooo.setdefault(pkt.seq, pkt.size)
        # else: duplicate of already-delivered data; the cumulative ack below
        # still tells the sender where we stand.
        if pkt.ecn_marked and self.controller.kind == "rate":
            self._maybe_send_cnp()
        if self._recv_segments == 0:
            return  # nothing in order yet; stay silent (acks carry >= 1 segment)
        ack = Packet(flow_id=self.flow_id, seq=self.recv_expected, size=ACK_SIZE,
                     src=self.dst_node.node_id, dst=self.src_node.node_id,
                     is_ack=True, acked_count=self._recv_segments)
        self.dst_node.output(ack)

    def _maybe_send_cnp(self) -> None:
        now = self.engine.now
        if now - self._last_cnp_ns < self.cnp_interval_ns:
            return
        self._last_cnp_ns = now
        cnp = Packet(flow_id=self.flow_id, seq=0, size=ACK_SIZE,
                     src=self.dst_node.node_id, dst=self.src_node.node_id,
                     cnp=True)
        self.dst_node.output(cnp)

    # -- hooks for subclasses ---------------------------------------------------

    def _on_new_data(self) -> None:
        raise NotImplementedError

    def _on_resume(self) -> None:
        raise NotImplementedError

    def _on_ack_packet(self, pkt: Packet) -> None:
        raise NotImplementedError

    def _on_cnp_packet(self, pkt: Packet) -> None:
        raise NotImplementedError


class WindowFlow(Flow):
    """Window-limited sender for Reno/CUBIC-style controllers."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        assert self.controller.kind == "window"
        # unacked segments in order: [seq, size, sent_time, retransmitted]
        self._segments: list = []
        self._head = 0          # index of first unacked segment
        self._next_tx = 0       # segments in [head, next_tx) count toward the window
        self._stream_cut = 0    # bytes already materialized into segments
        self._dup_acks = 0
        self._in_recovery = False
        self._recovery_point = 0
        # RFC 6298-style RTO state
        self._srtt: float | None = None
        self._rttvar = 0.0
        self._rto_backoff = 1
        self._rto_gen = 0
        self._rto_deadline: SimTime = 0
        self._last_activity: SimTime = 0
        self.rto_count = 0
        self.fast_retransmits = 0

    # -- segmentation -----------------------------------------------------------

    def _materialize(self) -> None:
        while self._stream_cut < self.stream_end:
            size = min(self.mtu, self.stream_end - self._stream_cut)
            self._segments.append([self._stream_cut, size, -1, False])
            self._stream_cut += size

    def _compact(self) -> None:
        if self._head > 4096 and self._head * 2 > len(self._segments):
            del self._segments[: self._head]
            self._next_tx -= self._head
            self._head = 0

    # -- sending ----------------------------------------------------------------

    def _rto(self) -> SimTime:
        if self._srtt is None:
            base = 3 * self.controller.rto_min
        else:
            base = int(self._srtt + max(1000.0, 4.0 * self._rttvar))
        base = max(self.controller.rto_min, base) * self._rto_backoff
        return min(RTO_MAX_NS, base)

    def _arm_rto(self) -> None:
        now = self.engine.now
        self._rto_deadline = now + self._rto()
        self._rto_gen += 1
        self.engine.schedule(self._rto_deadline, EventKind.TIMER_EXPIRY,
                             self._rto_fired, self._rto_gen)

    def _rto_fired(self, gen: int) -> None:
        if gen != self._rto_gen:
            return
        if self._head >= len(self._segments):
            return  # nothing outstanding
        # Timeout: treat as loss and go back to the first unacked segment.
        self.controller.on_loss(self.engine.now)
        self.rto_count += 1
        self._rto_backoff = min(8, self._rto_backoff * 2)
        self._next_tx = self._head
        self._dup_acks = 0
        self._in_recovery = False
        self._arm_rto()
        self._try_send()

    def _transmit(self, idx: int) -> None:
        seg = self._segments[idx]
        if seg[2] >= 0:
            seg[3] = True  # Karn: no RTT samples from retransmitted segments
        seg[2] = self.engine.now
        pkt = Packet(flow_id=self.flow_id, seq=seg[0], size=seg[1],
                     src=self.src_node.node_id, dst=self.dst_node.node_id)
        self.src_node.output(pkt)

    def _try_send(self) -> None:
        if self.pause_depth > 0:
            return
        self._materialize()
        window = int(self.controller.current_window_or_rate())
        had_outstanding = self._next_tx > self._head
        sent = False
        while (self._next_tx < len(self._segments)
               and self._next_tx - self._head < window):
            self._transmit(self._next_tx)
            self._next_tx += 1
            sent = True
        if sent:
            self._last_activity = self.engine.now
        if not had_outstanding and self._next_tx > self._head:
            self._arm_rto()

    def _on_new_data(self) -> None:
        # A full window is stale after sitting idle through a compute phase.
        if (self._head >= len(self._segments)
                and self.engine.now - self._last_activity > self._rto()):
            self.controller.on_idle_restart(self.engine.now)
        self._try_send()

    def _on_resume(self) -> None:
        self._try_send()

    # -- ack processing ---------------------------------------------------------

    def _on_ack_packet(self, pkt: Packet) -> None:
        now = self.engine.now
        ack = pkt.seq
        popped = 0
        first_popped = None
        while (self._head < len(self._segments)
               and self._segments[self._head][0] + self._segments[self._head][1] <= ack):
            if first_popped is None:
                first_popped = self._segments[self._head]
            self._head += 1
            popped += 1
        if self._next_tx < self._head:
            self._next_tx = self._head

        if self.tracker is not None:
            self.tracker.update(popped, now)

        if popped == 0:
            if ack < self.acked_bytes:
                return  # stale reordered ack
            self._dup_acks += 1
            if self._dup_acks == 3 and not self._in_recovery and self._head < len(self._segments):
                self._fast_retransmit(now)
            return

        self.acked_bytes = ack
        self._dup_acks = 0
        self._rto_backoff = 1
        if self._in_recovery:
            if ack >= self._recovery_point:
                self._in_recovery = False
            elif self._head < len(self._segments):
                # Partial ack: the next hole is also lost; retransmit it right
                # away (no extra window cut) instead of stalling until RTO.
                self._transmit(self._head)
        if first_popped is not None and not first_popped[3]:
            self._rtt_sample(now - first_popped[2])
        self.controller.on_ack(popped, False, now)
        if self._head < len(self._segments) or self._stream_cut < self.stream_end:
            self._arm_rto()
        else:
            self._rto_gen += 1  # nothing outstanding; disarm
        self._compact()
        self._try_send()
        self._check_targets()

    def _fast_retransmit(self, now: SimTime) -> None:
        self._in_recovery = True
        end = self._next_tx - 1 if self._next_tx > self._head else self._head
        seg = self._segments[end]
        self._recovery_point = seg[0] + seg[1]
        self.controller.on_loss(now)
        self.fast_retransmits += 1
        self._transmit(self._head)
        self._arm_rto()

    def _rtt_sample(self, rtt: float) -> None:
        if self._srtt is None:
            self._srtt = rtt
            self._rttvar = rtt / 2.0
        else:
            self._rttvar = 0.75 * self._rttvar + 0.25 * abs(self._srtt - rtt)
            self._srtt = 0.875 * self._srtt + 0.125 * rtt

    def _on_cnp_packet(self, pkt: Packet) -> None:
        raise SimulationError("window flow received a CNP")


class RateFlow(Flow):
    """Rate-paced sender for DCQCN-style and fixed-rate controllers.

    Assumes a lossless fabric: no retransmission machinery.  A dropped data
    packet would stall the iteration, so drops raise immediately.
    """

    def __init__(self, *args, alpha_timer_ns: int = 55_000,
                 rate_timer_ns: int = 300_000, cnp_interval_ns: int = CNP_MIN_INTERVAL_NS,
                 **kwargs):
        super().__init__(*args, **kwargs)
        assert self.controller.kind == "rate"
        self.alpha_timer_ns = alpha_timer_ns
        self.rate_timer_ns = rate_timer_ns
        self.cnp_interval_ns = cnp_interval_ns
        self._sent: list = []      # [seq, size] awaiting ack, in order
        self._sent_head = 0
        self._stream_cut = 0
        self._pacing = False
        self._pace_gen = 0
        self._last_send_ns: SimTime = 0
        self._last_send_size = 0
        self._timer_gen = 0
        self._timers_started = False

    def start_timers(self) -> None:
        """Begin the periodic alpha/rate timer loops (DCQCN-style only)."""
        if self._timers_started or not hasattr(self.controller, "on_alpha_timer"):
            return
        self._timers_started = True
        self._schedule_timers()

    def _schedule_timers(self) -> None:
        self._timer_gen += 1
        gen = self._timer_gen
        now = self.engine.now
        self.engine.schedule(now + self.alpha_timer_ns, EventKind.TIMER_EXPIRY,
                             self._alpha_tick, gen)
        self.engine.schedule(now + self.rate_timer_ns, EventKind.TIMER_EXPIRY,
                             self._rate_tick, gen)

    def _alpha_tick(self, gen: int) -> None:
        if gen != self._timer_gen:
            return
        self.controller.on_alpha_timer(self.engine.now)
        self.engine.schedule(self.engine.now + self.alpha_timer_ns,
                             EventKind.TIMER_EXPIRY, self._alpha_tick, gen)

    def _rate_tick(self, gen: int) -> None:
        if gen != self._timer_gen:
            return
        self.controller.on_rate_timer(self.engine.now)
        self.engine.schedule(self.engine.now + self.rate_timer_ns,
                             EventKind.TIMER_EXPIRY, self._rate_tick, gen)

    # -- sending ----------------------------------------------------------------

    def _on_new_data(self) -> None:
        if not self._pacing:
            self._send_next(self._pace_gen)

    def _on_resume(self) -> None:
        if not self._pacing:
            self._pace_gen += 1
            self._send_next(self._pace_gen)

    def _send_next(self, gen: int) -> None:
        if gen != self._pace_gen:
            return
        if self.pause_depth > 0 or self._stream_cut >= self.stream_end:
            self._pacing = False
            return
        self._pacing = True
        now = self.engine.now
        # Pacing against the live rate: the inter-packet gap is re-evaluated
        # on every wake (bounded by the rate timer period) so rate recovery
        # during a long gap takes effect promptly.
        if self._last_send_size:
            rate = max(1, int(self.controller.current_window_or_rate()))
            due = self._last_send_ns + serialization_ns(self._last_send_size, rate)
            if now < due:
                self.engine.schedule(min(due, now + self.rate_timer_ns),
                                     EventKind.TIMER_EXPIRY, self._send_next, gen)
                return
        size = min(self.mtu, self.stream_end - self._stream_cut)
        pkt = Packet(flow_id=self.flow_id, seq=self._stream_cut, size=size,
                     src=self.src_node.node_id, dst=self.dst_node.node_id)
        self._sent.append((self._stream_cut, size))
        self._stream_cut += size
        outcome = self.src_node.output(pkt)
        if outcome is EnqueueOutcome.DROPPED:
            raise SimulationError(
                f"rate flow {self.flow_id} lost a packet; lossless scenarios "
                "must configure pause thresholds below queue capacity")
        if hasattr(self.controller, "on_bytes_sent"):
            self.controller.on_bytes_sent(size, self.engine.now)
        self._last_send_ns = now
        self._last_send_size = size
        gap = serialization_ns(size, max(1, int(self.controller.current_window_or_rate())))
        self.engine.schedule(now + min(gap, self.rate_timer_ns),
                             EventKind.TIMER_EXPIRY, self._send_next, gen)

    # -- feedback ---------------------------------------------------------------

    def _on_ack_packet(self, pkt: Packet) -> None:
        now = self.engine.now
        popped = 0
        while (self._sent_head < len(self._sent)
               and self._sent[self._sent_head][0] + self._sent[self._sent_head][1] <= pkt.seq):
            self._sent_head += 1
            popped += 1
        if self._sent_head > 4096 and self._sent_head * 2 > len(self._sent):
            del self._sent[: self._sent_head]
            self._sent_head = 0
        if pkt.seq > self.acked_bytes:
            self.acked_bytes = pkt.seq
        if self.tracker is not None:
            self.tracker.update(popped, now)
        self.controller.on_ack(popped, False, now)
        self._check_targets()

    def _on_cnp_packet(self, pkt: Packet) -> None:
        self.controller.on_cnp(self.engine.now)
        if self._timers_started:
            self._schedule_timers()  # timer reset on CNP
