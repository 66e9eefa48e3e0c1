"""Baseline congestion controllers: Reno, CUBIC, DCQCN, and a fixed-rate stub.

These are pure per-flow state machines driven by ack/loss/ECN events.  They
know nothing about the event engine; flows call into them and read back a
window (packets) or rate (bits/sec).

Controller behavior contract (used by flows and by the scaled variants):
    on_ack(acked_count, ecn, now)   on_loss(now)   current_window_or_rate()
plus, for rate-based controllers, the explicit feedback/timer hooks
on_cnp(now), on_rate_timer(now), on_alpha_timer(now), on_bytes_sent(n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import SimTime

SLOW_START = "slow-start"
CONGESTION_AVOIDANCE = "congestion-avoidance"

DEFAULT_RTO_MIN_NS = 1_000_000  # 1 ms

# DCQCN constants (published defaults; scenario files may override).
DCQCN_ALPHA_G = 1.0 / 16.0
DCQCN_ALPHA_TIMER_NS = 55_000
DCQCN_RATE_TIMER_NS = 300_000
DCQCN_BYTE_COUNTER = 10_000_000
DCQCN_FAST_RECOVERY_STAGES = 5


@dataclass
class RenoState:
    """Classic Reno with cumulative acks.

    Window is in packets and fractional; the congestion-avoidance increase
    is applied per ack packet as one cumulative batch (cwnd += n/cwnd).
    """

    cwnd: float = 10.0
    ssthresh: float = 32.0
    phase: str = SLOW_START
    rto_min: SimTime = DEFAULT_RTO_MIN_NS
    max_cwnd: float = 1e9
    restart_cwnd: float = 10.0

    kind = "window"

    def on_ack(self, acked_count: int, ecn: bool = False, now: SimTime = 0) -> None:
        assert acked_count >= 1
        if self.phase == SLOW_START:
            self.cwnd = min(self.max_cwnd, self.cwnd + acked_count)
            if self.cwnd >= self.ssthresh:
                self.phase = CONGESTION_AVOIDANCE
        else:
            self.cwnd = min(self.max_cwnd, self.cwnd + acked_count / self.cwnd)

    def on_loss(self, now: SimTime = 0) -> None:
        self.cwnd = max(1.0, min(self.cwnd, 0.5 * self.cwnd))
        self.ssthresh = self.cwnd
        self.phase = CONGESTION_AVOIDANCE

    def on_idle_restart(self, now: SimTime = 0) -> None:
        # slow-start-after-idle: the old window is stale after a compute
        # phase with nothing in flight; ssthresh keeps the loss memory
        if self.cwnd > self.restart_cwnd:
            self.cwnd = self.restart_cwnd
            if self.cwnd < self.ssthresh:
                self.phase = SLOW_START

    def on_timer(self, now: SimTime = 0) -> None:
        pass

    def current_window_or_rate(self) -> float:
        return self.cwnd


def cubic_k_offset(w_max: float, beta: float, c_scale: float) -> float:
    """Inflection-point offset in seconds: W(k_offset) == w_max."""
    return (w_max * (1.0 - beta) / c_scale) ** (1.0 / 3.0)


def cubic_window(w_max: float, k_offset: float, c_scale: float, t_sec: float) -> float:
    """The cubic growth curve W(t) = c·(t − k)³ + w_max, t in seconds."""
    d = t_sec - k_offset
    return c_scale * d * d * d + w_max


@dataclass
class CubicState:
    """Standard cubic growth: window follows W(t) from the last decrease,
    floored by the ack-clocked friendly-region estimate w_est (which is what
    keeps small-window flows from starving each other).

    `c_scale` is exposed directly (packets/sec³) so short-RTT setups can be
    tuned without kernel-style constant hacks.
    """

    cwnd: float = 10.0
    w_max: float = 10.0
    beta: float = 0.7
    c_scale: float = 0.4
    epoch_start: SimTime = 0
    k_offset: float = 0.0
    w_est: float = 10.0
    ssthresh: float = 32.0
    phase: str = SLOW_START
    rto_min: SimTime = DEFAULT_RTO_MIN_NS
    max_cwnd: float = 1e9
    restart_cwnd: float = 10.0

    kind = "window"

    def _elapsed_sec(self, now: SimTime) -> float:
        return (now - self.epoch_start) * 1e-9

    def window_at(self, now: SimTime) -> float:
        assert now >= self.epoch_start
        return cubic_window(self.w_max, self.k_offset, self.c_scale, self._elapsed_sec(now))

    def on_ack(self, acked_count: int, ecn: bool = False, now: SimTime = 0) -> None:
        assert acked_count >= 1
        if self.phase == SLOW_START:
            self.cwnd = min(self.max_cwnd, self.cwnd + acked_count)
            self.w_est = self.cwnd
            if self.cwnd >= self.ssthresh:
                self._enter_avoidance(now)
            return
        # friendly-region slope per RFC-style aimd factor 3(1-b)/(1+b)
        self.w_est += 3.0 * (1.0 - self.beta) / (1.0 + self.beta) * acked_count / self.cwnd
        target = self.window_at(now)
        if self.w_est > target:
            target = self.w_est
        self.cwnd = min(self.max_cwnd, max(1.0, target))

    def _enter_avoidance(self, now: SimTime) -> None:
        # Fresh epoch from the current window.  Below a remembered w_max the
        # curve re-enters its concave region; otherwise growth is convex from
        # here (k_offset 0 with w_max = cwnd).
        self.phase = CONGESTION_AVOIDANCE
        self.epoch_start = now
        self.w_est = self.cwnd
        if self.cwnd < self.w_max:
            self.k_offset = ((self.w_max - self.cwnd) / self.c_scale) ** (1.0 / 3.0)
        else:
            self.w_max = self.cwnd
            self.k_offset = 0.0

    def on_loss(self, now: SimTime = 0) -> None:
        self.w_max = self.cwnd
        self.cwnd = max(1.0, min(self.cwnd, self.beta * self.cwnd))
        self.epoch_start = now
        self.k_offset = cubic_k_offset(self.w_max, self.beta, self.c_scale)
        self.w_est = self.cwnd
        self.phase = CONGESTION_AVOIDANCE

    def on_idle_restart(self, now: SimTime = 0) -> None:
        if self.cwnd > self.restart_cwnd:
            self.cwnd = self.restart_cwnd
            if self.cwnd < self.ssthresh:
                self.phase = SLOW_START
            else:
                self._enter_avoidance(now)
            self.w_est = self.cwnd

    def on_timer(self, now: SimTime = 0) -> None:
        pass

    def current_window_or_rate(self) -> float:
        return self.cwnd


@dataclass
class DcqcnState:
    """Rate-based controller for lossless ECN fabrics.

    Rate cuts happen on congestion notification packets; recovery runs in
    fast-recovery stages (midpoint toward target) followed by additive
    increases of the target by r_ai.  The hyper-increase stage is omitted.
    """

    line_rate: float = 5e9
    r_ai: float = 5e6
    target_rate: float = 0.0
    curr_rate: float = 0.0
    alpha: float = 1.0
    alpha_g: float = DCQCN_ALPHA_G
    byte_counter: int = 0
    byte_counter_threshold: int = DCQCN_BYTE_COUNTER
    increase_stage: int = 0
    timer: SimTime = 0
    min_rate: float = 0.0
    _cnp_since_alpha_timer: bool = field(default=False, repr=False)

    kind = "rate"

    def __post_init__(self):
        if self.target_rate == 0.0:
            self.target_rate = self.line_rate
        if self.curr_rate == 0.0:
            self.curr_rate = self.line_rate
        if self.min_rate == 0.0:
            self.min_rate = self.line_rate / 1000.0
        self._check()

    def _check(self) -> None:
        assert 0.0 < self.curr_rate <= self.target_rate <= self.line_rate, (
            self.curr_rate, self.target_rate, self.line_rate)
        assert 0.0 <= self.alpha <= 1.0

    def on_ack(self, acked_count: int, ecn: bool = False, now: SimTime = 0) -> None:
        pass  # rate control is driven by CNPs and timers, not acks

    def on_loss(self, now: SimTime = 0) -> None:
        pass  # lossless fabric; drops indicate a misconfigured scenario

    def on_cnp(self, now: SimTime = 0) -> None:
        self.target_rate = self.curr_rate
        self.curr_rate = max(self.min_rate, (1.0 - self.alpha / 2.0) * self.curr_rate)
        self.alpha = (1.0 - self.alpha_g) * self.alpha + self.alpha_g
        self.byte_counter = 0
        self.increase_stage = 0
        self.timer = now
        self._cnp_since_alpha_timer = True
        self._check()

    def on_alpha_timer(self, now: SimTime = 0) -> None:
        if self._cnp_since_alpha_timer:
            self._cnp_since_alpha_timer = False
            return
        self.alpha = (1.0 - self.alpha_g) * self.alpha

    def _increase(self, now: SimTime) -> None:
        if self.increase_stage >= DCQCN_FAST_RECOVERY_STAGES:
            self.target_rate = min(self.line_rate, self.target_rate + self.r_ai)
        self.curr_rate = (self.curr_rate + self.target_rate) / 2.0
        self.increase_stage += 1
        self._check()

    def on_rate_timer(self, now: SimTime = 0) -> None:
        self._increase(now)

    def on_bytes_sent(self, nbytes: int, now: SimTime = 0) -> bool:
        """Byte-counter increase trigger; returns True when it fired."""
        self.byte_counter += nbytes
        if self.byte_counter >= self.byte_counter_threshold:
            self.byte_counter = 0
            self._increase(now)
            return True
        return False

    def on_timer(self, now: SimTime = 0) -> None:
        self.on_rate_timer(now)

    def current_window_or_rate(self) -> float:
        return self.curr_rate


@dataclass
class FixedRateState:
    """Statically configured sending rate; ignores all feedback."""

    rate: float = 1e9

    kind = "rate"

    def on_ack(self, acked_count: int, ecn: bool = False, now: SimTime = 0) -> None:
        pass

    def on_loss(self, now: SimTime = 0) -> None:
        pass

    def on_cnp(self, now: SimTime = 0) -> None:
        pass

    def on_timer(self, now: SimTime = 0) -> None:
        pass

    def current_window_or_rate(self) -> float:
        return self.rate
