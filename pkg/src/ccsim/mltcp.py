"""Byte-progress-scaled variants of the base controllers.

Each variant scales exactly one step of its base algorithm by the
aggressiveness factor F(bytes_ratio): either the window/rate increase
(WindowIncrease mode) or the multiplicative decrease (MultiplicativeDecrease
mode), never both.  Slow start and every other part of the base algorithm
are untouched.

With the identity function (F == 1) every variant reproduces its base
controller's float trajectory bit for bit; the formulas below are written
to preserve that (1.0 * x is exact in IEEE arithmetic).

A decrease event is never allowed to grow the window/rate: with some
parameter choices F*beta or F*(1-alpha/2) can exceed 1 at high bytes_ratio,
so decreases are clamped at the pre-event value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .aggressiveness import AggressivenessFunction, f_eval
from .engine import SimTime
from .tracker import JobProgressTracker
from .transport import (CONGESTION_AVOIDANCE, DCQCN_FAST_RECOVERY_STAGES,
                        CubicState, DcqcnState, RenoState, cubic_k_offset,
                        cubic_window)


class MltcpMode(Enum):
    WINDOW_INCREASE = "wi"
    MULTIPLICATIVE_DECREASE = "md"


@dataclass
class MltcpReno(RenoState):
    """Reno with the congestion-avoidance increase or the halving scaled."""

    mode: MltcpMode = MltcpMode.WINDOW_INCREASE
    func: AggressivenessFunction = field(default_factory=AggressivenessFunction)
    tracker: JobProgressTracker = None

    def on_ack(self, acked_count: int, ecn: bool = False, now: SimTime = 0) -> None:
        if self.phase == CONGESTION_AVOIDANCE and self.mode is MltcpMode.WINDOW_INCREASE:
            assert acked_count >= 1
            factor = f_eval(self.func, self.tracker.bytes_ratio)
            self.cwnd = min(self.max_cwnd, self.cwnd + factor * acked_count / self.cwnd)
            return
        super().on_ack(acked_count, ecn, now)

    def on_loss(self, now: SimTime = 0) -> None:
        if self.mode is MltcpMode.MULTIPLICATIVE_DECREASE:
            factor = f_eval(self.func, self.tracker.bytes_ratio)
            self.cwnd = max(1.0, min(self.cwnd, factor * 0.5 * self.cwnd))
            self.ssthresh = self.cwnd
            self.phase = CONGESTION_AVOIDANCE
            return
        super().on_loss(now)


@dataclass
class MltcpCubic(CubicState):
    """CUBIC with the growth-curve time dilated, or the beta cut scaled."""

    mode: MltcpMode = MltcpMode.WINDOW_INCREASE
    func: AggressivenessFunction = field(default_factory=AggressivenessFunction)
    tracker: JobProgressTracker = None

    def window_at(self, now: SimTime) -> float:
        assert now >= self.epoch_start
        t_sec = self._elapsed_sec(now)
        if self.mode is MltcpMode.WINDOW_INCREASE:
            # Smaller factors dilate time: less-favored flows climb the same
            # growth curve more slowly.
            t_sec = f_eval(self.func, self.tracker.bytes_ratio) * t_sec
        return cubic_window(self.w_max, self.k_offset, self.c_scale, t_sec)

    def on_loss(self, now: SimTime = 0) -> None:
        if self.mode is MltcpMode.MULTIPLICATIVE_DECREASE:
            factor = f_eval(self.func, self.tracker.bytes_ratio)
            self.w_max = self.cwnd
            self.cwnd = max(1.0, min(self.cwnd, factor * self.beta * self.cwnd))
            self.epoch_start = now
            self.k_offset = cubic_k_offset(self.w_max, self.beta, self.c_scale)
            self.w_est = self.cwnd
            self.phase = CONGESTION_AVOIDANCE
            return
        super().on_loss(now)


@dataclass
class Mlqcn(DcqcnState):
    """DCQCN with the additive step or the CNP rate cut scaled."""

    mode: MltcpMode = MltcpMode.WINDOW_INCREASE
    func: AggressivenessFunction = field(default_factory=AggressivenessFunction)
    tracker: JobProgressTracker = None

    def _increase(self, now: SimTime) -> None:
        if self.mode is MltcpMode.WINDOW_INCREASE:
            if self.increase_stage >= DCQCN_FAST_RECOVERY_STAGES:
                factor = f_eval(self.func, self.tracker.bytes_ratio)
                self.target_rate = min(self.line_rate, self.target_rate + factor * self.r_ai)
            self.curr_rate = (self.curr_rate + self.target_rate) / 2.0
            self.increase_stage += 1
            self._check()
            return
        super()._increase(now)

    def on_cnp(self, now: SimTime = 0) -> None:
        if self.mode is MltcpMode.MULTIPLICATIVE_DECREASE:
            factor = f_eval(self.func, self.tracker.bytes_ratio)
            self.target_rate = self.curr_rate
            self.curr_rate = max(self.min_rate,
                                 min(self.curr_rate, factor * (1.0 - self.alpha / 2.0) * self.curr_rate))
            self.alpha = (1.0 - self.alpha_g) * self.alpha + self.alpha_g
            self.byte_counter = 0
            self.increase_stage = 0
            self.timer = now
            self._cnp_since_alpha_timer = True
            self._check()
            return
        super().on_cnp(now)
