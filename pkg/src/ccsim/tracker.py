"""Per-job progress tracking: bytes_ratio and iteration-boundary detection.

The tracker is the ack-side hook that keeps bytes_ratio fresh for the
aggressiveness function.  It detects iteration boundaries from gaps in the
ack arrival stream: a gap larger than g * iter_gap starts a new iteration,
updates the gap estimate by EWMA, and resets the byte count.  bytes_sent is
estimated as acked_segments * MTU; the sub-MTU error from a short final
segment is absorbed by the min(1, ...) clamp.
"""

from __future__ import annotations

from .engine import SimTime


class TrackerConfigError(ValueError):
    pass


class JobProgressTracker:
    """One per job by default, shared by all of the job's flows."""

    __slots__ = ("total_bytes", "bytes_sent", "bytes_ratio", "prev_ack_tstamp",
                 "iter_gap", "max_gap", "g", "gamma", "init_comm_gap", "mtu",
                 "boundaries_detected")

    def __init__(self, total_bytes: int, init_comm_gap: SimTime,
                 now: SimTime = 0, g: float = 0.75, gamma: float = 0.5,
                 mtu: int = 1500):
        if total_bytes <= 0:
            raise TrackerConfigError("total_bytes per iteration must be positive")
        if init_comm_gap <= 0:
            raise TrackerConfigError("init_comm_gap must be positive")
        self.total_bytes = total_bytes
        self.bytes_sent = 0
        self.bytes_ratio = 0.0
        # Anchoring the previous-ack timestamp at construction time keeps the
        # first real gap measurement sane for jobs that start late in a run.
        self.prev_ack_tstamp: SimTime = now
        self.iter_gap: float = float(init_comm_gap)
        self.max_gap: float = float(init_comm_gap)
        self.g = g
        self.gamma = gamma
        self.init_comm_gap = init_comm_gap
        self.mtu = mtu
        self.boundaries_detected = 0

    def update(self, num_acks: int, now: SimTime) -> None:
        """Ack hook: called for every ack packet, num_acks may be 0 for dups."""
        assert now >= self.prev_ack_tstamp
        self.bytes_sent += num_acks * self.mtu
        curr_gap = now - self.prev_ack_tstamp
        if curr_gap > self.max_gap:
            self.max_gap = curr_gap
        if curr_gap > self.g * self.iter_gap:
            # New iteration: fold the observed boundary gap into the estimate,
            # then reset per-iteration state.
            self.iter_gap = (1.0 - self.gamma) * self.iter_gap + self.gamma * self.max_gap
            self.bytes_ratio = 0.0
            self.bytes_sent = 0
            self.max_gap = float(self.init_comm_gap)
            self.boundaries_detected += 1
        else:
            self.bytes_ratio = min(1.0, self.bytes_sent / self.total_bytes)
        self.prev_ack_tstamp = now
        assert 0.0 <= self.bytes_ratio <= 1.0
