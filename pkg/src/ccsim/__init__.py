"""Deterministic packet-level simulator for congestion-control-driven
communication interleaving of periodic training jobs."""

from .aggressiveness import AggressivenessFunction, f_eval, IDENTITY, STUDY_FUNCTIONS
from .engine import Engine, Event, EventKind, SchedulingError, SimTime, SimulationError
from .metrics import (RunReport, UtilizationTrace, interleaving_score, percentile,
                      score_between, speedup, write_report)
from .mltcp import MltcpCubic, MltcpMode, MltcpReno, Mlqcn
from .network import EnqueueOutcome, Link, Node, Packet, Queue, QueueMode
from .run import Simulation, run_scenario
from .scenario import (CcSpec, MetricsSpec, ScenarioSpec, ScenarioError,
                       TrackerSpec, parse_scenario, serialize_scenario)
from .tracker import JobProgressTracker, TrackerConfigError
from .topology import LinkSpec, QueueConfig, TopologySpec, build_network
from .transport import CubicState, DcqcnState, FixedRateState, RenoState
from .workload import (IterationRecord, Job, JobSpec, compatibility_score,
                       isolation_iteration_ns, sample_straggler)

__all__ = [name for name in dir() if not name.startswith("_")]
