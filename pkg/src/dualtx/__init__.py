"""Priority- and bandwidth-aware multi-stream uplink scheduling."""

from .baselines import Policy, policy_schedule
from .gating import Detection, FrameDetections, GateDecision, Route, gate, route, trigger_score
from .oracle import OracleSolution, compare, exact_lexicographic
from .priority import PriorityOutput, normalize_level, semantic_priority, validate_priority
from .scheduler import (
    Event,
    IntervalContext,
    Kind,
    Schedule,
    TransmissionUnit,
    check_constraints,
    completion_times,
    interval_budget,
    json_load,
    schedule_interval,
)
from .simulator import (
    BandwidthTrace,
    MetricsReport,
    SimulationConfig,
    compute_metrics,
    gen_events,
    run,
    scale_trace,
)

__version__ = "0.1.0"
