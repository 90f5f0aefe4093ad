"""Discrete-time replay of a bandwidth trace against an event stream.

Each interval ``tau`` starts at ``tau * delta``.  Events become pending at
the first interval start at or after their arrival.  The policy sees the
pending alerts and the carried visual candidates, and each unit it sends is
stamped with ``start + prefix / B`` on the wall clock.  Carried visual
candidates older than ``d_vis`` at an interval start are dropped.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .baselines import Policy, policy_schedule
from .priority import DEFAULT_BETA, DEFAULT_GAMMA, PriorityOutput, priority_of
from .scheduler import Event, IntervalContext, Kind, interval_budget

log = logging.getLogger(__name__)

PATTERNS = ("low", "medium", "burst")


@dataclass(frozen=True)
class BandwidthTrace:
    """Per-interval average uplink rate in bytes per second."""

    bytes_per_s: tuple[int, ...]
    period_s: float = 1.0

    def __post_init__(self):
        if not self.bytes_per_s:
            raise ValueError("bandwidth trace is empty")
        if any(b <= 0 for b in self.bytes_per_s):
            raise ValueError("bandwidth samples must be positive")
        if not self.period_s > 0:
            raise ValueError(f"period must be positive, got {self.period_s}")

    def __len__(self):
        return len(self.bytes_per_s)

    @property
    def t_start(self) -> tuple[float, ...]:
        return tuple(i * self.period_s for i in range(len(self)))


def scale_trace(trace: BandwidthTrace, factor: float) -> BandwidthTrace:
    if not factor > 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    return replace(trace, bytes_per_s=tuple(max(1, math.floor(b * factor))
                                            for b in trace.bytes_per_s))


@dataclass
class SimulationConfig:
    interval_delta: float = 1.0
    d_vis: float = 1.5
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    bandwidth_scale: float = 1.0
    t_parse: float = 0.0
    policy: Policy = Policy.DAT
    vtr_deadlines: tuple[float, ...] = (0.5, 1.0)
    seed: int = 0
    json_only_order: str = "phi"
    # "arrival": delay since the event arrived; "interval": transmit time
    # within the interval that carried the visual unit
    visual_delay_origin: str = "arrival"
    normalize_w_alarm: bool = True
    wrap_trace: bool = True
    strict_budget: bool = False
    max_intervals: int = 1_000_000

    def __post_init__(self):
        self.policy = Policy(self.policy)
        self.vtr_deadlines = tuple(sorted(float(d) for d in self.vtr_deadlines))
        if not self.interval_delta > 0:
            raise ValueError(f"interval_delta must be positive, got {self.interval_delta}")
        if not self.d_vis > 0:
            raise ValueError(f"d_vis must be positive, got {self.d_vis}")
        if not self.bandwidth_scale > 0:
            raise ValueError(f"bandwidth_scale must be positive, got {self.bandwidth_scale}")
        if self.t_parse < 0:
            raise ValueError(f"t_parse must be non-negative, got {self.t_parse}")
        if self.visual_delay_origin not in ("arrival", "interval"):
            raise ValueError(f"unknown visual_delay_origin {self.visual_delay_origin!r}")
        if self.json_only_order not in ("phi", "priority"):
            raise ValueError(f"unknown json_only_order {self.json_only_order!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = self.policy.value
        d["vtr_deadlines"] = list(self.vtr_deadlines)
        return d


@dataclass
class DeliveryRecord:
    event_id: str
    priority: float
    arrival_s: float
    alarm_s: float | None = None
    visual_s: float | None = None
    visual_kind: Kind | None = None
    visual_tx_s: float | None = None
    expired: bool = False
    starved: bool = False


class DeliveryLedger(dict):
    """Event id -> DeliveryRecord, in event order."""

    def check(self) -> None:
        for r in self.values():
            if r.visual_s is not None and r.alarm_s is None:
                raise ValueError(f"{r.event_id}: visual delivered without alarm")
            for t in (r.alarm_s, r.visual_s):
                if t is not None and t < r.arrival_s:
                    raise ValueError(f"{r.event_id}: delivery before arrival")


@dataclass
class MetricsReport:
    w_alarm_s: float | None
    vtr: dict[float, float]
    avg_visual_delay_s: float | None
    n_events: int = 0
    n_alarms: int = 0
    n_visuals: int = 0
    n_expired: int = 0
    n_starved: int = 0
    w_alarm_sum: float = 0.0

    def headline(self) -> dict[str, float | None]:
        out: dict[str, float | None] = {"W-Alarm": self.w_alarm_s}
        for d, v in self.vtr.items():
            out[f"VTR@{d:g}s"] = v
        out["AvgVisDelay"] = self.avg_visual_delay_s
        return out


def compute_metrics(ledger: DeliveryLedger, config: SimulationConfig | None = None
                    ) -> MetricsReport:
    config = config or SimulationConfig()
    records = list(ledger.values())
    alarmed = [r for r in records if r.alarm_s is not None]
    weight = sum(r.priority for r in alarmed)
    w_sum = sum(r.priority * (r.alarm_s - r.arrival_s) for r in alarmed)
    if not alarmed:
        w_alarm = None
    elif not config.normalize_w_alarm:
        w_alarm = w_sum
    elif weight > 0:
        w_alarm = w_sum / weight
    else:
        w_alarm = sum(r.alarm_s - r.arrival_s for r in alarmed) / len(alarmed)

    if config.visual_delay_origin == "arrival":
        delays = [r.visual_s - r.arrival_s for r in records if r.visual_s is not None]
    else:
        delays = [r.visual_tx_s for r in records if r.visual_s is not None]
    n = len(records)
    vtr = {d: (sum(1 for x in delays if x <= d) / n if n else 0.0)
           for d in config.vtr_deadlines}
    return MetricsReport(
        w_alarm_s=w_alarm,
        vtr=vtr,
        avg_visual_delay_s=sum(delays) / len(delays) if delays else None,
        n_events=n,
        n_alarms=len(alarmed),
        n_visuals=len(delays),
        n_expired=sum(r.expired for r in records),
        n_starved=sum(r.starved for r in records),
        w_alarm_sum=w_sum,
    )


def _first_interval(arrival: float, delta: float) -> int:
    tau = max(0, math.ceil(arrival / delta))
    # float guard: the chosen start must not precede the arrival
    while tau * delta < arrival:
        tau += 1
    while tau > 0 and (tau - 1) * delta >= arrival:
        tau -= 1
    return tau


def run(trace: BandwidthTrace, events: Sequence[Event],
        config: SimulationConfig | None = None) -> tuple[DeliveryLedger, MetricsReport]:
    config = config or SimulationConfig()
    policy = config.policy
    delta = config.interval_delta
    scaled = scale_trace(trace, config.bandwidth_scale)
    bw = scaled.bytes_per_s

    def sample(tau: int) -> int | None:
        # trace sample in force at the interval start (sample-and-hold)
        k = math.floor(tau * delta / scaled.period_s + 1e-9)
        if k >= len(bw) and not config.wrap_trace:
            return None
        return bw[k % len(bw)]

    if not config.wrap_trace and events:
        last = _first_interval(max(e.arrival_s for e in events), delta)
        if sample(last) is None:
            raise ValueError(f"trace covers {len(bw) * scaled.period_s:g} s but events "
                             f"arrive until interval {last}")
    max_budget = max(interval_budget(b, delta) for b in bw)

    ordered = sorted(events, key=lambda e: (e.arrival_s, e.id))
    if len({e.id for e in ordered}) != len(ordered):
        raise ValueError("duplicate event ids")
    ledger = DeliveryLedger(
        (e.id, DeliveryRecord(e.id, e.priority, e.arrival_s)) for e in ordered)

    carrier = policy.carrier
    schedulable = []
    for e in ordered:
        if e.cost(carrier) > max_budget:
            ledger[e.id].starved = True
        else:
            schedulable.append(e)
    starved = [e.id for e in ordered if ledger[e.id].starved]
    if starved:
        msg = (f"{len(starved)} event(s) have a {carrier.value} unit larger than the "
               f"largest interval budget ({max_budget} B): {', '.join(starved[:5])}")
        if config.strict_budget:
            raise ValueError(msg)
        log.warning(msg)

    by_id = {e.id: e for e in ordered}
    pending: dict[str, Event] = {}
    visual_pending: dict[str, Event] = {}
    nxt = 0
    tau = _first_interval(schedulable[0].arrival_s, delta) if schedulable else 0
    n_intervals = 0
    while nxt < len(schedulable) or pending or visual_pending:
        if not pending and not visual_pending:
            tau = max(tau, _first_interval(schedulable[nxt].arrival_s, delta))
        start = tau * delta
        while nxt < len(schedulable) and schedulable[nxt].arrival_s <= start:
            pending[schedulable[nxt].id] = schedulable[nxt]
            nxt += 1
        for eid in [i for i, e in visual_pending.items() if start - e.arrival_s > config.d_vis]:
            ledger[eid].expired = True
            del visual_pending[eid]

        b = sample(tau)
        if b is None:
            raise ValueError(f"bandwidth trace exhausted at interval {tau}")
        ctx = IntervalContext(b, delta, config.d_vis,
                              pending=list(pending.values()),
                              visual_pending=list(visual_pending.values()))
        sched = policy_schedule(policy, ctx, json_only_order=config.json_only_order)

        prefix = 0
        for u in sched.units:
            prefix += u.size
            t_tx = prefix / b
            rec = ledger[u.event_id]
            if u.kind is carrier:
                rec.alarm_s = start + t_tx + config.t_parse
                del pending[u.event_id]
                if policy.supplements_visuals:
                    visual_pending[u.event_id] = by_id[u.event_id]
            if u.kind is not Kind.JSON:
                rec.visual_s = start + t_tx
                rec.visual_tx_s = t_tx
                rec.visual_kind = u.kind
                visual_pending.pop(u.event_id, None)

        tau += 1
        n_intervals += 1
        if n_intervals > config.max_intervals:
            raise RuntimeError(f"simulation exceeded {config.max_intervals} intervals "
                               f"with {len(pending)} alerts still pending")
    return ledger, compute_metrics(ledger, config)


@dataclass
class EventParams:
    """Workload generator settings; sizes are log-normal in bytes."""

    rate_low: float = 0.5
    rate_medium: float = 2.0
    rate_background: float = 0.5
    burst_rate: float = 0.1
    burst_size: tuple[int, int] = (5, 15)
    burst_width_s: float = 1.0
    json_median: float = 2_048
    json_sigma: float = 0.5
    roi_median: float = 61_440
    roi_sigma: float = 0.6
    box_median: float = 153_600
    box_sigma: float = 0.5
    # sizes are clipped to [median / size_clip, median * size_clip]
    size_clip: float = 2.0
    severe_prob: float = 0.3
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA


def _poisson_times(rng: np.random.Generator, rate: float, duration: float) -> np.ndarray:
    n = rng.poisson(rate * duration)
    return rng.uniform(0.0, duration, size=n)


def gen_events(pattern: str, duration_s: float, seed: int,
               params: EventParams | None = None) -> list[Event]:
    if pattern not in PATTERNS:
        raise ValueError(f"unknown arrival pattern {pattern!r}; expected one of {PATTERNS}")
    if not duration_s > 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    p = params or EventParams()
    rng = np.random.default_rng(seed)
    if pattern == "low":
        times = _poisson_times(rng, p.rate_low, duration_s)
    elif pattern == "medium":
        times = _poisson_times(rng, p.rate_medium, duration_s)
    else:
        parts = [_poisson_times(rng, p.rate_background, duration_s)]
        for epoch in np.sort(_poisson_times(rng, p.burst_rate, duration_s)):
            k = rng.integers(p.burst_size[0], p.burst_size[1] + 1)
            parts.append(epoch + rng.uniform(0.0, p.burst_width_s, size=k))
        times = np.concatenate(parts)
        times = times[times < duration_s]
    times = np.sort(times)
    n = len(times)

    def sizes(median, sigma):
        raw = rng.lognormal(np.log(median), sigma, size=n)
        return np.clip(raw, median / p.size_clip, median * p.size_clip).round().astype(int)

    c_json = sizes(p.json_median, p.json_sigma)
    c_roi = sizes(p.roi_median, p.roi_sigma)
    c_box = sizes(p.box_median, p.box_sigma)
    levels = (rng.random(n) < p.severe_prob).astype(int)
    u = rng.random(n)
    events = []
    for j in range(n):
        level = int(levels[j])
        low, high = (p.gamma, 1.0) if level else (0.0, p.gamma)
        score = float(low + (high - low) * u[j])
        if not level and score >= p.gamma:
            score = math.nextafter(p.gamma, 0.0)
        out = PriorityOutput(level, score)
        events.append(Event(
            id=f"ev{j:05d}", arrival_s=float(times[j]),
            priority=priority_of(out, p.beta),
            c_json=int(c_json[j]), c_roi=int(c_roi[j]), c_box=int(c_box[j]),
            level=level, score=score,
        ))
    return events


def gen_bandwidth_trace(duration_s: float, mean_bytes_per_s: float = 1_500_000,
                        noise: float = 0.2, seed: int = 0,
                        period_s: float = 1.0) -> BandwidthTrace:
    """Flat rate with independent uniform multiplicative noise per sample."""
    if not duration_s > 0 or not mean_bytes_per_s > 0:
        raise ValueError("duration and mean rate must be positive")
    if not 0 <= noise < 1:
        raise ValueError(f"noise must lie in [0, 1), got {noise}")
    rng = np.random.default_rng(seed)
    n = max(1, math.ceil(duration_s / period_s))
    samples = mean_bytes_per_s * (1.0 + rng.uniform(-noise, noise, size=n))
    return BandwidthTrace(tuple(max(1, int(s)) for s in samples), period_s)
