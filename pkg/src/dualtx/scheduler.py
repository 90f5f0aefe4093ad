"""Online hierarchical greedy scheduling for one interval.

Stage 1 ranks pending events by priority per JSON byte and packs alert
units into the interval budget.  Stage 2 spends what is left on at most one
visual unit per event (the cheaper of ROI and box), ranked by priority per
visual byte, subject to the visual deadline.

Sizes are integer bytes and every feasibility test is done in exact
arithmetic; times are floats derived from byte prefixes for reporting only.
"""

from __future__ import annotations

import enum
import itertools
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np


class Kind(str, enum.Enum):
    JSON = "json"
    ROI = "roi"
    BOX = "box"


VISUAL_KINDS = (Kind.ROI, Kind.BOX)
KIND_ORDER = {Kind.JSON: 0, Kind.ROI: 1, Kind.BOX: 2}


def exact(x) -> Fraction:
    """Exact rational for ``x``; floats are read as their shortest decimal."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True, slots=True)
class Event:
    id: str
    arrival_s: float
    priority: float
    c_json: int
    c_roi: int
    c_box: int
    level: int | None = None
    score: float | None = None

    def __post_init__(self):
        for name in ("c_json", "c_roi", "c_box"):
            c = getattr(self, name)
            if not isinstance(c, int) or c <= 0:
                raise ValueError(f"event {self.id}: {name} must be a positive integer, got {c!r}")
        if not 0.0 <= self.priority <= 1.0:
            raise ValueError(f"event {self.id}: priority {self.priority} outside [0, 1]")

    def cost(self, kind: Kind) -> int:
        if kind is Kind.JSON:
            return self.c_json
        return self.c_roi if kind is Kind.ROI else self.c_box

    def visual_choice(self) -> tuple[Kind, int]:
        """Cheaper visual unit; ROI wins a tie."""
        if self.c_roi <= self.c_box:
            return Kind.ROI, self.c_roi
        return Kind.BOX, self.c_box


class TransmissionUnit(NamedTuple):
    event_id: str
    kind: Kind
    size: int


@dataclass
class Schedule:
    """Ordered units chosen for one interval.

    ``prior_json`` names events whose alert went out in an earlier interval
    and which were admitted here only as visual candidates.
    """

    units: list[TransmissionUnit]
    bandwidth: float
    budget: int
    prior_json: frozenset[str] = frozenset()
    used_bytes: int = field(init=False)

    def __post_init__(self):
        self.used_bytes = sum(map(operator.itemgetter(2), self.units))

    @property
    def t_end(self) -> float:
        return self.used_bytes / self.bandwidth if self.units else 0.0

    @property
    def selections(self) -> dict[str, set[Kind]]:
        out: dict[str, set[Kind]] = {}
        for u in self.units:
            out.setdefault(u.event_id, set()).add(u.kind)
        return out

    def selected(self, event_id: str, kind: Kind) -> bool:
        return any(u.event_id == event_id and u.kind is kind for u in self.units)


@dataclass
class IntervalContext:
    bandwidth: float
    delta: float
    d_vis: float
    pending: Sequence[Event] = ()
    visual_pending: Sequence[Event] = ()

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.delta > 0:
            raise ValueError(f"interval length must be positive, got {self.delta}")
        if not self.d_vis > 0:
            raise ValueError(f"visual deadline must be positive, got {self.d_vis}")

    @property
    def budget(self) -> int:
        return interval_budget(self.bandwidth, self.delta)

    @property
    def deadline_bytes(self) -> int:
        """Largest byte prefix whose transmit time stays within ``d_vis``."""
        return math.floor(exact(self.d_vis) * exact(self.bandwidth))


def interval_budget(bandwidth: float, delta: float) -> int:
    if not bandwidth > 0 or not delta > 0:
        raise ValueError(f"bandwidth and delta must be positive, got {bandwidth}, {delta}")
    return math.floor(exact(bandwidth) * exact(delta))


def json_load(events: Iterable[Event]) -> int:
    return sum(e.c_json for e in events)


def order_by_ratio(events: Sequence[Event], cost: Callable[[Event], int]) -> list[Event]:
    """Sort by ``priority / cost`` descending, then priority descending, then id.

    Correctly rounded division is monotone, so the float sort can merge
    distinct ratios into ties but never invert them; only runs of equal
    floats are re-sorted on the exact ratio.
    """
    evs = list(events)
    costs = list(map(cost, evs))
    prio = np.fromiter(map(_priority, evs), dtype=float, count=len(evs))
    return [evs[i] for i in _rank(prio, costs, _exact_key(evs, costs))]


def _exact_key(evs: Sequence[Event], costs: Sequence[int]) -> Callable[[int], tuple]:
    return lambda i: (-Fraction(evs[i].priority) / costs[i], -evs[i].priority, evs[i].id)


def _rank(prio: np.ndarray, costs: Sequence[int], exact_key: Callable[[int], tuple]) -> list[int]:
    # indices by descending prio/cost; works on arrays to keep large batches cache-friendly
    if len(costs) < 2:
        return list(range(len(costs)))
    neg_ratio = -(prio / np.asarray(costs, dtype=float))
    # stability is not needed: every run of equal floats is re-sorted on a total key
    order = np.argsort(neg_ratio)
    ranked = neg_ratio[order]
    order = order.tolist()
    tied = np.flatnonzero(ranked[1:] == ranked[:-1])
    if tied.size:
        breaks = np.diff(tied) > 1
        starts = tied[np.r_[True, breaks]].tolist()
        ends = (tied[np.r_[breaks, True]] + 2).tolist()
        for a, b in zip(starts, ends):
            order[a:b] = sorted(order[a:b], key=exact_key)
    return order


_json_cost = operator.attrgetter("c_json")
_priority = operator.attrgetter("priority")
_fields = operator.attrgetter("id", "priority", "c_json", "c_roi", "c_box")


def schedule_interval(ctx: IntervalContext, *, visuals: bool = True) -> Schedule:
    """Two-stage greedy over ``ctx``; ``visuals=False`` runs Stage 1 only."""
    pending = list(ctx.pending)
    pool = pending + list(ctx.visual_pending)
    n, m = len(pending), len(pool)
    # one pass over the events; separate passes cost a cache miss each on large batches
    ids, prio, cj, roi, box = (list(col) for col in zip(*map(_fields, pool))) if pool \
        else ([], [], [], [], [])
    prio = np.fromiter(prio, dtype=float, count=m)
    cj = cj[:n]

    remaining = ctx.budget
    order = _rank(prio[:n], cj, _exact_key(pending, cj))
    sent: list[int] = []
    # walk costs in ranked order from a contiguous copy
    for i, c in zip(order, np.asarray(cj, dtype=np.int64)[order].tolist()):
        if c <= remaining:
            remaining -= c
            sent.append(i)
    units = _units(map(ids.__getitem__, sent), itertools.repeat(Kind.JSON),
                   map(cj.__getitem__, sent))

    carried = frozenset(ids[n:])
    if visuals and remaining > 0:
        used = ctx.budget - remaining
        limit = ctx.deadline_bytes
        roi = np.asarray(roi, dtype=np.int64)
        box = np.asarray(box, dtype=np.int64)
        vis = np.minimum(roi, box)
        cand = np.asarray(sent + list(range(n, m)), dtype=np.intp)
        vc = vis[cand].tolist()
        order = _rank(prio[cand], vc, _exact_key(_Lazy(pool, cand.tolist()), vc))
        ranked = cand[order]
        chosen: list[int] = []
        for j, c in enumerate(np.asarray(vc, dtype=np.int64)[order].tolist()):
            # t + c/B <= D_vis  <=>  used + c <= D_vis * B
            if c <= remaining and used + c <= limit:
                chosen.append(j)
                remaining -= c
                used += c
                if remaining == 0:
                    break
        picked = ranked[np.asarray(chosen, dtype=np.intp)]
        kinds = np.where(roi[picked] <= box[picked], 0, 1).tolist()
        units += _units(map(ids.__getitem__, picked.tolist()),
                        map((Kind.ROI, Kind.BOX).__getitem__, kinds),
                        vis[picked].tolist())
    return Schedule(units, ctx.bandwidth, ctx.budget, prior_json=carried)


def _units(ids, kinds, sizes) -> list[TransmissionUnit]:
    # tuple.__new__ skips the Python-level namedtuple constructor
    return list(map(tuple.__new__, itertools.repeat(TransmissionUnit), zip(ids, kinds, sizes)))


class _Lazy:
    """``pool[index[j]]`` without materializing the gathered list."""

    def __init__(self, pool: Sequence[Event], index: Sequence[int]):
        self.pool, self.index = pool, index

    def __getitem__(self, j: int) -> Event:
        return self.pool[self.index[j]]


def completion_times(schedule: Schedule, bandwidth: float | None = None
                     ) -> dict[TransmissionUnit, float]:
    """Transmit-completion time of each unit: byte prefix over bandwidth."""
    b = schedule.bandwidth if bandwidth is None else bandwidth
    if not b > 0:
        raise ValueError(f"bandwidth must be positive, got {b}")
    out = {}
    prefix = 0
    for u in schedule.units:
        prefix += u.size
        out[u] = prefix / b
    return out


def alarm_delay(t_tx_json: float, t_parse: float = 0.0) -> float:
    if t_tx_json < 0 or t_parse < 0:
        raise ValueError("delays must be non-negative")
    return t_tx_json + t_parse


@dataclass(frozen=True)
class Violation:
    event_id: str | None
    detail: str = ""


class HierarchyViolation(Violation):
    pass


class NonRedundancyViolation(Violation):
    pass


class BudgetViolation(Violation):
    pass


class OrderViolation(Violation):
    pass


def check_constraints(schedule: Schedule, events: Iterable[Event],
                      budget: int | None = None) -> list[Violation]:
    """All constraint violations of ``schedule``; empty when feasible.

    Visual units of events in ``schedule.prior_json`` satisfy the hierarchy
    through the alert delivered in an earlier interval.
    """
    by_id = {e.id: e for e in events}
    cap = schedule.budget if budget is None else budget
    found: list[Violation] = []
    seen: set[tuple[str, Kind]] = set()
    for u in schedule.units:
        key = (u.event_id, u.kind)
        if key in seen:
            found.append(OrderViolation(u.event_id, f"unit {u.kind.value} appears twice"))
        seen.add(key)
        e = by_id.get(u.event_id)
        if e is None:
            found.append(OrderViolation(u.event_id, "unit for unknown event"))
        elif e.cost(u.kind) != u.size:
            found.append(OrderViolation(
                u.event_id, f"{u.kind.value} size {u.size} != cost {e.cost(u.kind)}"))

    for event_id, kinds in schedule.selections.items():
        has_json = Kind.JSON in kinds or event_id in schedule.prior_json
        for k in VISUAL_KINDS:
            if k in kinds and not has_json:
                found.append(HierarchyViolation(event_id, f"{k.value} without json"))
        if Kind.ROI in kinds and Kind.BOX in kinds:
            found.append(NonRedundancyViolation(event_id, "both roi and box selected"))

    if schedule.used_bytes > cap:
        found.append(BudgetViolation(None, f"used {schedule.used_bytes} > budget {cap}"))
    return found
