"""Comparison policies behind the same per-interval interface as the greedy.

Every policy packs units first-fit in its own order: a unit that does not
fit in the remaining budget is skipped and the next one is tried.  Skipped
events stay pending for the next interval.
"""

from __future__ import annotations

import enum
from typing import Iterable, Sequence

from .scheduler import (
    Event,
    IntervalContext,
    Kind,
    Schedule,
    TransmissionUnit,
    order_by_ratio,
    schedule_interval,
)


class Policy(str, enum.Enum):
    DAT = "dat"
    FIXED_BOX = "fixed-box"
    FIXED_ROI = "fixed-roi"
    FIXED_JSON_BOX = "fixed-json-box"
    BANDWIDTH_ONLY = "bandwidth-only"
    PRIORITY_ONLY = "priority-only"
    JSON_ONLY = "json-only"

    @property
    def carrier(self) -> Kind:
        """Unit kind whose arrival raises the alarm."""
        if self is Policy.FIXED_BOX:
            return Kind.BOX
        if self is Policy.FIXED_ROI:
            return Kind.ROI
        return Kind.JSON

    @property
    def supplements_visuals(self) -> bool:
        """Whether visual units follow the alert as separate transmissions."""
        return self in (Policy.DAT, Policy.FIXED_JSON_BOX,
                        Policy.BANDWIDTH_ONLY, Policy.PRIORITY_ONLY)


def fifo(events: Iterable[Event]) -> list[Event]:
    return sorted(events, key=lambda e: (e.arrival_s, e.id))


def by_priority(events: Iterable[Event]) -> list[Event]:
    return sorted(events, key=lambda e: (-e.priority, e.id))


class _Packer:
    def __init__(self, budget: int):
        self.remaining = budget
        self.units: list[TransmissionUnit] = []

    def offer(self, event: Event, kind: Kind) -> bool:
        c = event.cost(kind)
        if c > self.remaining:
            return False
        self.units.append(TransmissionUnit(event.id, kind, c))
        self.remaining -= c
        return True


def _json_then_visuals(ctx: IntervalContext, json_order: Sequence[Event], visual_sort) -> Schedule:
    packer = _Packer(ctx.budget)
    sent = [e for e in json_order if packer.offer(e, Kind.JSON)]
    for e in visual_sort(sent + list(ctx.visual_pending)):
        packer.offer(e, e.visual_choice()[0])
    return Schedule(packer.units, ctx.bandwidth, ctx.budget,
                    prior_json=frozenset(e.id for e in ctx.visual_pending))


def _fixed_single(ctx: IntervalContext, kind: Kind) -> Schedule:
    packer = _Packer(ctx.budget)
    for e in fifo(ctx.pending):
        packer.offer(e, kind)
    return Schedule(packer.units, ctx.bandwidth, ctx.budget)


def _fixed_json_box(ctx: IntervalContext) -> Schedule:
    # carried boxes drain first, then each new event's json is followed by its box
    packer = _Packer(ctx.budget)
    for e in fifo(ctx.visual_pending):
        packer.offer(e, Kind.BOX)
    for e in fifo(ctx.pending):
        if packer.offer(e, Kind.JSON):
            packer.offer(e, Kind.BOX)
    return Schedule(packer.units, ctx.bandwidth, ctx.budget,
                    prior_json=frozenset(e.id for e in ctx.visual_pending))


def policy_schedule(policy: Policy | str, ctx: IntervalContext, *,
                    json_only_order: str = "phi") -> Schedule:
    """Schedule one interval under ``policy``.

    ``json_only_order`` selects JSON-only's ranking: ``"phi"`` (priority per
    byte, identical to the greedy's first stage) or ``"priority"``.
    """
    policy = Policy(policy)
    if policy is Policy.DAT:
        return schedule_interval(ctx)
    if policy is Policy.FIXED_BOX:
        return _fixed_single(ctx, Kind.BOX)
    if policy is Policy.FIXED_ROI:
        return _fixed_single(ctx, Kind.ROI)
    if policy is Policy.FIXED_JSON_BOX:
        return _fixed_json_box(ctx)
    if policy is Policy.BANDWIDTH_ONLY:
        return _json_then_visuals(ctx, fifo(ctx.pending), fifo)
    if policy is Policy.PRIORITY_ONLY:
        return _json_then_visuals(ctx, by_priority(ctx.pending), by_priority)
    if json_only_order == "phi":
        order = order_by_ratio(ctx.pending, lambda e: e.c_json)
    elif json_only_order == "priority":
        order = by_priority(ctx.pending)
    else:
        raise ValueError(f"unknown json_only_order {json_only_order!r}")
    packer = _Packer(ctx.budget)
    for e in order:
        packer.offer(e, Kind.JSON)
    return Schedule(packer.units, ctx.bandwidth, ctx.budget)
