"""Exact solver for the single-interval lexicographic upload problem.

Primary objective: priority-weighted alert delay, summed over events.  An
event whose JSON is not selected is charged the earliest completion it
could get next interval, ``delta + c_json / B``.  Secondary objective
(maximized): total priority of events whose visual unit completes within
the visual deadline.

Two exhaustive methods are provided.  ``method="dp"`` runs a dynamic
program over sets of already-transmitted units; it is exact because a
unit's completion time depends only on the set of units sent before it.
``method="brute"`` literally enumerates every feasible selection and
every permutation of it, and is meant for cross-checking on tiny inputs.
All arithmetic is on integers scaled to a common denominator.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .priority import PriorityOutput, clamp_to_band, priority_of
from .scheduler import (
    KIND_ORDER,
    Event,
    Kind,
    Schedule,
    TransmissionUnit,
    check_constraints,
    exact,
    interval_budget,
    json_load,
)

N_MAX = 4
_KINDS = (Kind.JSON, Kind.ROI, Kind.BOX)


class InstanceTooLarge(ValueError):
    pass


@dataclass
class OracleSolution:
    order: list[TransmissionUnit]
    primary: Fraction
    secondary: Fraction
    enumeration_count: int
    bandwidth: float
    delta: float
    d_vis: float
    budget: int

    @property
    def selections(self) -> dict[str, set[Kind]]:
        out: dict[str, set[Kind]] = {}
        for u in self.order:
            out.setdefault(u.event_id, set()).add(u.kind)
        return out


@dataclass(frozen=True)
class GapReport:
    primary_gap: Fraction
    secondary_gap: Fraction
    feasible: bool
    greedy_primary: Fraction
    exact_primary: Fraction
    greedy_secondary: Fraction
    exact_secondary: Fraction

    @property
    def exact_match(self) -> bool:
        return self.primary_gap == 0


class _Scaled:
    """Integer encoding of one instance.

    Primary values are stored as ``primary * B * q * D`` where ``D`` clears
    the priorities' denominators and ``q`` clears ``delta * B``.
    """

    def __init__(self, events: Sequence[Event], bandwidth, delta, d_vis):
        self.b = exact(bandwidth)
        self.delta = exact(delta)
        fr = [Fraction(e.priority) for e in events]
        self.d = math.lcm(*(f.denominator for f in fr)) if fr else 1
        self.weights = [int(f * self.d) for f in fr]
        carry = self.delta * self.b
        self.q = carry.denominator
        self.carry = carry.numerator
        self.budget = interval_budget(bandwidth, delta)
        self.limit = math.floor(exact(d_vis) * self.b)

    def penalty(self, i: int, c_json: int) -> int:
        return self.weights[i] * (self.carry + self.q * c_json)

    def served(self, i: int, prefix: int) -> int:
        return self.weights[i] * self.q * prefix

    def primary(self, value: int) -> Fraction:
        return Fraction(value) / (self.b * self.q * self.d)

    def secondary(self, value: int) -> Fraction:
        return Fraction(value, self.d)


def evaluate(units: Sequence[TransmissionUnit], events: Sequence[Event],
             bandwidth, delta, d_vis) -> tuple[Fraction, Fraction]:
    """(primary, secondary) of a unit sequence, computed directly."""
    b, dl, dv = exact(bandwidth), exact(delta), exact(d_vis)
    done: dict[tuple[str, Kind], Fraction] = {}
    prefix = 0
    for u in units:
        prefix += u.size
        done[(u.event_id, u.kind)] = Fraction(prefix) / b
    primary = Fraction(0)
    secondary = Fraction(0)
    for e in events:
        s = Fraction(e.priority)
        t = done.get((e.id, Kind.JSON))
        primary += s * (t if t is not None else dl + Fraction(e.c_json) / b)
        if any(done.get((e.id, k), dv + 1) <= dv for k in (Kind.ROI, Kind.BOX)):
            secondary += s
    return primary, secondary


def exact_lexicographic(events: Sequence[Event], bandwidth: float, delta: float,
                        d_vis: float, *, n_max: int = N_MAX, visuals: bool = True,
                        json_first: bool = False, method: str = "dp") -> OracleSolution:
    """Lexicographically optimal selection and order for one interval.

    Ties on both objectives go to the lexicographically smallest order over
    (event id, kind).  ``json_first`` restricts the search to orders that
    send every JSON unit before any visual unit.
    """
    if len(events) > n_max:
        raise InstanceTooLarge(f"{len(events)} events exceeds the exact-solver limit of {n_max}")
    evs = sorted(events, key=lambda e: e.id)
    sc = _Scaled(evs, bandwidth, delta, d_vis)
    kinds = _KINDS if visuals else (Kind.JSON,)
    solve = {"dp": _solve_dp, "brute": _solve_brute}[method]
    best, count = solve(evs, sc, kinds, json_first)
    primary, neg_secondary, order = best
    return OracleSolution(
        order=[TransmissionUnit(evs[i].id, k, evs[i].cost(k)) for i, k in order],
        primary=sc.primary(primary),
        secondary=sc.secondary(-neg_secondary),
        enumeration_count=count,
        bandwidth=bandwidth, delta=delta, d_vis=d_vis, budget=sc.budget,
    )


def _unit_gain(sc: _Scaled, i: int, kind: Kind, prefix: int) -> tuple[int, int]:
    if kind is Kind.JSON:
        return sc.served(i, prefix), 0
    return 0, (sc.weights[i] if prefix <= sc.limit else 0)


def _solve_dp(evs, sc, kinds, json_first):
    units = [(i, k, e.cost(k)) for i, e in enumerate(evs) for k in kinds]
    n_units = len(units)
    # state: mask -> (primary, -secondary, order); the mask fixes the byte prefix
    layer = {0: (0, 0, ())}
    sizes = {0: 0}
    finals = dict(layer)
    count = 0
    for _ in range(n_units):
        nxt: dict[int, tuple] = {}
        for mask, (p, ns, order) in layer.items():
            size = sizes[mask]
            has_visual = any(mask >> j & 1 and units[j][1] is not Kind.JSON for j in range(n_units))
            for j, (i, k, c) in enumerate(units):
                if mask >> j & 1 or size + c > sc.budget:
                    continue
                if k is not Kind.JSON:
                    twin = j + 1 if k is Kind.ROI else j - 1
                    if mask >> twin & 1:
                        continue
                elif json_first and has_visual:
                    continue
                count += 1
                dp, ds = _unit_gain(sc, i, k, size + c)
                cand = (p + dp, ns - ds, order + ((i, k),))
                m2 = mask | 1 << j
                if m2 not in nxt or _key(cand) < _key(nxt[m2]):
                    nxt[m2] = cand
                    sizes[m2] = size + c
        finals.update(nxt)
        layer = nxt
        if not layer:
            break

    best = None
    for mask, (p, ns, order) in finals.items():
        chosen = {(i, k) for i, k in order}
        if any((i, Kind.JSON) not in chosen for i, k in chosen if k is not Kind.JSON):
            continue
        total = p + sum(sc.penalty(i, e.c_json) for i, e in enumerate(evs)
                        if (i, Kind.JSON) not in chosen)
        cand = (total, ns, order)
        if best is None or _key(cand) < _key(best):
            best = cand
    return best, count


def _key(state):
    p, ns, order = state
    return p, ns, tuple((i, KIND_ORDER[k]) for i, k in order)


def _solve_brute(evs, sc, kinds, json_first):
    options = [()] + [(Kind.JSON,)]
    if Kind.ROI in kinds:
        options += [(Kind.JSON, Kind.ROI), (Kind.JSON, Kind.BOX)]
    best = None
    count = 0
    for pick in itertools.product(options, repeat=len(evs)):
        chosen = [(i, k) for i, ks in enumerate(pick) for k in ks]
        if sum(evs[i].cost(k) for i, k in chosen) > sc.budget:
            continue
        base = sum(sc.penalty(i, evs[i].c_json) for i, ks in enumerate(pick) if not ks)
        for perm in itertools.permutations(chosen):
            if json_first and _visual_before_json(perm):
                continue
            count += 1
            p, s, prefix = base, 0, 0
            for i, k in perm:
                prefix += evs[i].cost(k)
                dp, ds = _unit_gain(sc, i, k, prefix)
                p += dp
                s += ds
            cand = (p, -s, perm)
            if best is None or _key(cand) < _key(best):
                best = cand
    return best, count


def _visual_before_json(perm) -> bool:
    seen_visual = False
    for _, k in perm:
        if k is Kind.JSON and seen_visual:
            return True
        seen_visual |= k is not Kind.JSON
    return False


def compare(greedy: Schedule, exact_solution: OracleSolution,
            events: Sequence[Event]) -> GapReport:
    """Optimality gap of a greedy schedule against the exact optimum."""
    if check_constraints(greedy, events, exact_solution.budget):
        raise RuntimeError("greedy schedule violates the interval constraints")
    gp, gs = evaluate(greedy.units, events, exact_solution.bandwidth,
                      exact_solution.delta, exact_solution.d_vis)
    return GapReport(
        primary_gap=gp - exact_solution.primary,
        secondary_gap=exact_solution.secondary - gs,
        feasible=True,
        greedy_primary=gp, exact_primary=exact_solution.primary,
        greedy_secondary=gs, exact_secondary=exact_solution.secondary,
    )


@dataclass
class Instance:
    events: list[Event]
    bandwidth: int
    delta: float = 1.0
    d_vis: float = 1.5
    visuals: bool = True


def random_instance(rng: random.Random, n: int, *, visuals: bool = True,
                    ample_budget: bool = False, gamma: float = 0.5,
                    beta: float = 0.5) -> Instance:
    """Small random instance with contended budgets.

    With ``ample_budget`` the interval budget covers every JSON unit.
    """
    events = []
    for j in range(n):
        level = rng.randint(0, 1)
        p = clamp_to_band(PriorityOutput(level, rng.random()), gamma)
        events.append(Event(
            id=f"e{j}", arrival_s=0.0, priority=priority_of(p, beta),
            c_json=rng.randint(1_000, 20_000),
            c_roi=rng.randint(5_000, 60_000),
            c_box=rng.randint(5_000, 80_000),
            level=p.level, score=p.score,
        ))
    load = json_load(events)
    if ample_budget:
        bandwidth = load + rng.randint(0, 40_000)
    else:
        bandwidth = rng.randint(max(1, load // 3), load + 120_000)
    d_vis = rng.choice([0.25, 0.5, 1.0, 1.5])
    return Instance(events, bandwidth, 1.0, d_vis, visuals)
