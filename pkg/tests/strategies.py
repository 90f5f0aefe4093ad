"""Hypothesis strategies shared by the scheduling tests."""

from hypothesis import strategies as st

from dualtx.scheduler import Event, IntervalContext

priorities = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def events(draw, min_size=0, max_size=12, max_cost=60_000):
    n = draw(st.integers(min_size, max_size))
    out = []
    for i in range(n):
        out.append(Event(
            id=f"e{i:02d}", arrival_s=0.0, priority=draw(priorities),
            c_json=draw(st.integers(1, max_cost // 4)),
            c_roi=draw(st.integers(1, max_cost)),
            c_box=draw(st.integers(1, max_cost)),
        ))
    return out


@st.composite
def contexts(draw, max_size=12):
    pending = draw(events(max_size=max_size))
    carried = [Event(f"v{i:02d}", 0.0, e.priority, e.c_json, e.c_roi, e.c_box)
               for i, e in enumerate(draw(events(max_size=3)))]
    return IntervalContext(
        bandwidth=draw(st.integers(1, 200_000)),
        delta=draw(st.sampled_from([0.1, 0.25, 0.5, 1.0])),
        d_vis=draw(st.sampled_from([0.05, 0.3, 0.5, 1.0, 1.5])),
        pending=pending, visual_pending=carried)


@st.composite
def tied_events(draw, max_size=20):
    """Events drawn from a few priorities and costs, so ratio ties are common."""
    n = draw(st.integers(0, max_size))
    prio = st.sampled_from([0.0, 0.1, 0.2, 0.25, 0.5, 0.75, 1.0, 1 / 3])
    cost = st.sampled_from([1, 2, 3, 4, 6, 8, 10**16 + 1, 10**16 + 2])
    return [Event(f"t{i:02d}", 0.0, draw(prio), draw(cost), draw(cost), draw(cost))
            for i in range(n)]
