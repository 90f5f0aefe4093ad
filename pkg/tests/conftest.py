import pytest

from dualtx.scheduler import Event


def make_event(eid, priority, c_json, c_roi=50_000, c_box=80_000, arrival=0.0):
    return Event(eid, arrival, priority, c_json, c_roi, c_box)


@pytest.fixture
def three_events():
    """The three-event instance used throughout the scheduler examples."""
    return [
        make_event("e1", 0.9, 10_000, 50_000, 80_000),
        make_event("e2", 0.5, 20_000, 40_000, 60_000),
        make_event("e3", 0.2, 5_000, 100_000, 90_000),
    ]
