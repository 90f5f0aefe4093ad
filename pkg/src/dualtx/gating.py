"""Edge-side gating over detector output.

Frames are scored by their most confident detection.  A frame passes the
gate when that score reaches ``tau_g``; passing frames are then routed
either to the large model or, above ``tau_high``, accepted directly with
the detector's class as the event level.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

DEFAULT_TAU_LOW = 0.25
DEFAULT_TAU_HIGH = 0.8
DEFAULT_SEVERITY_ORDER = ("moderate", "severe")


class Route(str, enum.Enum):
    DISCARD = "discard"
    TO_MLLM = "to_mllm"
    DIRECT_ACCEPT = "direct_accept"


@dataclass(frozen=True)
class Detection:
    bbox: tuple[float, float, float, float]
    class_label: str
    confidence: float
    size_bytes: int = 0

    def __post_init__(self):
        x1, y1, x2, y2 = self.bbox
        if not (0.0 <= x1 < x2 <= 1.0 and 0.0 <= y1 < y2 <= 1.0):
            raise ValueError(f"malformed normalized bbox {self.bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.size_bytes < 0:
            raise ValueError(f"negative size_bytes {self.size_bytes}")


@dataclass(frozen=True)
class FrameDetections:
    frame_id: str
    timestamp_s: float
    detections: tuple[Detection, ...] = ()


@dataclass(frozen=True)
class GateDecision:
    trigger_score: float
    gate: bool
    route: Route
    valid_set: tuple[Detection, ...] = field(default=())


def trigger_score(frame: FrameDetections) -> float:
    """Maximum detection confidence in the frame, 0.0 when it is empty."""
    return max((d.confidence for d in frame.detections), default=0.0)


def route(score: float, tau_low: float = DEFAULT_TAU_LOW,
          tau_high: float = DEFAULT_TAU_HIGH) -> Route:
    if tau_low > tau_high:
        raise ValueError(f"tau_low ({tau_low}) exceeds tau_high ({tau_high})")
    if score < tau_low:
        return Route.DISCARD
    if score < tau_high:
        return Route.TO_MLLM
    return Route.DIRECT_ACCEPT


def gate(frame: FrameDetections, tau_g: float = DEFAULT_TAU_LOW,
         tau_high: float = DEFAULT_TAU_HIGH) -> GateDecision:
    """Threshold a frame at ``tau_g`` (inclusive) and route it.

    ``tau_g`` doubles as the lower routing threshold, so a discarded frame
    never has an open gate.
    """
    if not 0.0 <= tau_g <= 1.0:
        raise ValueError(f"tau_g {tau_g} outside [0, 1]")
    s = trigger_score(frame)
    valid = tuple(d for d in frame.detections if d.confidence >= tau_g)
    return GateDecision(trigger_score=s, gate=s >= tau_g,
                        route=route(s, tau_g, tau_high), valid_set=valid)


def select_representative_roi(valid_set: Sequence[Detection],
                              severity_order: Sequence[str] = DEFAULT_SEVERITY_ORDER
                              ) -> Detection:
    """Pick the most severe detection, preferring the smallest crop.

    ``severity_order`` lists class labels from least to most severe; labels
    not in it rank below all listed ones.  Remaining ties keep list order.
    """
    if not valid_set:
        raise ValueError("cannot select a representative ROI from an empty set")
    rank = {label: i for i, label in enumerate(severity_order)}
    # min() returns the first of equal keys, which gives the list-order tie-break
    return min(valid_set, key=lambda d: (-rank.get(d.class_label, -1), d.size_bytes))


def level_from_class(class_label: str,
                     severity_order: Sequence[str] = DEFAULT_SEVERITY_ORDER) -> int:
    """Event level implied by a detector class on the direct-accept path."""
    try:
        return list(severity_order).index(class_label)
    except ValueError:
        return 0
