"""Semantic priority from a (level, score) priority output.

The level is normalized to [0, 1] before mixing so that the resulting
priority is on the same scale regardless of how many levels are in use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_BETA = 0.5
DEFAULT_GAMMA = 0.5


@dataclass(frozen=True)
class PriorityOutput:
    level: int
    score: float
    num_levels: int = 2

    def __post_init__(self):
        if self.num_levels < 2:
            raise ValueError(f"num_levels must be >= 2, got {self.num_levels}")
        if not 0 <= self.level < self.num_levels:
            raise ValueError(
                f"level {self.level} outside 0..{self.num_levels - 1}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


def score_band(level: int, num_levels: int, gamma: float) -> tuple[float, float, bool]:
    """Return ``(low, high, high_inclusive)`` for the score band of ``level``.

    Two levels split at ``gamma``; more levels use a uniform partition.
    Only the top band includes its upper edge.
    """
    if num_levels == 2:
        return (0.0, gamma, False) if level == 0 else (gamma, 1.0, True)
    low = level / num_levels
    high = (level + 1) / num_levels
    return low, high, level == num_levels - 1


def validate_priority(p: PriorityOutput, gamma: float = DEFAULT_GAMMA) -> bool:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    low, high, inclusive = score_band(p.level, p.num_levels, gamma)
    if inclusive:
        return low <= p.score <= high
    return low <= p.score < high


def clamp_to_band(p: PriorityOutput, gamma: float = DEFAULT_GAMMA) -> PriorityOutput:
    """Move ``p.score`` to the nearest value inside its level's band."""
    if validate_priority(p, gamma):
        return p
    low, high, inclusive = score_band(p.level, p.num_levels, gamma)
    if p.score < low:
        score = low
    else:
        score = high if inclusive else math.nextafter(high, -math.inf)
    return PriorityOutput(p.level, score, p.num_levels)


def normalize_level(level: int, num_levels: int) -> float:
    if num_levels < 2:
        raise ValueError(f"num_levels must be >= 2, got {num_levels}")
    if not 0 <= level <= num_levels - 1:
        raise ValueError(f"level {level} outside 0..{num_levels - 1}")
    return level / (num_levels - 1)


def semantic_priority(level_norm: float, score: float, beta: float = DEFAULT_BETA) -> float:
    """Convex mix ``beta * level_norm + (1 - beta) * score``."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not 0.0 <= level_norm <= 1.0:
        raise ValueError(f"level_norm {level_norm} outside [0, 1]")
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score {score} outside [0, 1]")
    return beta * level_norm + (1.0 - beta) * score


def priority_of(p: PriorityOutput, beta: float = DEFAULT_BETA) -> float:
    return semantic_priority(normalize_level(p.level, p.num_levels), p.score, beta)
