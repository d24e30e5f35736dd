"""Zone-of-tolerance satisfaction model.

A user's satisfaction with a provided rate is an ordinal level 1..5. Each level
``i`` has an adequate rate ``q_ai``: the least rate that still earns level
``i``. The gap between demanded and provided rate is ``delta``.

All rates are in Mb/s. Functions here are pure and thread safe.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

NUM_LEVELS = 5
MIN_LEVEL = 1
MAX_LEVEL = 5


def check_level(level: int) -> int:
    level = int(level)
    if not MIN_LEVEL <= level <= MAX_LEVEL:
        raise ValueError(f"satisfaction level must be in 1..5, got {level}")
    return level


@dataclass(frozen=True)
class ZoTProfile:
    """Demanded rate plus the five adequate-rate thresholds for one context."""

    qos_demand: float
    adequate: tuple[float, float, float, float, float]

    def __post_init__(self):
        adequate = tuple(float(q) for q in self.adequate)
        if len(adequate) != NUM_LEVELS:
            raise ValueError(f"need {NUM_LEVELS} adequate thresholds, got {len(adequate)}")
        object.__setattr__(self, "adequate", adequate)
        object.__setattr__(self, "qos_demand", float(self.qos_demand))
        if adequate[0] != 0.0:
            raise ValueError("level-1 threshold must be 0")
        if any(b < a for a, b in zip(adequate, adequate[1:])):
            raise ValueError(f"adequate thresholds must be non-decreasing: {adequate}")
        if adequate[-1] > self.qos_demand:
            raise ValueError("q_a5 exceeds demand")
        if self.qos_demand < 0:
            raise ValueError("demand must be non-negative")

    @classmethod
    def project(cls, qos_demand: float, adequate: Sequence[float]) -> "ZoTProfile":
        """Nearest valid profile: sort, clamp to ``[0, demand]``, pin level 1 to 0."""
        demand = max(float(qos_demand), 0.0)
        qs = sorted(min(max(float(q), 0.0), demand) for q in adequate)
        qs[0] = 0.0
        return cls(demand, tuple(qs))


def satisfaction_of(profile: ZoTProfile, qos_p: float) -> int:
    """Largest level whose adequate rate is reached by ``qos_p``."""
    if qos_p < 0:
        raise ValueError("provided QoS must be non-negative")
    q = profile.adequate
    for level in range(MAX_LEVEL, MIN_LEVEL, -1):
        if qos_p >= q[level - 1]:
            return level
    return MIN_LEVEL


def zot_bounds(profile: ZoTProfile, level: int) -> tuple[float, float]:
    """Rate interval earning exactly ``level``.

    Half-open ``[q_ai, q_a(i+1))`` below the top level; closed
    ``[q_a5, demand]`` for level 5.
    """
    level = check_level(level)
    lo = profile.adequate[level - 1]
    hi = profile.qos_demand if level == MAX_LEVEL else profile.adequate[level]
    return lo, hi


def delta_of(profile: ZoTProfile, qos_p: float) -> float:
    """Gap between demand and provision, clamped at zero."""
    if qos_p < 0:
        raise ValueError("provided QoS must be non-negative")
    return max(profile.qos_demand - qos_p, 0.0)


def min_qos_for(profile: ZoTProfile, target: int) -> float:
    return profile.adequate[check_level(target) - 1]
