"""Reward storage for the dueling policies.

``HistoryBuffer`` keeps per-arm rewards with O(1) amortized suffix
means via an incremental prefix-sum array.  Eviction (limited-memory
mode) and window expiry (sliding-window mode) both advance a logical
start pointer, so "stored" always means the suffix that survived;
``total_pulls`` is never affected by eviction.

``MemorySchedule`` is the per-round storage cap m_r of the
limited-memory policy: either ``max(floor, ceil(coeff * ln(r)^2))`` or
``ceil(coeff * ln(r)^2 + floor)``.  Both forms are nondecreasing in r
and never fall below ``max(floor, 1)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = ["HistoryBuffer", "MemorySchedule", "ScheduleForm"]


class HistoryBuffer:
    """Append-only reward sequence with a movable logical start."""

    __slots__ = ("_rewards", "_prefix", "_start")

    def __init__(self) -> None:
        self._rewards: list[float] = []
        self._prefix: list[float] = [0.0]
        self._start = 0

    def append(self, reward: float) -> None:
        self._rewards.append(reward)
        self._prefix.append(self._prefix[-1] + reward)

    def evict_oldest(self) -> None:
        if self._start >= len(self._rewards):
            raise ValueError("cannot evict from an empty buffer")
        self._start += 1

    @property
    def total_pulls(self) -> int:
        return len(self._rewards)

    @property
    def stored_len(self) -> int:
        return len(self._rewards) - self._start

    def stored(self) -> list[float]:
        return self._rewards[self._start :]

    def stored_sum(self) -> float:
        return self._prefix[-1] - self._prefix[self._start]

    def stored_mean(self) -> float:
        n = self.stored_len
        if n == 0:
            raise ValueError("mean of an empty buffer")
        return (self._prefix[-1] - self._prefix[self._start]) / n

    def suffix_mean(self, block: int) -> float:
        """Mean of the last ``block`` stored rewards."""
        if not 1 <= block <= self.stored_len:
            raise ValueError(f"block size {block} outside [1, {self.stored_len}]")
        n = len(self._rewards)
        return (self._prefix[n] - self._prefix[n - block]) / block

    def total_sum(self) -> float:
        return self._prefix[-1]


class ScheduleForm(str, enum.Enum):
    MAX = "max"
    ADDITIVE = "additive"


@dataclass(frozen=True)
class MemorySchedule:
    """Round-indexed storage cap for limited-memory subsampling."""

    form: ScheduleForm
    floor: int
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        if self.floor < 1:
            raise ValueError(f"schedule floor must be >= 1, got {self.floor}")
        if self.coefficient <= 0.0:
            raise ValueError(f"schedule coefficient must be > 0, got {self.coefficient}")

    def capacity(self, round_index: int) -> int:
        if round_index < 1:
            raise ValueError(f"round index must be >= 1, got {round_index}")
        grown = self.coefficient * math.log(round_index) ** 2
        if self.form == ScheduleForm.MAX:
            return max(self.floor, math.ceil(grown))
        return math.ceil(grown + self.floor)
