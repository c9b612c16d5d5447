"""Last-block subsampling dueling policies.

Three round-based policies share one driving protocol:

* ``select()`` returns the pull set for the upcoming round, in
  ascending arm order;
* ``update(arm, reward)`` feeds one observed reward per pulled arm,
  in that order;
* ``finish_round()`` recomputes the leader from the post-pull state
  and advances the round counter.

``LbSda`` duels every challenger against the leader's most recent
block of equal size; a challenger is also pulled whenever its pull
count is at most sqrt(ln r).  With a ``MemorySchedule`` the same
policy runs in limited-memory mode: each arm stores at most m_r
rewards, oldest evicted first, and duels compare stored suffixes.

``SwLbSda`` restricts everything to a sliding window of the last
``window`` rounds and replaces the most-pulled leader rule with a
takeover rule that blocks leadership changes caused purely by window
expiry.  Rarely-firing diversity flags force a pull of an arm that a
long-unchanged, unpulled leader has starved.

Policies are single-threaded, owned by one replication worker, and
draw all randomness from the injected generator (leader tie-breaks
only).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .history import HistoryBuffer, MemorySchedule

__all__ = [
    "RoundRecord",
    "Trajectory",
    "lbsda_leader",
    "sliding_window_leader",
    "diversity_flags",
    "LbSda",
    "SwLbSda",
]


@dataclass(frozen=True)
class RoundRecord:
    """Audit snapshot taken at the end of one complete round.

    ``leader`` and all counts reflect the state after this round's
    pulls; for the sliding-window policy ``windowed_counts`` is taken
    before end-of-round expiry, so it covers exactly the last
    ``window`` rounds including this one.
    """

    round_index: int
    pulled: tuple[int, ...]
    leader: int
    counts: tuple[int, ...]
    windowed_counts: Optional[tuple[int, ...]] = None
    stored_lengths: Optional[tuple[int, ...]] = None
    capacity: Optional[int] = None


@dataclass
class Trajectory:
    """Per-round log of one policy run, consumed by the checkers."""

    algorithm: str
    num_arms: int
    window: Optional[int] = None
    rounds: list[RoundRecord] = field(default_factory=list)


def lbsda_leader(
    counts: Sequence[int], sums: Sequence[float], rng: np.random.Generator
) -> int:
    """Most-pulled arm; ties broken by reward sum, then uniformly."""
    if len(counts) == 0:
        raise ValueError("leader of an empty arm set")
    best = max(counts)
    tied = [k for k, n in enumerate(counts) if n == best]
    if len(tied) > 1:
        best_sum = max(sums[k] for k in tied)
        tied = [k for k in tied if sums[k] == best_sum]
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def sliding_window_leader(
    windowed_counts: Sequence[int],
    windowed_sums: Sequence[float],
    pulled_now: Sequence[int],
    incumbent: Optional[int],
    completed_rounds: int,
    window: int,
    rng: np.random.Generator,
) -> int:
    """Leader for the next round under the takeover rule.

    If the incumbent's windowed count fell below min(r, window)/(2K)
    the argmax runs over all arms; otherwise only arms pulled this
    round with at least min(r, window)/K windowed samples may displace
    the incumbent.  Ties: larger windowed sum, then the incumbent,
    then uniform.
    """
    num_arms = len(windowed_counts)
    horizon_like = min(completed_rounds, window)
    if incumbent is None or windowed_counts[incumbent] < horizon_like / (2 * num_arms):
        candidates = list(range(num_arms))
    else:
        takeover_floor = horizon_like / num_arms
        candidates = [k for k in pulled_now if windowed_counts[k] >= takeover_floor]
        if incumbent not in candidates:
            candidates.append(incumbent)
    best = max(windowed_counts[k] for k in candidates)
    tied = [k for k in candidates if windowed_counts[k] == best]
    if len(tied) > 1:
        best_sum = max(windowed_sums[k] for k in tied)
        tied = [k for k in tied if windowed_sums[k] == best_sum]
    if len(tied) == 1:
        return tied[0]
    if incumbent in tied:
        return incumbent
    return sorted(tied)[int(rng.integers(len(tied)))]


def diversity_flags(
    num_arms: int,
    window: int,
    round_index: int,
    leader: int,
    leader_streak_start: int,
    last_pulled: Sequence[int],
    windowed_counts: Sequence[int],
) -> list[bool]:
    """Flags forcing a pull of arms starved by a frozen, unpulled leader.

    The flag of arm k is raised only when, over the last
    ceil((K-1) * ln(window)^2) complete rounds, the same leader held
    every round without being pulled, and k itself was never pulled
    and holds at most ln(window)^2 windowed samples.
    """
    flags = [False] * num_arms
    span = math.ceil((num_arms - 1) * math.log(window) ** 2)
    oldest = round_index - span
    if oldest < 1:
        return flags
    if leader_streak_start > oldest or last_pulled[leader] >= oldest:
        return flags
    cap = math.log(window) ** 2
    for k in range(num_arms):
        if k == leader:
            continue
        flags[k] = last_pulled[k] < oldest and windowed_counts[k] <= cap
    return flags


class LbSda:
    """Last-block subsampling duels, optionally memory-limited."""

    def __init__(
        self,
        num_arms: int,
        rng: np.random.Generator,
        schedule: Optional[MemorySchedule] = None,
        record: bool = False,
    ) -> None:
        if num_arms < 2:
            raise ValueError(f"num_arms must be >= 2, got {num_arms}")
        self.num_arms = num_arms
        self.schedule = schedule
        self._rng = rng
        self._hist = [HistoryBuffer() for _ in range(num_arms)]
        self._counts = [0] * num_arms
        self._sums = [0.0] * num_arms
        self._round = 1
        self._leader: Optional[int] = None
        self._pulled: list[int] = []
        self.storage_high_water = [0] * num_arms
        self.trajectory = (
            Trajectory("lbsda-lm" if schedule else "lbsda", num_arms)
            if record
            else None
        )

    @property
    def algorithm(self) -> str:
        return "lbsda-lm" if self.schedule else "lbsda"

    @property
    def round_index(self) -> int:
        return self._round

    @property
    def leader(self) -> Optional[int]:
        return self._leader

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(self._counts)

    def stored_lengths(self) -> tuple[int, ...]:
        return tuple(h.stored_len for h in self._hist)

    def select(self) -> tuple[int, ...]:
        self._pulled = []
        if self._round == 1:
            return tuple(range(self.num_arms))
        leader = self._leader
        assert leader is not None
        limit = math.sqrt(math.log(self._round))
        leader_hist = self._hist[leader]
        leader_count = self._counts[leader]
        chosen = []
        for k in range(self.num_arms):
            if k == leader:
                continue
            hist = self._hist[k]
            if self._counts[k] <= limit:
                chosen.append(k)
                continue
            block = min(hist.stored_len, leader_hist.stored_len)
            mean = hist.stored_mean()
            block_mean = leader_hist.suffix_mean(block)
            # a challenger already tied in pull count must win strictly:
            # leadership may only change hands at equal counts, which the
            # leader-count identity (duels won by leaders == leader pulls)
            # depends on
            if mean > block_mean or (
                mean == block_mean and self._counts[k] < leader_count
            ):
                chosen.append(k)
        if not chosen:
            return (leader,)
        return tuple(chosen)

    def update(self, arm: int, reward: float) -> None:
        hist = self._hist[arm]
        if self.schedule is not None:
            cap = self.schedule.capacity(self._round)
            if hist.stored_len >= cap:
                hist.evict_oldest()
        hist.append(reward)
        self._counts[arm] += 1
        self._sums[arm] += reward
        if hist.stored_len > self.storage_high_water[arm]:
            self.storage_high_water[arm] = hist.stored_len
        self._pulled.append(arm)

    def finish_round(self) -> None:
        self._leader = lbsda_leader(self._counts, self._sums, self._rng)
        if self.trajectory is not None:
            self.trajectory.rounds.append(
                RoundRecord(
                    round_index=self._round,
                    pulled=tuple(self._pulled),
                    leader=self._leader,
                    counts=tuple(self._counts),
                    stored_lengths=self.stored_lengths() if self.schedule else None,
                    capacity=(
                        self.schedule.capacity(self._round) if self.schedule else None
                    ),
                )
            )
        self._round += 1


class SwLbSda:
    """Sliding-window last-block subsampling duels."""

    algorithm = "sw-lbsda"

    def __init__(
        self,
        num_arms: int,
        window: int,
        rng: np.random.Generator,
        record: bool = False,
    ) -> None:
        if num_arms < 2:
            raise ValueError(f"num_arms must be >= 2, got {num_arms}")
        if window < num_arms:
            raise ValueError(f"window {window} must be >= num_arms {num_arms}")
        self.num_arms = num_arms
        self.window = window
        self._rng = rng
        self._hist = [HistoryBuffer() for _ in range(num_arms)]
        self._counts = [0] * num_arms
        self._round = 1
        self._leader: Optional[int] = None
        self._leader_streak_start = 0
        self._last_pulled = [0] * num_arms
        self._round_sets: list[tuple[int, ...]] = []
        self._pulled: list[int] = []
        self._explore_limit = math.sqrt(math.log(window))
        self.storage_high_water = [0] * num_arms
        self.trajectory = (
            Trajectory("sw-lbsda", num_arms, window=window) if record else None
        )

    @property
    def round_index(self) -> int:
        return self._round

    @property
    def leader(self) -> Optional[int]:
        return self._leader

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(self._counts)

    def windowed_counts(self) -> tuple[int, ...]:
        return tuple(h.stored_len for h in self._hist)

    def select(self) -> tuple[int, ...]:
        self._pulled = []
        if self._round == 1:
            return tuple(range(self.num_arms))
        leader = self._leader
        assert leader is not None
        flags = diversity_flags(
            self.num_arms,
            self.window,
            self._round,
            leader,
            self._leader_streak_start,
            self._last_pulled,
            [h.stored_len for h in self._hist],
        )
        leader_hist = self._hist[leader]
        leader_avail = leader_hist.stored_len
        chosen = []
        for k in range(self.num_arms):
            if k == leader:
                continue
            hist = self._hist[k]
            avail = hist.stored_len
            if avail <= self._explore_limit or flags[k]:
                chosen.append(k)
                continue
            block = min(avail, leader_avail)
            # a leader with no in-window data cannot defend its spot
            if block == 0 or hist.stored_mean() >= leader_hist.suffix_mean(block):
                chosen.append(k)
        if not chosen:
            return (leader,)
        return tuple(chosen)

    def update(self, arm: int, reward: float) -> None:
        hist = self._hist[arm]
        hist.append(reward)
        self._counts[arm] += 1
        self._last_pulled[arm] = self._round
        if hist.stored_len > self.storage_high_water[arm]:
            self.storage_high_water[arm] = hist.stored_len
        self._pulled.append(arm)

    def finish_round(self) -> None:
        windowed = [h.stored_len for h in self._hist]
        new_leader = sliding_window_leader(
            windowed,
            [h.stored_sum() for h in self._hist],
            self._pulled,
            self._leader,
            self._round,
            self.window,
            self._rng,
        )
        if new_leader != self._leader:
            self._leader_streak_start = self._round
        self._leader = new_leader
        if self.trajectory is not None:
            self.trajectory.rounds.append(
                RoundRecord(
                    round_index=self._round,
                    pulled=tuple(self._pulled),
                    leader=new_leader,
                    counts=tuple(self._counts),
                    windowed_counts=tuple(windowed),
                )
            )
        self._round_sets.append(tuple(self._pulled))
        expiring = self._round - self.window + 1
        if expiring >= 1:
            for k in self._round_sets[expiring - 1]:
                self._hist[k].evict_oldest()
        self._round += 1
