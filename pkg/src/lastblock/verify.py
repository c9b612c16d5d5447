"""Independent oracles and trajectory checkers.

The balance function of a pair of arms is the expected value, under
one size-j block drawn from the better arm, of the probability that
all of M independent size-j blocks from the worse arm beat it:
``E[(1 - F_worse,j(X))^M]`` with X distributed as a size-j sum from
the better arm.  For Bernoulli arms the block sums are binomial and
the expectation is a finite sum, giving an exact oracle; every family
also gets a Monte Carlo estimator with a reported standard error.  The
classical upper bound ``F_best,j(u) + (1 - F_worse,j(u))^M`` must hold
for every u, which is checked exactly on grids.

Trajectory checkers validate, on logs produced by the shipped
policies, the leader-count identity of the unwindowed dueling policy
(duels won by leaders equals the leader's pull count, at least r/K)
and the windowed leader's occupancy bound min(r, window)/(2K), plus
the stored-length cap of the limited-memory variant.  All checks use
integer arithmetic where possible; any violation is a defect.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import stats

from .envs import ArmModel, Family, kl_divergence
from .sda import Trajectory

__all__ = [
    "BalanceQuery",
    "CheckReport",
    "balance_exact_bernoulli",
    "balance_monte_carlo",
    "check_balance_upper_bound",
    "balance_bound_grid_report",
    "random_bernoulli_query",
    "check_lemma_wt",
    "check_sw_leader_bound",
    "check_lm_storage",
    "export_trajectory",
]

BOUND_SLACK = 1e-12
MAX_EXACT_BLOCK = 60


@dataclass(frozen=True)
class BalanceQuery:
    """One balance-function evaluation: two arms, block size, duel count."""

    optimal: ArmModel
    suboptimal: ArmModel
    block_size: int
    duel_count: int

    def __post_init__(self) -> None:
        if self.optimal.family != self.suboptimal.family:
            raise ValueError("balance query requires same-family arms")
        if not self.optimal.mean > self.suboptimal.mean:
            raise ValueError(
                f"optimal mean {self.optimal.mean} must exceed "
                f"suboptimal mean {self.suboptimal.mean}"
            )
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.duel_count < 0:
            raise ValueError(f"duel_count must be >= 0, got {self.duel_count}")


def balance_exact_bernoulli(query: BalanceQuery) -> float:
    """Exact balance value via binomial enumeration (Bernoulli only)."""
    if query.optimal.family != Family.BERNOULLI:
        raise ValueError("exact balance evaluation supports Bernoulli arms only")
    j = query.block_size
    if j > MAX_EXACT_BLOCK:
        raise ValueError(f"block_size {j} exceeds enumeration limit {MAX_EXACT_BLOCK}")
    support = np.arange(j + 1)
    weights = stats.binom.pmf(support, j, query.optimal.mean)
    survival = 1.0 - stats.binom.cdf(support, j, query.suboptimal.mean)
    return float(np.sum(weights * survival**query.duel_count))


def _sum_draws(model: ArmModel, j: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draws from the distribution of a sum of j rewards."""
    if model.family == Family.BERNOULLI:
        return rng.binomial(j, model.mean, size=size).astype(np.float64)
    if model.family == Family.GAUSSIAN:
        return rng.normal(j * model.mean, model.scale * math.sqrt(j), size=size)
    if model.family == Family.POISSON:
        return rng.poisson(j * model.mean, size=size).astype(np.float64)
    return rng.gamma(j, model.mean, size=size)


def balance_monte_carlo(
    query: BalanceQuery,
    samples: int,
    rng: np.random.Generator,
    cdf_budget: int = 200_000,
) -> tuple[float, float]:
    """Monte Carlo balance estimate and its standard error.

    The block-sum CDF of the suboptimal arm is exact for Bernoulli
    (binomial) and Gaussian (normal); Poisson and Exponential use an
    empirical CDF built from ``cdf_budget`` extra draws.
    """
    if samples < 1000:
        raise ValueError(f"samples must be >= 1000, got {samples}")
    j, M = query.block_size, query.duel_count
    worse = query.suboptimal
    if M == 0:
        return 1.0, 0.0

    if worse.family == Family.BERNOULLI:
        # small integer support: exact tail per value, then tabulate
        draws = rng.binomial(j, query.optimal.mean, size=samples)
        table = (1.0 - stats.binom.cdf(np.arange(j + 1), j, worse.mean)) ** M
        counts = np.bincount(draws, minlength=j + 1).astype(np.float64)
        mean = float(counts @ table / samples)
        second = float(counts @ table**2 / samples)
        var = max(second - mean**2, 0.0) * samples / (samples - 1)
        return mean, math.sqrt(var / samples)

    draws = _sum_draws(query.optimal, j, samples, rng)
    if worse.family == Family.GAUSSIAN:
        tail = stats.norm.sf(
            draws, loc=j * worse.mean, scale=worse.scale * math.sqrt(j)
        )
    else:
        reference = np.sort(_sum_draws(worse, j, cdf_budget, rng))
        tail = 1.0 - np.searchsorted(reference, draws, side="right") / cdf_budget
    values = tail**M
    mean = float(values.mean())
    std_error = float(values.std(ddof=1) / math.sqrt(samples))
    return mean, std_error


def check_balance_upper_bound(query: BalanceQuery, u: float) -> bool:
    """Exact Bernoulli balance against its threshold bound at ``u``."""
    j, M = query.block_size, query.duel_count
    exact = balance_exact_bernoulli(query)
    bound = float(
        stats.binom.cdf(u, j, query.optimal.mean)
        + (1.0 - stats.binom.cdf(u, j, query.suboptimal.mean)) ** M
    )
    return exact <= bound + BOUND_SLACK


def heuristic_threshold(query: BalanceQuery) -> float:
    """Trade-off threshold (j*kl + ln M)/M, mapped onto the block support."""
    gap_info = kl_divergence(query.suboptimal, query.optimal)
    M = max(query.duel_count, 1)
    raw = (query.block_size * gap_info + math.log(M)) / M
    return min(max(raw, 0.0), 1.0) * query.block_size


def balance_bound_grid_report(
    mean_grid: Iterable[float] = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8),
    block_sizes: Iterable[int] = range(1, 11),
    duel_counts: Iterable[int] = (1, 10, 100),
) -> "CheckReport":
    """Run the upper-bound check over a full Bernoulli parameter grid."""
    means = list(mean_grid)
    checked = 0
    violations = 0
    detail = ""
    for p_best in means:
        for p_worse in means:
            if p_best <= p_worse:
                continue
            for j in block_sizes:
                for M in duel_counts:
                    query = BalanceQuery(
                        ArmModel(Family.BERNOULLI, p_best),
                        ArmModel(Family.BERNOULLI, p_worse),
                        j,
                        M,
                    )
                    thresholds = list(range(j + 1)) + [heuristic_threshold(query)]
                    for u in thresholds:
                        checked += 1
                        if not check_balance_upper_bound(query, u):
                            violations += 1
                            if not detail:
                                detail = (
                                    f"first failure: p*={p_best} p={p_worse} "
                                    f"j={j} M={M} u={u}"
                                )
    return CheckReport(
        name="balance-upper-bound",
        checked=checked,
        violations=violations,
        first_violation_round=None,
        detail=detail,
    )


def random_bernoulli_query(
    rng: np.random.Generator,
    max_block: int = 10,
    max_duels: int = 100,
    min_value: float = 1e-4,
) -> BalanceQuery:
    """A random well-separated Bernoulli query for randomized suites.

    Queries whose exact balance value falls below ``min_value`` are
    rejected and redrawn: a sampling estimator cannot resolve values far
    below 1/samples, so such queries would make a calibration suite
    vacuous rather than stringent.
    """
    for _ in range(10_000):
        worse = rng.uniform(0.05, 0.85)
        best = rng.uniform(worse + 0.05, 0.95)
        query = BalanceQuery(
            ArmModel(Family.BERNOULLI, best),
            ArmModel(Family.BERNOULLI, worse),
            int(rng.integers(1, max_block + 1)),
            int(rng.integers(1, max_duels + 1)),
        )
        if balance_exact_bernoulli(query) >= min_value:
            return query
    raise RuntimeError("could not draw a resolvable balance query")


@dataclass
class CheckReport:
    """Outcome of one checker: counts plus the first offending round."""

    name: str
    checked: int
    violations: int
    first_violation_round: Optional[int]
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return (
            f"[{status}] {self.name}: {self.violations} violations "
            f"over {self.checked} checks{extra}"
        )


def check_lemma_wt(trajectory: Trajectory) -> CheckReport:
    """Leader-count identity for the unwindowed dueling policy.

    At every complete round r the number of rounds where the leader
    won every duel (plus the initial round) must equal the current
    leader's pull count, which in turn must be at least r/K.
    """
    if trajectory.algorithm != "lbsda":
        raise ValueError(
            "leader-count identity only holds for the unwindowed policy, "
            f"got a {trajectory.algorithm} trajectory"
        )
    if trajectory.num_arms < 2:
        raise ValueError("trajectory must have at least 2 arms")
    K = trajectory.num_arms
    wins = 1
    violations = 0
    first: Optional[int] = None
    previous_leader: Optional[int] = None
    for entry in trajectory.rounds:
        if previous_leader is not None and entry.pulled == (previous_leader,):
            wins += 1
        leader_count = entry.counts[entry.leader]
        r = entry.round_index
        if wins != leader_count or leader_count * K < r:
            violations += 1
            if first is None:
                first = r
        previous_leader = entry.leader
    return CheckReport(
        name="lemma-wt",
        checked=len(trajectory.rounds),
        violations=violations,
        first_violation_round=first,
    )


def check_sw_leader_bound(
    trajectory: Trajectory, window: Optional[int] = None
) -> CheckReport:
    """Windowed leader occupancy: count >= min(r, window)/(2K).

    The first 2K rounds are exempt as warm-up: before every arm has
    had a chance to accumulate windowed samples the bound is not yet
    meaningful.
    """
    if trajectory.algorithm != "sw-lbsda":
        raise ValueError(
            "leader bound applies to sliding-window trajectories, "
            f"got {trajectory.algorithm}"
        )
    window = window if window is not None else trajectory.window
    if window is None:
        raise ValueError("window length required")
    K = trajectory.num_arms
    checked = 0
    violations = 0
    first: Optional[int] = None
    for entry in trajectory.rounds:
        r = entry.round_index
        if r < 2 * K:
            continue
        checked += 1
        assert entry.windowed_counts is not None
        occupancy = entry.windowed_counts[entry.leader]
        if 2 * K * occupancy < min(r, window):
            violations += 1
            if first is None:
                first = r
    return CheckReport(
        name="sw-leader-bound",
        checked=checked,
        violations=violations,
        first_violation_round=first,
    )


def check_lm_storage(trajectory: Trajectory) -> CheckReport:
    """Stored history never exceeds the round's capacity."""
    if trajectory.algorithm != "lbsda-lm":
        raise ValueError(
            f"storage check applies to limited-memory trajectories, "
            f"got {trajectory.algorithm}"
        )
    checked = 0
    violations = 0
    first: Optional[int] = None
    for entry in trajectory.rounds:
        assert entry.stored_lengths is not None and entry.capacity is not None
        checked += 1
        if any(stored > entry.capacity for stored in entry.stored_lengths):
            violations += 1
            if first is None:
                first = entry.round_index
    return CheckReport(
        name="lm-storage",
        checked=checked,
        violations=violations,
        first_violation_round=first,
    )


def export_trajectory(trajectory: Trajectory, path) -> None:
    """Newline-delimited JSON export, one round per line."""
    with open(path, "w") as fh:
        for entry in trajectory.rounds:
            row = {
                "r": entry.round_index,
                "leader": entry.leader,
                "pulled": list(entry.pulled),
                "counts": list(entry.counts),
            }
            if entry.windowed_counts is not None:
                row["windowed_counts"] = list(entry.windowed_counts)
            if entry.stored_lengths is not None:
                row["stored_lengths"] = list(entry.stored_lengths)
                row["capacity"] = entry.capacity
            fh.write(json.dumps(row) + "\n")
