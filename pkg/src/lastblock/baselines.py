"""Competitor policies: UCB / kl-UCB / Thompson families and EXP3S.

All baselines are step-based (one arm per time step) and expose

* ``select() -> arm`` and
* ``update(arm, reward)``.

Sliding-window variants keep exact statistics over the last ``window``
time steps; discounted variants decay every arm's count and reward sum
by ``discount`` per step.  The tuning helpers at the bottom implement
the standard horizon-aware choices: window ``2B*sqrt(T ln T / G)``,
discount ``1 - 1/(4B*sqrt(T/G))`` with B the effective reward range
(1 for Bernoulli, 1 + 2*sigma for Gaussian runs), and the EXP3S pair
``alpha = 1/T``, ``gamma = min(1, sqrt(K(e + G ln(KT)) / ((e-1)T)))``.
Real-valued tunings are rounded to the nearest integer with ties down.
"""
from __future__ import annotations

import math
from collections import deque
from typing import Optional, Sequence

import numpy as np

from .envs import Family

__all__ = [
    "klucb_budget",
    "klucb_bound",
    "klucb_index",
    "Ucb1",
    "SwUcb",
    "DUcb",
    "KlUcb",
    "SwKlUcb",
    "DKlUcb",
    "ThompsonSampling",
    "SwThompson",
    "DiscountedThompson",
    "Exp3S",
    "round_half_down",
    "tuned_window",
    "tuned_discount",
    "exp3s_tuning",
]

KLUCB_TOL = 1e-8
SW_UCB_XI = 0.6


def round_half_down(x: float) -> int:
    """Nearest integer, ties rounded down (350.5 -> 350)."""
    return math.ceil(x - 0.5)


def klucb_budget(t: float, c: float = 3.0) -> float:
    """Exploration budget ln t + c ln ln t, clamped to be usable for small t."""
    if t < 2.0:
        return max(0.0, math.log(t) if t > 0 else 0.0)
    return max(0.0, math.log(t) + c * math.log(math.log(t)))


def _bernoulli_kl(p: float, q: float) -> float:
    if p == q:
        return 0.0
    if q <= 0.0 or q >= 1.0:
        return math.inf
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out


def klucb_bound(
    mean: float, count: float, budget: float, family: Family, sigma: float = 1.0
) -> float:
    """Largest q >= mean with count * kl(mean, q) <= budget."""
    if count <= 0:
        raise ValueError(f"count must be positive, got {count}")
    if family == Family.GAUSSIAN:
        return mean + sigma * math.sqrt(2.0 * budget / count)
    if family != Family.BERNOULLI:
        raise ValueError(f"kl-UCB index not supported for family {family.value}")
    if mean >= 1.0:
        return 1.0
    lo, hi = mean, 1.0
    while hi - lo > KLUCB_TOL:
        mid = 0.5 * (lo + hi)
        if count * _bernoulli_kl(mean, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def klucb_index(
    mean: float, count: float, t: float, family: Family, sigma: float = 1.0
) -> float:
    return klucb_bound(mean, count, klucb_budget(t), family, sigma)


def _first_unpulled(counts: Sequence[float]) -> Optional[int]:
    for k, n in enumerate(counts):
        if n <= 0:
            return k
    return None


def _argmax(values: Sequence[float]) -> int:
    best, best_k = values[0], 0
    for k in range(1, len(values)):
        if values[k] > best:
            best, best_k = values[k], k
    return best_k


class _SlidingStats:
    """Exact per-arm counts and sums over the last ``window`` steps."""

    def __init__(self, num_arms: int, window: int) -> None:
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self.counts = [0] * num_arms
        self.sums = [0.0] * num_arms
        self._buf: deque[tuple[int, float]] = deque()

    def push(self, arm: int, reward: float) -> None:
        self._buf.append((arm, reward))
        self.counts[arm] += 1
        self.sums[arm] += reward
        if len(self._buf) > self.window:
            old_arm, old_reward = self._buf.popleft()
            self.counts[old_arm] -= 1
            self.sums[old_arm] -= old_reward


class _DiscountedStats:
    """Per-arm geometrically discounted counts and sums."""

    def __init__(self, num_arms: int, discount: float) -> None:
        if not 0.0 < discount <= 1.0:
            raise ValueError(f"discount must lie in (0, 1], got {discount}")
        self.discount = discount
        self.counts = [0.0] * num_arms
        self.sums = [0.0] * num_arms

    def push(self, arm: int, reward: float) -> None:
        g = self.discount
        for k in range(len(self.counts)):
            self.counts[k] *= g
            self.sums[k] *= g
        self.counts[arm] += 1.0
        self.sums[arm] += reward

    def total_count(self) -> float:
        return sum(self.counts)


class Ucb1:
    """Classic optimism index, reward range ``scale_bound``."""

    def __init__(
        self, num_arms: int, rng: np.random.Generator, scale_bound: float = 1.0
    ) -> None:
        self.num_arms = num_arms
        self.scale_bound = scale_bound
        self._counts = [0] * num_arms
        self._sums = [0.0] * num_arms
        self._t = 0

    def select(self) -> int:
        forced = _first_unpulled(self._counts)
        if forced is not None:
            return forced
        log_t = math.log(self._t + 1)
        return _argmax(
            [
                self._sums[k] / self._counts[k]
                + self.scale_bound * math.sqrt(2.0 * log_t / self._counts[k])
                for k in range(self.num_arms)
            ]
        )

    def update(self, arm: int, reward: float) -> None:
        self._counts[arm] += 1
        self._sums[arm] += reward
        self._t += 1


class SwUcb:
    """Sliding-window UCB, width ``B * sqrt(xi ln(min(t, window)) / N)``."""

    def __init__(
        self,
        num_arms: int,
        window: int,
        rng: np.random.Generator,
        scale_bound: float = 1.0,
        xi: float = SW_UCB_XI,
    ) -> None:
        self.num_arms = num_arms
        self.scale_bound = scale_bound
        self.xi = xi
        self._stats = _SlidingStats(num_arms, window)
        self._t = 0

    def select(self) -> int:
        counts = self._stats.counts
        forced = _first_unpulled(counts)
        if forced is not None:
            return forced
        log_t = math.log(min(self._t + 1, self._stats.window))
        return _argmax(
            [
                self._stats.sums[k] / counts[k]
                + self.scale_bound * math.sqrt(self.xi * max(log_t, 0.0) / counts[k])
                for k in range(self.num_arms)
            ]
        )

    def update(self, arm: int, reward: float) -> None:
        self._stats.push(arm, reward)
        self._t += 1


class DUcb:
    """Discounted UCB, width ``2B * sqrt(xi ln(n_gamma) / N_gamma)``."""

    def __init__(
        self,
        num_arms: int,
        discount: float,
        rng: np.random.Generator,
        scale_bound: float = 1.0,
        xi: float = SW_UCB_XI,
    ) -> None:
        self.num_arms = num_arms
        self.scale_bound = scale_bound
        self.xi = xi
        self._stats = _DiscountedStats(num_arms, discount)
        self._pulled_once = [False] * num_arms

    def select(self) -> int:
        for k, seen in enumerate(self._pulled_once):
            if not seen:
                return k
        total = self._stats.total_count()
        log_total = math.log(total) if total > 1.0 else 0.0
        return _argmax(
            [
                self._stats.sums[k] / self._stats.counts[k]
                + 2.0
                * self.scale_bound
                * math.sqrt(self.xi * log_total / self._stats.counts[k])
                for k in range(self.num_arms)
            ]
        )

    def update(self, arm: int, reward: float) -> None:
        self._stats.push(arm, reward)
        self._pulled_once[arm] = True


class KlUcb:
    """kl-UCB with the family's divergence and budget ln t + 3 ln ln t."""

    def __init__(
        self,
        num_arms: int,
        family: Family,
        rng: np.random.Generator,
        sigma: float = 1.0,
    ) -> None:
        if family not in (Family.BERNOULLI, Family.GAUSSIAN):
            raise ValueError(f"kl-UCB supports Bernoulli/Gaussian, got {family.value}")
        self.num_arms = num_arms
        self.family = family
        self.sigma = sigma
        self._counts = [0] * num_arms
        self._sums = [0.0] * num_arms
        self._t = 0

    def select(self) -> int:
        forced = _first_unpulled(self._counts)
        if forced is not None:
            return forced
        budget = klucb_budget(self._t + 1)
        return _argmax(
            [
                klucb_bound(
                    self._sums[k] / self._counts[k],
                    self._counts[k],
                    budget,
                    self.family,
                    self.sigma,
                )
                for k in range(self.num_arms)
            ]
        )

    def update(self, arm: int, reward: float) -> None:
        self._counts[arm] += 1
        self._sums[arm] += reward
        self._t += 1


class SwKlUcb:
    """kl-UCB over the sliding window, budget from min(t, window)."""

    def __init__(
        self,
        num_arms: int,
        window: int,
        family: Family,
        rng: np.random.Generator,
        sigma: float = 1.0,
    ) -> None:
        if family not in (Family.BERNOULLI, Family.GAUSSIAN):
            raise ValueError(f"kl-UCB supports Bernoulli/Gaussian, got {family.value}")
        self.num_arms = num_arms
        self.family = family
        self.sigma = sigma
        self._stats = _SlidingStats(num_arms, window)
        self._t = 0

    def select(self) -> int:
        counts = self._stats.counts
        forced = _first_unpulled(counts)
        if forced is not None:
            return forced
        budget = klucb_budget(min(self._t + 1, self._stats.window))
        return _argmax(
            [
                klucb_bound(
                    self._stats.sums[k] / counts[k],
                    counts[k],
                    budget,
                    self.family,
                    self.sigma,
                )
                for k in range(self.num_arms)
            ]
        )

    def update(self, arm: int, reward: float) -> None:
        self._stats.push(arm, reward)
        self._t += 1


class DKlUcb:
    """kl-UCB over discounted statistics, budget from the discounted total."""

    def __init__(
        self,
        num_arms: int,
        discount: float,
        family: Family,
        rng: np.random.Generator,
        sigma: float = 1.0,
    ) -> None:
        if family not in (Family.BERNOULLI, Family.GAUSSIAN):
            raise ValueError(f"kl-UCB supports Bernoulli/Gaussian, got {family.value}")
        self.num_arms = num_arms
        self.family = family
        self.sigma = sigma
        self._stats = _DiscountedStats(num_arms, discount)
        self._pulled_once = [False] * num_arms

    def select(self) -> int:
        for k, seen in enumerate(self._pulled_once):
            if not seen:
                return k
        budget = klucb_budget(max(self._stats.total_count(), 1.0))
        return _argmax(
            [
                klucb_bound(
                    self._stats.sums[k] / self._stats.counts[k],
                    self._stats.counts[k],
                    budget,
                    self.family,
                    self.sigma,
                )
                for k in range(self.num_arms)
            ]
        )

    def update(self, arm: int, reward: float) -> None:
        self._stats.push(arm, reward)
        self._pulled_once[arm] = True


class ThompsonSampling:
    """Conjugate posterior sampling (Beta for Bernoulli, Normal for Gaussian)."""

    def __init__(
        self,
        num_arms: int,
        family: Family,
        rng: np.random.Generator,
        sigma: float = 1.0,
    ) -> None:
        if family not in (Family.BERNOULLI, Family.GAUSSIAN):
            raise ValueError(
                f"Thompson sampling supports Bernoulli/Gaussian, got {family.value}"
            )
        self.num_arms = num_arms
        self.family = family
        self.sigma = sigma
        self._rng = rng
        self._counts = [0] * num_arms
        self._sums = [0.0] * num_arms

    def _sample_posterior(self, counts: Sequence[float], sums: Sequence[float]) -> int:
        rng = self._rng
        if self.family == Family.BERNOULLI:
            draws = [
                rng.beta(1.0 + sums[k], 1.0 + counts[k] - sums[k])
                for k in range(self.num_arms)
            ]
            return _argmax(draws)
        forced = _first_unpulled(counts)
        if forced is not None:
            return forced
        draws = [
            rng.normal(sums[k] / counts[k], self.sigma / math.sqrt(counts[k]))
            for k in range(self.num_arms)
        ]
        return _argmax(draws)

    def select(self) -> int:
        return self._sample_posterior(self._counts, self._sums)

    def update(self, arm: int, reward: float) -> None:
        self._counts[arm] += 1
        self._sums[arm] += reward


class SwThompson(ThompsonSampling):
    """Thompson sampling restricted to the last ``window`` time steps."""

    def __init__(
        self,
        num_arms: int,
        window: int,
        family: Family,
        rng: np.random.Generator,
        sigma: float = 1.0,
    ) -> None:
        super().__init__(num_arms, family, rng, sigma)
        self._stats = _SlidingStats(num_arms, window)

    def select(self) -> int:
        return self._sample_posterior(self._stats.counts, self._stats.sums)

    def update(self, arm: int, reward: float) -> None:
        self._stats.push(arm, reward)


class DiscountedThompson(ThompsonSampling):
    """Thompson sampling over geometrically decayed pseudo-counts."""

    def __init__(
        self,
        num_arms: int,
        discount: float,
        family: Family,
        rng: np.random.Generator,
        sigma: float = 1.0,
    ) -> None:
        super().__init__(num_arms, family, rng, sigma)
        self._stats = _DiscountedStats(num_arms, discount)

    def select(self) -> int:
        return self._sample_posterior(self._stats.counts, self._stats.sums)

    def update(self, arm: int, reward: float) -> None:
        self._stats.push(arm, reward)


class Exp3S:
    """Exponential weights with egalitarian weight sharing.

    Probabilities are ``(1 - gamma) * w / sum(w) + gamma / K``; the
    pulled arm's weight is scaled by ``exp(gamma * x / (K * p))`` with
    the importance-weighted gain, then every weight receives
    ``(e * alpha / K) * sum(w)``.  Rewards are rescaled into [0, 1]
    through ``(clip(r) - floor) / (ceiling - floor)``; out-of-range
    rewards are clamped and counted in ``clip_warnings``.
    """

    RENORM_THRESHOLD = 1e100

    def __init__(
        self,
        num_arms: int,
        rng: np.random.Generator,
        alpha: float,
        gamma: float,
        reward_floor: float = 0.0,
        reward_ceiling: float = 1.0,
    ) -> None:
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        if alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        if reward_ceiling <= reward_floor:
            raise ValueError("reward_ceiling must exceed reward_floor")
        self.num_arms = num_arms
        self.alpha = alpha
        self.gamma = gamma
        self.reward_floor = reward_floor
        self.reward_ceiling = reward_ceiling
        self._rng = rng
        self._weights = [1.0] * num_arms
        self.clip_warnings = 0

    def probabilities(self) -> list[float]:
        total = sum(self._weights)
        g = self.gamma
        return [
            (1.0 - g) * w / total + g / self.num_arms for w in self._weights
        ]

    def select(self) -> int:
        return int(self._rng.choice(self.num_arms, p=self.probabilities()))

    def update(self, arm: int, reward: float) -> None:
        lo, hi = self.reward_floor, self.reward_ceiling
        if reward < lo or reward > hi:
            self.clip_warnings += 1
            reward = min(max(reward, lo), hi)
        gain = (reward - lo) / (hi - lo)
        prob = self.probabilities()[arm]
        self._weights[arm] *= math.exp(self.gamma * (gain / prob) / self.num_arms)
        if self.alpha > 0.0:
            share = (math.e * self.alpha / self.num_arms) * sum(self._weights)
            for k in range(self.num_arms):
                self._weights[k] += share
        total = sum(self._weights)
        if total > self.RENORM_THRESHOLD:
            for k in range(self.num_arms):
                self._weights[k] /= total


def tuned_window(horizon: int, breakpoints: int, scale_bound: float = 1.0) -> int:
    """Window 2B * sqrt(T ln T / G), nearest integer with ties down."""
    if breakpoints < 1:
        raise ValueError("window tuning requires at least one breakpoint")
    return round_half_down(
        2.0 * scale_bound * math.sqrt(horizon * math.log(horizon) / breakpoints)
    )


def tuned_discount(horizon: int, breakpoints: int, scale_bound: float = 1.0) -> float:
    """Discount with 1/(1 - gamma) = 4B * sqrt(T / G), integer-rounded."""
    if breakpoints < 1:
        raise ValueError("discount tuning requires at least one breakpoint")
    inverse_gap = round_half_down(4.0 * scale_bound * math.sqrt(horizon / breakpoints))
    return 1.0 - 1.0 / max(inverse_gap, 2)


def exp3s_tuning(num_arms: int, horizon: int, breakpoints: int) -> tuple[float, float]:
    """EXP3S pair (alpha, gamma) for a known horizon and breakpoint count."""
    alpha = 1.0 / horizon
    gamma = min(
        1.0,
        math.sqrt(
            num_arms
            * (math.e + breakpoints * math.log(num_arms * horizon))
            / ((math.e - 1.0) * horizon)
        ),
    )
    return alpha, gamma
