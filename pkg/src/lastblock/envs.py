"""Reward distributions and piecewise-stationary bandit environments.

Arms are one-parameter exponential-family distributions parametrized by
their mean (Bernoulli, Gaussian with known variance, Poisson,
Exponential).  An environment is an ordered sequence of stationary
phases; each phase fixes one distribution per arm and governs every
time step from its start until the next phase begins (left-closed
convention).  Environments are immutable and can be shared freely
across replication workers; all randomness comes from an injected
``numpy.random.Generator``.
"""
from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Family",
    "ArmModel",
    "EnvironmentSpec",
    "kl_divergence",
    "sample_reward",
    "oracle_mean",
]


class Family(str, enum.Enum):
    """Supported one-parameter exponential families."""

    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"
    POISSON = "poisson"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class ArmModel:
    """A single reward distribution, identified by family, mean and scale.

    ``scale`` is the known standard deviation for Gaussian arms and is
    ignored by the other families.
    """

    family: Family
    mean: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.family == Family.BERNOULLI and not 0.0 <= self.mean <= 1.0:
            raise ValueError(f"Bernoulli mean must lie in [0, 1], got {self.mean}")
        if self.family in (Family.POISSON, Family.EXPONENTIAL) and self.mean <= 0.0:
            raise ValueError(f"{self.family.value} mean must be > 0, got {self.mean}")
        if self.family == Family.GAUSSIAN and self.scale <= 0.0:
            raise ValueError(f"Gaussian scale must be > 0, got {self.scale}")

    def sample(self, rng: np.random.Generator) -> float:
        """Draw one reward; consumes exactly one call on ``rng``."""
        if self.family == Family.BERNOULLI:
            return 1.0 if rng.random() < self.mean else 0.0
        if self.family == Family.GAUSSIAN:
            return self.mean + self.scale * rng.standard_normal()
        if self.family == Family.POISSON:
            return float(rng.poisson(self.mean))
        return float(rng.exponential(self.mean))

    def variance(self) -> float:
        if self.family == Family.BERNOULLI:
            return self.mean * (1.0 - self.mean)
        if self.family == Family.GAUSSIAN:
            return self.scale**2
        if self.family == Family.POISSON:
            return self.mean
        return self.mean**2

    def comparable(self, other: "ArmModel") -> bool:
        """KL comparability: same family, and same scale for Gaussians."""
        if self.family != other.family:
            return False
        if self.family == Family.GAUSSIAN:
            return self.scale == other.scale
        return True


def kl_divergence(a: ArmModel, b: ArmModel) -> float:
    """KL divergence between two same-family distributions given by mean.

    Returns ``math.inf`` for a Bernoulli divergence onto a degenerate
    target (q in {0, 1} with p != q); downstream confidence-bound
    bisection relies on that sentinel rather than an exception.
    """
    if not a.comparable(b):
        raise ValueError(
            f"KL divergence requires comparable arms, got {a.family.value}"
            f"/{b.family.value} with scales {a.scale}/{b.scale}"
        )
    p, q = a.mean, b.mean
    if a.family == Family.BERNOULLI:
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
    if a.family == Family.GAUSSIAN:
        return (p - q) ** 2 / (2.0 * a.scale**2)
    if a.family == Family.POISSON:
        return p * math.log(p / q) + q - p
    return math.log(q / p) + p / q - 1.0


@dataclass(frozen=True)
class EnvironmentSpec:
    """Piecewise-stationary K-armed environment over horizon T.

    ``phases`` is an ordered tuple of ``(start_time, arm_models)`` with
    strictly increasing start times, the first equal to 1.  A phase
    governs all time steps t with ``start_time <= t`` until the next
    phase starts.  All arms in all phases must share one family.
    """

    num_arms: int
    horizon: int
    phases: tuple[tuple[int, tuple[ArmModel, ...]], ...]
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.num_arms < 2:
            raise ValueError(f"num_arms must be >= 2, got {self.num_arms}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not self.phases:
            raise ValueError("at least one phase is required")
        starts = [start for start, _ in self.phases]
        if starts[0] != 1:
            raise ValueError(f"first phase must start at t=1, got {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"phase starts must be strictly increasing: {starts}")
        if starts[-1] > self.horizon:
            raise ValueError(
                f"phase start {starts[-1]} exceeds horizon {self.horizon}"
            )
        family = self.phases[0][1][0].family
        for start, models in self.phases:
            if len(models) != self.num_arms:
                raise ValueError(
                    f"phase at t={start} has {len(models)} arms, expected {self.num_arms}"
                )
            for model in models:
                if model.family != family:
                    raise ValueError("all arms in all phases must share one family")
        object.__setattr__(self, "_starts", tuple(starts))

    @property
    def family(self) -> Family:
        return self.phases[0][1][0].family

    @property
    def num_breakpoints(self) -> int:
        """Number of distribution changes over the horizon."""
        return len(self.phases) - 1

    def phase_index(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"time index {t} outside [1, {self.horizon}]")
        return bisect_right(self._starts, t) - 1

    def arm_model(self, arm: int, t: int) -> ArmModel:
        if not 0 <= arm < self.num_arms:
            raise ValueError(f"arm index {arm} outside [0, {self.num_arms})")
        return self.phases[self.phase_index(t)][1][arm]

    def means_at(self, t: int) -> tuple[float, ...]:
        return tuple(m.mean for m in self.phases[self.phase_index(t)][1])

    def optimal_mean(self, t: int) -> float:
        return max(self.means_at(t))

    def max_scale(self) -> float:
        """Largest Gaussian scale over all phases (1.0 for other families)."""
        if self.family != Family.GAUSSIAN:
            return 1.0
        return max(m.scale for _, models in self.phases for m in models)


def sample_reward(
    spec: EnvironmentSpec, arm: int, t: int, rng: np.random.Generator
) -> float:
    """Draw one reward for ``arm`` from the phase active at time ``t``."""
    return spec.arm_model(arm, t).sample(rng)


def oracle_mean(spec: EnvironmentSpec, arm: int, t: int) -> float:
    """Exact mean of ``arm`` at time ``t`` (pure function of the environment)."""
    return spec.arm_model(arm, t).mean


def stationary(models: list[ArmModel] | tuple[ArmModel, ...], horizon: int) -> EnvironmentSpec:
    """Single-phase environment over ``horizon`` steps."""
    models = tuple(models)
    return EnvironmentSpec(len(models), horizon, ((1, models),))
