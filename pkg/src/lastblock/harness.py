"""Simulation harness: replication loops, regret accounting, persistence.

Round-based policies (the dueling family) are driven through
``select / update / finish_round``; baselines pull one arm per time
step.  Time advances one step per pull, each pull samples from the
phase active at its own time step, and the per-pull gap to the current
optimal mean accumulates into the dynamic regret.  A round that would
overshoot the horizon is truncated, in ascending arm order, after the
pull that reaches T.

Replication i uses the seed ``base_seed + i`` and a private generator
shared by the environment and the policy (environment draws first
within a pull).  Aggregation merges per-replication summaries in
replication-index order, so results do not depend on the worker count
or scheduling.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .baselines import (
    DKlUcb,
    DUcb,
    DiscountedThompson,
    Exp3S,
    KlUcb,
    SwKlUcb,
    SwThompson,
    SwUcb,
    ThompsonSampling,
    Ucb1,
    exp3s_tuning,
    tuned_discount,
    tuned_window,
)
from .envs import EnvironmentSpec, Family
from .history import MemorySchedule, ScheduleForm
from .sda import LbSda, SwLbSda, Trajectory
from .verify import check_lemma_wt, check_lm_storage, check_sw_leader_bound

__all__ = [
    "ConfigurationError",
    "SimulationError",
    "PolicySpec",
    "ExperimentConfig",
    "RunRecord",
    "PolicyAggregate",
    "AggregateResult",
    "make_policy",
    "run_replication",
    "run_experiment",
    "persist",
    "load_regret_csv",
    "default_checkpoints",
    "KNOWN_POLICIES",
]

KNOWN_POLICIES = (
    "lbsda",
    "lbsda-lm",
    "sw-lbsda",
    "ucb1",
    "klucb",
    "ts",
    "sw-ucb",
    "d-ucb",
    "sw-klucb",
    "d-klucb",
    "sw-ts",
    "dts",
    "exp3s",
    "oracle",
    "fixed",
)


class ConfigurationError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every failure."""

    def __init__(self, errors: list[str] | str) -> None:
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("\n".join(self.errors))


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PolicySpec:
    """A policy name plus its construction parameters."""

    name: str
    params: tuple[tuple[str, object], ...] = ()

    @staticmethod
    def make(name: str, params: Optional[dict] = None) -> "PolicySpec":
        items = tuple(sorted((params or {}).items()))
        return PolicySpec(name, items)

    def as_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentSpec
    policies: tuple[PolicySpec, ...]
    replications: int
    base_seed: int
    record_trajectories: bool = False
    invariant_checks: bool = True
    checkpoints: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigurationError(
                f"replications: must be >= 1, got {self.replications}"
            )
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"policies: duplicate names in {names}")
        if self.checkpoints is not None:
            T = self.environment.horizon
            for t in self.checkpoints:
                if not 1 <= t <= T:
                    raise ConfigurationError(
                        f"checkpoints: {t} outside [1, {T}]"
                    )
            if list(self.checkpoints) != sorted(set(self.checkpoints)):
                raise ConfigurationError("checkpoints: must be strictly increasing")

    @property
    def horizon(self) -> int:
        return self.environment.horizon

    def resolved_checkpoints(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            return self.checkpoints
        return default_checkpoints(self.horizon)


def default_checkpoints(horizon: int, count: int = 200) -> tuple[int, ...]:
    """About ``count`` log-spaced time steps, always ending at the horizon."""
    if horizon <= count:
        return tuple(range(1, horizon + 1))
    grid = np.unique(
        np.round(np.logspace(0.0, np.log10(horizon), count)).astype(int)
    )
    return tuple(int(t) for t in grid)


@dataclass
class RunRecord:
    """One replication's trajectory-level outcome."""

    seed: int
    cumulative_regret: np.ndarray
    pulls: tuple[int, ...]
    storage_high_water: tuple[int, ...]
    invariant_violations: int
    first_violation_round: Optional[int]
    wall_time: float
    trajectory: Optional[Trajectory] = None


@dataclass
class PolicyAggregate:
    policy: str
    checkpoints: tuple[int, ...]
    mean_regret: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    final_regret_summary: dict[str, float]
    invariant_violations: int
    wall_time: float
    storage_high_water: tuple[int, ...] = ()


@dataclass
class AggregateResult:
    config: ExperimentConfig
    per_policy: dict[str, PolicyAggregate] = field(default_factory=dict)
    trajectories: dict[str, list[Trajectory]] = field(default_factory=dict)


class OraclePolicy:
    """Always pulls the arm with the highest current mean (zero regret)."""

    def __init__(self, env: EnvironmentSpec) -> None:
        self._env = env
        self._t = 0

    def select(self) -> int:
        means = self._env.means_at(self._t + 1)
        return max(range(len(means)), key=means.__getitem__)

    def update(self, arm: int, reward: float) -> None:
        self._t += 1


class FixedArmPolicy:
    """Always pulls one configured arm."""

    def __init__(self, arm: int) -> None:
        self.arm = arm

    def select(self) -> int:
        return self.arm

    def update(self, arm: int, reward: float) -> None:
        pass


def _require_family(spec: PolicySpec, env: EnvironmentSpec, allowed: tuple[Family, ...]) -> None:
    if env.family not in allowed:
        names = "/".join(f.value for f in allowed)
        raise ConfigurationError(
            f"policy {spec.name}: supports {names} environments, got {env.family.value}"
        )


def _resolve_window(params: dict, env: EnvironmentSpec, scale_bound: float) -> int:
    if "window" in params:
        return int(params["window"])
    if env.num_breakpoints >= 1:
        return tuned_window(env.horizon, env.num_breakpoints, scale_bound)
    import warnings

    warnings.warn(
        "stationary environment: window defaults to the horizon (never expires)",
        stacklevel=3,
    )
    return env.horizon


def _resolve_discount(params: dict, env: EnvironmentSpec, scale_bound: float) -> float:
    if "discount" in params:
        return float(params["discount"])
    if env.num_breakpoints >= 1:
        return tuned_discount(env.horizon, env.num_breakpoints, scale_bound)
    import warnings

    warnings.warn(
        "stationary environment: discount defaults to 1.0 (no forgetting)",
        stacklevel=3,
    )
    return 1.0


def make_policy(
    spec: PolicySpec,
    env: EnvironmentSpec,
    rng: np.random.Generator,
    record: bool = False,
):
    """Construct a policy instance for one replication.

    Raises ``ConfigurationError`` on unknown names, family mismatches,
    or invalid parameters, before any simulation starts.
    """
    params = spec.as_dict()
    name = spec.name
    K = env.num_arms
    sigma = env.max_scale()
    scale_bound = 1.0 + 2.0 * sigma if env.family == Family.GAUSSIAN else 1.0
    scale_bound = float(params.get("scale_bound", scale_bound))
    sigma = float(params.get("sigma", sigma))

    try:
        if name == "lbsda":
            return LbSda(K, rng, record=record)
        if name == "lbsda-lm":
            form = ScheduleForm(params.get("schedule", "additive"))
            schedule = MemorySchedule(
                form,
                floor=int(params.get("floor", 50)),
                coefficient=float(params.get("coefficient", 1.0)),
            )
            return LbSda(K, rng, schedule=schedule, record=record)
        if name == "sw-lbsda":
            return SwLbSda(K, _resolve_window(params, env, 1.0), rng, record=record)
        if name == "ucb1":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return Ucb1(K, rng, scale_bound=scale_bound)
        if name == "sw-ucb":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return SwUcb(
                K, _resolve_window(params, env, scale_bound), rng,
                scale_bound=scale_bound, xi=float(params.get("xi", 0.6)),
            )
        if name == "d-ucb":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return DUcb(
                K, _resolve_discount(params, env, scale_bound), rng,
                scale_bound=scale_bound, xi=float(params.get("xi", 0.6)),
            )
        if name == "klucb":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return KlUcb(K, env.family, rng, sigma=sigma)
        if name == "sw-klucb":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return SwKlUcb(
                K, _resolve_window(params, env, scale_bound), env.family, rng,
                sigma=sigma,
            )
        if name == "d-klucb":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return DKlUcb(
                K, _resolve_discount(params, env, scale_bound), env.family, rng,
                sigma=sigma,
            )
        if name == "ts":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return ThompsonSampling(K, env.family, rng, sigma=sigma)
        if name == "sw-ts":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return SwThompson(
                K, _resolve_window(params, env, 1.0), env.family, rng, sigma=sigma
            )
        if name == "dts":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            return DiscountedThompson(
                K, _resolve_discount(params, env, 1.0), env.family, rng, sigma=sigma
            )
        if name == "exp3s":
            _require_family(spec, env, (Family.BERNOULLI, Family.GAUSSIAN))
            alpha, gamma = exp3s_tuning(K, env.horizon, env.num_breakpoints)
            ceiling = 1.0 + 2.0 * sigma if env.family == Family.GAUSSIAN else 1.0
            return Exp3S(
                K,
                rng,
                alpha=float(params.get("alpha", alpha)),
                gamma=float(params.get("gamma", gamma)),
                reward_floor=float(params.get("reward_floor", 0.0)),
                reward_ceiling=float(params.get("reward_ceiling", ceiling)),
            )
        if name == "oracle":
            return OraclePolicy(env)
        if name == "fixed":
            arm = int(params.get("arm", 0))
            if not 0 <= arm < K:
                raise ConfigurationError(f"policy fixed: arm {arm} outside [0, {K})")
            return FixedArmPolicy(arm)
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(f"policy {name}: {exc}") from exc
    raise ConfigurationError(
        f"policy {name}: unknown name; known: {', '.join(KNOWN_POLICIES)}"
    )


def _check_invariants(policy) -> tuple[int, Optional[int]]:
    trajectory = getattr(policy, "trajectory", None)
    if trajectory is None:
        return 0, None
    if trajectory.algorithm == "lbsda":
        report = check_lemma_wt(trajectory)
    elif trajectory.algorithm == "lbsda-lm":
        report = check_lm_storage(trajectory)
    elif trajectory.algorithm == "sw-lbsda":
        report = check_sw_leader_bound(trajectory, trajectory.window)
    else:
        return 0, None
    return report.violations, report.first_violation_round


def run_replication(
    config: ExperimentConfig, policy_spec: PolicySpec, seed: int
) -> RunRecord:
    """Simulate one policy for exactly T pulls under one seed."""
    env = config.environment
    T = env.horizon
    rng = np.random.default_rng(seed)
    record = config.record_trajectories or config.invariant_checks
    policy = make_policy(policy_spec, env, rng, record=record)
    round_based = hasattr(policy, "finish_round")

    starts = [start for start, _ in env.phases]
    phase_models = [models for _, models in env.phases]
    phase_means = [tuple(m.mean for m in models) for models in phase_models]
    phase_best = [max(means) for means in phase_means]

    regret = np.empty(T, dtype=np.float64)
    pull_totals = [0] * env.num_arms
    cum = 0.0
    t = 0
    phase = 0
    next_change = starts[1] if len(starts) > 1 else T + 1
    started = time.perf_counter()

    def pull(arm: int) -> None:
        nonlocal t, cum, phase, next_change
        t += 1
        while t >= next_change:
            phase += 1
            next_change = starts[phase + 1] if phase + 1 < len(starts) else T + 1
        reward = phase_models[phase][arm].sample(rng)
        cum += phase_best[phase] - phase_means[phase][arm]
        regret[t - 1] = cum
        pull_totals[arm] += 1
        policy.update(arm, reward)

    try:
        if round_based:
            while t < T:
                arms = policy.select()
                remaining = T - t
                if len(arms) <= remaining:
                    for arm in arms:
                        pull(arm)
                    policy.finish_round()
                else:
                    for arm in arms[: remaining]:
                        pull(arm)
        else:
            while t < T:
                pull(policy.select())
    except ConfigurationError:
        raise
    except Exception as exc:
        raise SimulationError(
            f"replication with seed {seed} failed for policy "
            f"{policy_spec.name}: {exc}"
        ) from exc

    wall = time.perf_counter() - started
    violations, first_round = (0, None)
    if config.invariant_checks:
        violations, first_round = _check_invariants(policy)

    high_water = tuple(getattr(policy, "storage_high_water", ()) or ())
    return RunRecord(
        seed=seed,
        cumulative_regret=regret,
        pulls=tuple(pull_totals),
        storage_high_water=high_water,
        invariant_violations=violations,
        first_violation_round=first_round,
        wall_time=wall,
        trajectory=getattr(policy, "trajectory", None)
        if config.record_trajectories
        else None,
    )


@dataclass
class _RepSummary:
    policy: str
    index: int
    checkpoint_regret: np.ndarray
    final_regret: float
    violations: int
    first_violation_round: Optional[int]
    wall_time: float
    high_water: tuple[int, ...]
    trajectory: Optional[Trajectory]


def _run_one(task: tuple[ExperimentConfig, PolicySpec, int]) -> _RepSummary:
    config, policy_spec, index = task
    seed = config.base_seed + index
    rec = run_replication(config, policy_spec, seed)
    points = np.asarray(config.resolved_checkpoints(), dtype=int) - 1
    return _RepSummary(
        policy=policy_spec.name,
        index=index,
        checkpoint_regret=rec.cumulative_regret[points],
        final_regret=float(rec.cumulative_regret[-1]),
        violations=rec.invariant_violations,
        first_violation_round=rec.first_violation_round,
        wall_time=rec.wall_time,
        high_water=rec.storage_high_water,
        trajectory=rec.trajectory,
    )


def run_experiment(config: ExperimentConfig, workers: int = 1) -> AggregateResult:
    """Run every policy for ``replications`` seeds and aggregate.

    The result is a pure function of the config: the merge happens in
    replication-index order regardless of worker scheduling.
    """
    # construct policies once up front so configuration errors surface
    # before any simulation work is spent
    probe_rng = np.random.default_rng(config.base_seed)
    for pspec in config.policies:
        make_policy(pspec, config.environment, probe_rng)

    tasks = [
        (config, pspec, i)
        for pspec in config.policies
        for i in range(config.replications)
    ]
    if workers <= 1 or len(tasks) == 1:
        summaries = [_run_one(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_one, tasks, chunksize=8))

    result = AggregateResult(config=config)
    checkpoints = config.resolved_checkpoints()
    for pspec in config.policies:
        rows = sorted(
            (s for s in summaries if s.policy == pspec.name), key=lambda s: s.index
        )
        matrix = np.vstack([s.checkpoint_regret for s in rows])
        finals = np.array([s.final_regret for s in rows])
        high_water: tuple[int, ...] = ()
        if rows[0].high_water:
            high_water = tuple(
                max(s.high_water[k] for s in rows)
                for k in range(len(rows[0].high_water))
            )
        result.per_policy[pspec.name] = PolicyAggregate(
            policy=pspec.name,
            checkpoints=checkpoints,
            mean_regret=matrix.mean(axis=0),
            q25=np.quantile(matrix, 0.25, axis=0),
            q75=np.quantile(matrix, 0.75, axis=0),
            final_regret_summary={
                "mean": float(finals.mean()),
                "std": float(finals.std(ddof=1)) if len(finals) > 1 else 0.0,
                "min": float(finals.min()),
                "q25": float(np.quantile(finals, 0.25)),
                "median": float(np.quantile(finals, 0.5)),
                "q75": float(np.quantile(finals, 0.75)),
                "max": float(finals.max()),
            },
            invariant_violations=sum(s.violations for s in rows),
            wall_time=sum(s.wall_time for s in rows),
            storage_high_water=high_water,
        )
        if config.record_trajectories:
            result.trajectories[pspec.name] = [
                s.trajectory for s in rows if s.trajectory is not None
            ]
    return result


def _format_number(x: float) -> str:
    return repr(float(x))


def persist(result: AggregateResult, out_dir) -> tuple[str, str]:
    """Write ``regret.csv`` and ``manifest.json`` under ``out_dir``."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "regret.csv")
    manifest_path = os.path.join(out_dir, "manifest.json")
    config = result.config

    try:
        lines = ["t,policy,mean_regret,q25,q75"]
        for pspec in config.policies:
            agg = result.per_policy[pspec.name]
            for j, t in enumerate(agg.checkpoints):
                lines.append(
                    f"{t},{agg.policy},{_format_number(agg.mean_regret[j])},"
                    f"{_format_number(agg.q25[j])},{_format_number(agg.q75[j])}"
                )
        with open(csv_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

        env = config.environment
        manifest = {
            "version": __version__,
            "horizon": env.horizon,
            "replications": config.replications,
            "base_seed": config.base_seed,
            "seeds": [config.base_seed, config.base_seed + config.replications - 1],
            "checkpoints": list(config.resolved_checkpoints()),
            "environment": {
                "family": env.family.value,
                "num_arms": env.num_arms,
                "breakpoints": [start for start, _ in env.phases],
                "means": [[m.mean for m in models] for _, models in env.phases],
                "scales": [[m.scale for m in models] for _, models in env.phases],
            },
            "policies": [
                {
                    "name": p.name,
                    "params": p.as_dict(),
                    "final_regret": result.per_policy[p.name].final_regret_summary,
                    "invariant_violations": result.per_policy[
                        p.name
                    ].invariant_violations,
                    "wall_time_s": result.per_policy[p.name].wall_time,
                }
                for p in config.policies
            ],
        }
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise SimulationError(f"failed writing results under {out_dir}: {exc}") from exc
    return csv_path, manifest_path


def load_regret_csv(path) -> dict[str, dict[str, np.ndarray]]:
    """Read a persisted regret CSV back into per-policy arrays."""
    per_policy: dict[str, dict[str, list[float]]] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,policy,mean_regret,q25,q75":
            raise ValueError(f"unexpected CSV header in {path}: {header}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t, policy, mean, q25, q75 = line.split(",")
            bucket = per_policy.setdefault(
                policy, {"t": [], "mean_regret": [], "q25": [], "q75": []}
            )
            bucket["t"].append(float(t))
            bucket["mean_regret"].append(float(mean))
            bucket["q25"].append(float(q25))
            bucket["q75"].append(float(q75))
    return {
        name: {key: np.asarray(vals) for key, vals in cols.items()}
        for name, cols in per_policy.items()
    }
