"""Experiment configuration files and named presets.

Configs are YAML with a fixed, documented key set::

    horizon: 10000
    replications: 500
    seed: 20240601
    environment:
      family: bernoulli          # bernoulli|gaussian|poisson|exponential
      num_arms: 2
      breakpoints: [1]           # phase start times, first must be 1
      means: [[0.05, 0.15]]      # one row of K means per phase
      scales: [[0.5, 0.5]]       # gaussian only; scalar, per-phase, or rows
    policies:
      - name: lbsda
      - name: lbsda-lm
        params: {schedule: additive, floor: 50}
    checkpoints: [...]           # optional; default ~200 log-spaced steps
    record_trajectories: false
    invariant_checks: true

Validation collects every failure and reports the offending key and
constraint.  Presets are pure functions of (horizon, replications,
seed): the same overrides always expand to the same config.  The
switching-instance means below follow the published experiments only
qualitatively; the exact values in those experiments were shown
graphically and are not recoverable, so these are approximations.
"""
from __future__ import annotations

from typing import Optional

import yaml

from .envs import ArmModel, EnvironmentSpec, Family
from .harness import (
    ConfigurationError,
    ExperimentConfig,
    KNOWN_POLICIES,
    PolicySpec,
)

__all__ = [
    "parse_config",
    "build_config",
    "serialize_config",
    "preset_names",
    "build_preset",
    "PRESET_SUMMARIES",
]


def _as_scale_rows(
    raw, num_phases: int, num_arms: int, errors: list[str]
) -> list[list[float]]:
    """Normalize the ``scales`` key to one row of K scales per phase."""
    if raw is None:
        return [[1.0] * num_arms for _ in range(num_phases)]
    if isinstance(raw, (int, float)):
        return [[float(raw)] * num_arms for _ in range(num_phases)]
    if not isinstance(raw, list) or len(raw) != num_phases:
        errors.append(
            f"environment.scales: expected scalar or {num_phases} entries, got {raw!r}"
        )
        return [[1.0] * num_arms for _ in range(num_phases)]
    rows = []
    for i, entry in enumerate(raw):
        if isinstance(entry, (int, float)):
            rows.append([float(entry)] * num_arms)
        elif isinstance(entry, list) and len(entry) == num_arms:
            rows.append([float(v) for v in entry])
        else:
            errors.append(
                f"environment.scales[{i}]: expected scalar or {num_arms} values"
            )
            rows.append([1.0] * num_arms)
    return rows


def _build_environment(raw: dict, horizon: int, errors: list[str]) -> Optional[EnvironmentSpec]:
    family_name = raw.get("family")
    try:
        family = Family(family_name)
    except ValueError:
        errors.append(
            f"environment.family: unknown family {family_name!r}; expected one of "
            f"{[f.value for f in Family]}"
        )
        return None
    num_arms = raw.get("num_arms")
    if not isinstance(num_arms, int) or num_arms < 2:
        errors.append(f"environment.num_arms: must be an integer >= 2, got {num_arms!r}")
        return None
    means = raw.get("means")
    if not isinstance(means, list) or not means:
        errors.append("environment.means: expected a non-empty list of per-phase rows")
        return None
    means_rows = []
    for i, row in enumerate(means):
        if isinstance(row, list) and len(row) == num_arms:
            means_rows.append([float(v) for v in row])
        else:
            errors.append(
                f"environment.means[{i}]: expected {num_arms} values, got {row!r}"
            )
            return None
    breakpoints = raw.get("breakpoints", [1])
    if not isinstance(breakpoints, list) or len(breakpoints) != len(means_rows):
        errors.append(
            f"environment.breakpoints: expected {len(means_rows)} phase starts, "
            f"got {breakpoints!r}"
        )
        return None
    if breakpoints and breakpoints[0] != 1:
        errors.append(
            f"environment.breakpoints: first phase must start at 1, got {breakpoints[0]}"
        )
    for a, b in zip(breakpoints, breakpoints[1:]):
        if b <= a:
            errors.append(
                f"environment.breakpoints: must be strictly increasing, got {breakpoints}"
            )
            break
    for i, start in enumerate(breakpoints):
        if not isinstance(start, int) or not 1 <= start <= horizon:
            errors.append(
                f"environment.breakpoints[{i}]: {start!r} outside [1, horizon={horizon}]"
            )
            return None
    scales = _as_scale_rows(raw.get("scales"), len(means_rows), num_arms, errors)

    phases = []
    for i, (start, row) in enumerate(zip(breakpoints, means_rows)):
        models = []
        for k, mean in enumerate(row):
            try:
                models.append(ArmModel(family, mean, scales[i][k]))
            except ValueError as exc:
                errors.append(f"environment.means[{i}][{k}]: {exc}")
        if len(models) != num_arms:
            return None
        phases.append((start, tuple(models)))
    if errors:
        return None
    try:
        return EnvironmentSpec(num_arms, horizon, tuple(phases))
    except ValueError as exc:
        errors.append(f"environment: {exc}")
        return None


def build_config(raw: dict) -> ExperimentConfig:
    """Validate a raw mapping into an ExperimentConfig (or raise with all errors)."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigurationError("config: expected a mapping at the top level")

    horizon = raw.get("horizon")
    if not isinstance(horizon, int) or horizon < 1:
        errors.append(f"horizon: must be an integer >= 1, got {horizon!r}")
        horizon = 1
    replications = raw.get("replications", 1)
    if not isinstance(replications, int) or replications < 1:
        errors.append(f"replications: must be an integer >= 1, got {replications!r}")
        replications = 1
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        errors.append(f"seed: must be an integer, got {seed!r}")
        seed = 0

    env_raw = raw.get("environment")
    env = None
    if not isinstance(env_raw, dict):
        errors.append("environment: required mapping is missing")
    else:
        env = _build_environment(env_raw, horizon, errors)

    policies: list[PolicySpec] = []
    pol_raw = raw.get("policies")
    if not isinstance(pol_raw, list) or not pol_raw:
        errors.append("policies: expected a non-empty list")
    else:
        for i, entry in enumerate(pol_raw):
            if not isinstance(entry, dict) or "name" not in entry:
                errors.append(f"policies[{i}]: expected a mapping with a 'name' key")
                continue
            name = entry["name"]
            params = entry.get("params") or {}
            if name not in KNOWN_POLICIES:
                errors.append(
                    f"policies[{i}].name: unknown policy {name!r}; known: "
                    f"{', '.join(KNOWN_POLICIES)}"
                )
                continue
            if not isinstance(params, dict):
                errors.append(f"policies[{i}].params: expected a mapping")
                continue
            window = params.get("window")
            if window is not None and env is not None and window < env.num_arms:
                errors.append(
                    f"policies[{i}].params.window: {window} must be >= "
                    f"num_arms {env.num_arms}"
                )
            discount = params.get("discount")
            if discount is not None and not 0.0 < float(discount) <= 1.0:
                errors.append(
                    f"policies[{i}].params.discount: {discount} must lie in (0, 1]"
                )
            policies.append(PolicySpec.make(name, params))

    checkpoints = raw.get("checkpoints")
    if checkpoints is not None:
        if not isinstance(checkpoints, list) or not all(
            isinstance(t, int) for t in checkpoints
        ):
            errors.append(f"checkpoints: expected a list of integers, got {checkpoints!r}")
            checkpoints = None
        else:
            checkpoints = tuple(checkpoints)

    if errors or env is None:
        raise ConfigurationError(errors or ["environment: invalid"])
    try:
        return ExperimentConfig(
            environment=env,
            policies=tuple(policies),
            replications=replications,
            base_seed=seed,
            record_trajectories=bool(raw.get("record_trajectories", False)),
            invariant_checks=bool(raw.get("invariant_checks", True)),
            checkpoints=checkpoints,
        )
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError([str(exc)]) from exc


def parse_config(path) -> ExperimentConfig:
    """Load and validate a YAML experiment config file."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return build_config(raw)


def serialize_config(config: ExperimentConfig) -> str:
    """YAML text that parses back to an identical config."""
    env = config.environment
    raw = {
        "horizon": env.horizon,
        "replications": config.replications,
        "seed": config.base_seed,
        "environment": {
            "family": env.family.value,
            "num_arms": env.num_arms,
            "breakpoints": [start for start, _ in env.phases],
            "means": [[m.mean for m in models] for _, models in env.phases],
            "scales": [[m.scale for m in models] for _, models in env.phases],
        },
        "policies": [
            {"name": p.name, "params": p.as_dict()} for p in config.policies
        ],
        "record_trajectories": config.record_trajectories,
        "invariant_checks": config.invariant_checks,
    }
    if config.checkpoints is not None:
        raw["checkpoints"] = list(config.checkpoints)
    return yaml.safe_dump(raw, sort_keys=False)


# -- presets ----------------------------------------------------------------

PRESET_SUMMARIES = {
    "fig3-bernoulli-stationary": (
        "2-arm stationary Bernoulli (0.05, 0.15): storage-limited duels vs "
        "kl-UCB and Thompson sampling"
    ),
    "fig4-bernoulli-switching": (
        "3-arm Bernoulli with 3 breakpoints (approximate means): windowed "
        "duels vs forgetting baselines and EXP3S"
    ),
    "fig5-gauss-fixed-sigma": (
        "3-arm Gaussian, sigma 0.5, 3 breakpoints (approximate means): "
        "windowed duels vs UCB-family baselines"
    ),
    "gauss-sigma-varying": (
        "same Gaussian means with per-phase sigma 0.5, 0.25, 1, 0.25"
    ),
}

_SWITCHING_BERNOULLI_MEANS = (
    (0.7, 0.5, 0.3),
    (0.4, 0.8, 0.3),
    (0.4, 0.3, 0.9),
    (0.6, 0.2, 0.3),
)
_SWITCHING_GAUSSIAN_MEANS = (
    (0.5, 0.3, 0.1),
    (0.2, 0.6, 0.1),
    (0.2, 0.1, 0.8),
    (0.7, 0.4, 0.3),
)
_VARYING_SIGMAS = (0.5, 0.25, 1.0, 0.25)


def preset_names() -> list[str]:
    return list(PRESET_SUMMARIES)


def _four_phase_starts(horizon: int) -> tuple[int, int, int, int]:
    if horizon < 8:
        raise ConfigurationError(f"horizon: {horizon} too short for a 4-phase preset")
    quarter = horizon // 4
    return (1, quarter + 1, 2 * quarter + 1, 3 * quarter + 1)


def build_preset(
    name: str,
    horizon: Optional[int] = None,
    replications: Optional[int] = None,
    seed: Optional[int] = None,
) -> ExperimentConfig:
    """Expand a named preset, optionally overriding T, replications, seed."""
    if name not in PRESET_SUMMARIES:
        raise ConfigurationError(
            f"preset: unknown name {name!r}; known: {', '.join(PRESET_SUMMARIES)}"
        )
    T = horizon if horizon is not None else 10_000
    reps = replications if replications is not None else 2000
    base_seed = seed if seed is not None else 20240601

    if name == "fig3-bernoulli-stationary":
        env = EnvironmentSpec(
            2,
            T,
            ((1, (ArmModel(Family.BERNOULLI, 0.05), ArmModel(Family.BERNOULLI, 0.15))),),
        )
        policies = (
            PolicySpec.make("lbsda"),
            PolicySpec.make("lbsda-lm", {"schedule": "additive", "floor": 50}),
            PolicySpec.make("klucb"),
            PolicySpec.make("ts"),
        )
    elif name == "fig4-bernoulli-switching":
        starts = _four_phase_starts(T)
        env = EnvironmentSpec(
            3,
            T,
            tuple(
                (start, tuple(ArmModel(Family.BERNOULLI, m) for m in row))
                for start, row in zip(starts, _SWITCHING_BERNOULLI_MEANS)
            ),
        )
        policies = (
            PolicySpec.make("sw-lbsda"),
            PolicySpec.make("sw-klucb"),
            PolicySpec.make("d-klucb"),
            PolicySpec.make("sw-ts"),
            PolicySpec.make("dts"),
            PolicySpec.make("exp3s"),
        )
    else:
        starts = _four_phase_starts(T)
        sigmas = _VARYING_SIGMAS if name == "gauss-sigma-varying" else (0.5,) * 4
        env = EnvironmentSpec(
            3,
            T,
            tuple(
                (start, tuple(ArmModel(Family.GAUSSIAN, m, sigma) for m in row))
                for start, row, sigma in zip(starts, _SWITCHING_GAUSSIAN_MEANS, sigmas)
            ),
        )
        policies = (
            PolicySpec.make("sw-lbsda"),
            PolicySpec.make("ucb1"),
            PolicySpec.make("sw-ucb"),
            PolicySpec.make("d-ucb"),
            PolicySpec.make("sw-klucb"),
            PolicySpec.make("d-klucb"),
            PolicySpec.make("sw-ts"),
            PolicySpec.make("dts"),
        )
    return ExperimentConfig(
        environment=env,
        policies=policies,
        replications=reps,
        base_seed=base_seed,
    )
