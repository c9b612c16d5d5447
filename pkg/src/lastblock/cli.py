"""Command-line front end.

Subcommands:

* ``run``          simulate a config file or preset, write CSV + manifest
* ``verify``       drive the checker suites (balance, lemma-wt, sw-leader,
                   storage, all)
* ``presets``      list the named experiment presets
* ``export-traj``  run one replication and export its round log as JSONL

Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime failure,
4 invariant violation.  ``LASTBLOCK_OUT_DIR`` sets the default output
directory for ``run``.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .config import PRESET_SUMMARIES, build_preset, parse_config, preset_names
from .envs import ArmModel, EnvironmentSpec, Family
from .harness import (
    ConfigurationError,
    ExperimentConfig,
    PolicySpec,
    SimulationError,
    persist,
    run_experiment,
    run_replication,
)
from .history import MemorySchedule, ScheduleForm
from .verify import (
    balance_bound_grid_report,
    balance_exact_bernoulli,
    balance_monte_carlo,
    check_lemma_wt,
    check_lm_storage,
    check_sw_leader_bound,
    export_trajectory,
    random_bernoulli_query,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_INVARIANT = 4


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lastblock", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config or preset")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="path to a YAML experiment config")
    source.add_argument("--preset", choices=preset_names(), help="named preset")
    run.add_argument("--replications", type=int, help="override replication count")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--horizon", type=int, help="override the horizon (presets only)")
    run.add_argument("--workers", type=int, default=1, help="worker processes")
    run.add_argument(
        "--out-dir",
        default=os.environ.get("LASTBLOCK_OUT_DIR", "results"),
        help="output directory (env LASTBLOCK_OUT_DIR)",
    )
    run.add_argument(
        "--full-series",
        action="store_true",
        help="checkpoint every time step instead of ~200 log-spaced ones",
    )

    verify = sub.add_parser("verify", help="run checker suites")
    verify.add_argument(
        "suite",
        choices=["balance", "lemma-wt", "sw-leader", "storage", "all"],
    )
    verify.add_argument("--runs", type=int, default=50, help="trajectories per suite")
    verify.add_argument("--horizon", type=int, help="horizon for simulated suites")
    verify.add_argument("--seed", type=int, default=20240601)
    verify.add_argument(
        "--samples", type=int, default=200_000, help="Monte Carlo samples per query"
    )
    verify.add_argument(
        "--queries", type=int, default=30, help="randomized balance queries"
    )
    verify.add_argument(
        "--schedule",
        default="additive:50",
        help="memory schedule, 'additive:FLOOR[:COEFF]' or 'max:FLOOR[:COEFF]'",
    )
    verify.add_argument("--window", type=int, help="sliding window override")

    sub.add_parser("presets", help="list named presets")

    traj = sub.add_parser("export-traj", help="export one replication's round log")
    tsource = traj.add_mutually_exclusive_group(required=True)
    tsource.add_argument("--config", help="path to a YAML experiment config")
    tsource.add_argument("--preset", choices=preset_names())
    traj.add_argument("--policy", required=True, help="policy name from the config")
    traj.add_argument("--seed", type=int, help="replication seed override")
    traj.add_argument("--horizon", type=int, help="horizon override (presets only)")
    traj.add_argument("--out", required=True, help="output JSONL path")
    return parser


def _load_run_config(args) -> ExperimentConfig:
    if args.preset:
        return build_preset(
            args.preset,
            horizon=args.horizon,
            replications=args.replications,
            seed=args.seed,
        )
    if args.horizon is not None:
        raise ConfigurationError("--horizon only applies to presets; edit the config")
    config = parse_config(args.config)
    if args.replications is not None or args.seed is not None:
        config = ExperimentConfig(
            environment=config.environment,
            policies=config.policies,
            replications=args.replications or config.replications,
            base_seed=args.seed if args.seed is not None else config.base_seed,
            record_trajectories=config.record_trajectories,
            invariant_checks=config.invariant_checks,
            checkpoints=config.checkpoints,
        )
    return config


def _cmd_run(args) -> int:
    config = _load_run_config(args)
    if args.full_series:
        config = ExperimentConfig(
            environment=config.environment,
            policies=config.policies,
            replications=config.replications,
            base_seed=config.base_seed,
            record_trajectories=config.record_trajectories,
            invariant_checks=config.invariant_checks,
            checkpoints=tuple(range(1, config.horizon + 1)),
        )
    started = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        result = run_experiment(config, workers=args.workers)
    csv_path, manifest_path = persist(result, args.out_dir)
    elapsed = time.perf_counter() - started

    print(f"wrote {csv_path} and {manifest_path} in {elapsed:.1f}s")
    header = f"{'policy':<14} {'final regret':>12} {'q25':>10} {'q75':>10} {'wall s':>8}"
    print(header)
    print("-" * len(header))
    violations = 0
    for pspec in config.policies:
        agg = result.per_policy[pspec.name]
        summary = agg.final_regret_summary
        print(
            f"{agg.policy:<14} {summary['mean']:>12.2f} {summary['q25']:>10.2f} "
            f"{summary['q75']:>10.2f} {agg.wall_time:>8.1f}"
        )
        violations += agg.invariant_violations
    if violations and config.invariant_checks:
        print(f"invariant violations detected: {violations}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _random_bernoulli_env(
    rng: np.random.Generator, num_arms: int, horizon: int
) -> EnvironmentSpec:
    means = rng.uniform(0.1, 0.9, size=num_arms)
    models = tuple(ArmModel(Family.BERNOULLI, float(m)) for m in means)
    return EnvironmentSpec(num_arms, horizon, ((1, models),))


def _switching_bernoulli_env(horizon: int) -> EnvironmentSpec:
    from .config import _SWITCHING_BERNOULLI_MEANS, _four_phase_starts

    starts = _four_phase_starts(horizon)
    return EnvironmentSpec(
        3,
        horizon,
        tuple(
            (start, tuple(ArmModel(Family.BERNOULLI, m) for m in row))
            for start, row in zip(starts, _SWITCHING_BERNOULLI_MEANS)
        ),
    )


def _trajectory_for(env: EnvironmentSpec, pspec: PolicySpec, seed: int):
    config = ExperimentConfig(
        environment=env,
        policies=(pspec,),
        replications=1,
        base_seed=seed,
        record_trajectories=True,
        invariant_checks=False,
    )
    return run_replication(config, pspec, seed).trajectory


def _verify_lemma_wt(args) -> list:
    rng = np.random.default_rng(args.seed)
    horizon = args.horizon or 5000
    reports = []
    for i in range(args.runs):
        num_arms = 2 if i % 2 == 0 else 5
        env = _random_bernoulli_env(rng, num_arms, horizon)
        traj = _trajectory_for(env, PolicySpec.make("lbsda"), args.seed + i)
        reports.append(check_lemma_wt(traj))
    return reports


def _verify_sw_leader(args) -> list:
    horizon = args.horizon or 10_000
    env = _switching_bernoulli_env(horizon)
    window = args.window
    reports = []
    for i in range(args.runs):
        pspec = (
            PolicySpec.make("sw-lbsda", {"window": window})
            if window
            else PolicySpec.make("sw-lbsda")
        )
        traj = _trajectory_for(env, pspec, args.seed + i)
        reports.append(check_sw_leader_bound(traj))
    return reports


def _parse_schedule(text: str) -> MemorySchedule:
    parts = text.split(":")
    try:
        form = ScheduleForm(parts[0])
        floor = int(parts[1]) if len(parts) > 1 else 50
        coeff = float(parts[2]) if len(parts) > 2 else 1.0
        return MemorySchedule(form, floor, coeff)
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(
            f"--schedule: expected 'additive:FLOOR[:COEFF]' or 'max:FLOOR[:COEFF]', "
            f"got {text!r} ({exc})"
        ) from exc


def _verify_storage(args) -> list:
    rng = np.random.default_rng(args.seed)
    horizon = args.horizon or 10_000
    schedule = _parse_schedule(args.schedule)
    params = {
        "schedule": schedule.form.value,
        "floor": schedule.floor,
        "coefficient": schedule.coefficient,
    }
    reports = []
    for i in range(max(args.runs // 10, 1)):
        env = _random_bernoulli_env(rng, 2 if i % 2 == 0 else 5, horizon)
        traj = _trajectory_for(env, PolicySpec.make("lbsda-lm", params), args.seed + i)
        report = check_lm_storage(traj)
        peak = max(max(e.stored_lengths) for e in traj.rounds)
        report.detail = f"peak stored {peak}, cap {schedule.capacity(horizon)}"
        reports.append(report)
    return reports


def _verify_balance(args) -> list:
    rng = np.random.default_rng(args.seed)
    grid_report = balance_bound_grid_report()
    reports = [grid_report]
    agree = 0
    worst = 0.0
    for _ in range(args.queries):
        query = random_bernoulli_query(rng)
        exact = balance_exact_bernoulli(query)
        estimate, stderr = balance_monte_carlo(query, args.samples, rng)
        gap = abs(estimate - exact)
        if gap <= 3.0 * stderr + 1e-12:
            agree += 1
        worst = max(worst, gap / stderr if stderr > 0 else 0.0)
    from .verify import CheckReport

    reports.append(
        CheckReport(
            name="balance-monte-carlo-agreement",
            checked=args.queries,
            violations=args.queries - agree,
            first_violation_round=None,
            detail=f"worst |err|/se {worst:.2f}",
        )
    )
    return reports


def _cmd_verify(args) -> int:
    suites = {
        "balance": _verify_balance,
        "lemma-wt": _verify_lemma_wt,
        "sw-leader": _verify_sw_leader,
        "storage": _verify_storage,
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    failed = False
    for name in names:
        reports = suites[name](args)
        total_checked = sum(r.checked for r in reports)
        total_violations = sum(r.violations for r in reports)
        status = "pass" if total_violations == 0 else "FAIL"
        print(f"[{status}] {name}: {total_violations} violations over {total_checked} checks")
        for report in reports:
            if not report.passed:
                print(f"    {report}")
                failed = True
    return EXIT_INVARIANT if failed else EXIT_OK


def _cmd_presets() -> int:
    for name in preset_names():
        print(f"{name:<28} {PRESET_SUMMARIES[name]}")
    return EXIT_OK


def _cmd_export_traj(args) -> int:
    if args.preset:
        config = build_preset(args.preset, horizon=args.horizon)
    else:
        config = parse_config(args.config)
    matches = [p for p in config.policies if p.name == args.policy]
    if not matches:
        raise ConfigurationError(
            f"--policy: {args.policy!r} not in config; available: "
            f"{', '.join(p.name for p in config.policies)}"
        )
    seed = args.seed if args.seed is not None else config.base_seed
    traj = _trajectory_for(config.environment, matches[0], seed)
    if traj is None:
        raise SimulationError(f"policy {args.policy} does not produce a round log")
    export_trajectory(traj, args.out)
    print(f"wrote {len(traj.rounds)} rounds to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "presets":
            return _cmd_presets()
        return _cmd_export_traj(args)
    except ConfigurationError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
