"""Simulation loops, regret accounting, aggregation, persistence."""
import numpy as np
import pytest

from lastblock.envs import ArmModel, EnvironmentSpec, Family, stationary
from lastblock.harness import (
    ConfigurationError,
    ExperimentConfig,
    PolicySpec,
    default_checkpoints,
    load_regret_csv,
    make_policy,
    persist,
    run_experiment,
    run_replication,
)


def bern(mean):
    return ArmModel(Family.BERNOULLI, mean)


def simple_config(policies, horizon=100, replications=1, seed=0, **kwargs):
    env = stationary([bern(0.9), bern(0.5)], horizon)
    return ExperimentConfig(env, tuple(policies), replications, seed, **kwargs)


class TestRunReplication:
    def test_oracle_zero_regret(self):
        cfg = simple_config([PolicySpec.make("oracle")])
        rec = run_replication(cfg, cfg.policies[0], 0)
        assert np.all(rec.cumulative_regret == 0.0)
        assert sum(rec.pulls) == 100

    def test_fixed_arm_regret_series(self):
        cfg = simple_config([PolicySpec.make("fixed", {"arm": 1})], horizon=3)
        rec = run_replication(cfg, cfg.policies[0], 0)
        assert rec.cumulative_regret == pytest.approx([0.4, 0.8, 1.2])

    def test_round_policy_pull_total_is_horizon(self):
        cfg = simple_config([PolicySpec.make("lbsda")], horizon=257)
        rec = run_replication(cfg, cfg.policies[0], 3)
        assert sum(rec.pulls) == 257

    def test_truncated_round_respects_horizon(self):
        # K=5 with horizon not divisible by the round sizes forces a
        # mid-round truncation at t == T
        env = stationary([bern(0.2)] * 5, 13)
        spec = PolicySpec.make("lbsda")
        cfg = ExperimentConfig(env, (spec,), 1, 1)
        rec = run_replication(cfg, spec, 1)
        assert sum(rec.pulls) == 13

    def test_breakpoint_respected_mid_round(self):
        # disjoint supports: phase 1 rewards are exactly 0, phase 2 exactly 1;
        # the breakpoint lands inside the first K-pull round
        # disjoint supports: phase 1 rewards are exactly 0, phase 2 exactly 1;
        # the breakpoint at t=2 lands inside round 1 (which pulls t=1,2,3)
        env = EnvironmentSpec(3, 6, ((1, (bern(0.0),) * 3), (2, (bern(1.0),) * 3)))
        spec = PolicySpec.make("lbsda")
        cfg = ExperimentConfig(env, (spec,), 1, 5, record_trajectories=True)
        rec = run_replication(cfg, spec, 5)
        first_round = rec.trajectory.rounds[0]
        assert first_round.pulled == (0, 1, 2)
        # the leader after round 1 is tie-broken by reward sums, and with
        # disjoint supports only the t=1 pull can have drawn a zero: the
        # arm pulled first must never win the sum tie-break
        assert first_round.leader != 0
        # all means are equal within each phase, so regret stays zero
        assert rec.cumulative_regret[-1] == 0.0

    def test_family_mismatch_fails_before_simulation(self):
        env = stationary([ArmModel(Family.POISSON, 1.0), ArmModel(Family.POISSON, 2.0)], 50)
        spec = PolicySpec.make("ts")
        cfg = ExperimentConfig(env, (spec,), 1, 0)
        with pytest.raises(ConfigurationError):
            run_replication(cfg, spec, 0)

    def test_unknown_policy_name(self):
        env = stationary([bern(0.1), bern(0.2)], 10)
        with pytest.raises(ConfigurationError, match="unknown name"):
            make_policy(PolicySpec.make("zoom"), env, np.random.default_rng(0))

    def test_stationary_window_fallback_warns(self):
        # a windowed policy without breakpoints gets window = horizon,
        # loudly rather than silently
        env = stationary([bern(0.1), bern(0.2)], 60)
        with pytest.warns(UserWarning, match="window defaults to the horizon"):
            policy = make_policy(
                PolicySpec.make("sw-ucb"), env, np.random.default_rng(0)
            )
        assert policy._stats.window == 60
        with pytest.warns(UserWarning, match="discount defaults to 1.0"):
            make_policy(PolicySpec.make("d-ucb"), env, np.random.default_rng(0))

    def test_tuned_defaults_applied_on_switching_env(self):
        env = EnvironmentSpec(
            2, 10_000, ((1, (bern(0.2), bern(0.8))), (5001, (bern(0.8), bern(0.2))))
        )
        policy = make_policy(PolicySpec.make("sw-lbsda"), env, np.random.default_rng(0))
        # 2 sqrt(T ln T / 1), rounded with ties down
        assert policy.window == 607

    def test_single_seed_desk_scale_run(self):
        # Bernoulli (0.05, 0.15) at T=1e4: the weak arm stays rare
        env = stationary([bern(0.05), bern(0.15)], 10_000)
        spec = PolicySpec.make("lbsda")
        cfg = ExperimentConfig(env, (spec,), 1, 123, invariant_checks=False)
        rec = run_replication(cfg, spec, 123)
        assert np.isfinite(rec.cumulative_regret[-1])
        assert rec.pulls[0] < 1000

    def test_sda_policies_accept_any_family(self):
        env = stationary(
            [ArmModel(Family.EXPONENTIAL, 1.0), ArmModel(Family.EXPONENTIAL, 2.0)], 200
        )
        spec = PolicySpec.make("lbsda")
        cfg = ExperimentConfig(env, (spec,), 1, 0)
        rec = run_replication(cfg, spec, 0)
        assert rec.pulls[1] > rec.pulls[0]


class TestRunExperiment:
    def test_single_replication_matches_run_record(self):
        cfg = simple_config([PolicySpec.make("lbsda")], horizon=300, seed=17)
        rec = run_replication(cfg, cfg.policies[0], 17)
        agg = run_experiment(cfg).per_policy["lbsda"]
        points = np.asarray(cfg.resolved_checkpoints()) - 1
        assert np.array_equal(agg.mean_regret, rec.cumulative_regret[points])
        assert np.array_equal(agg.q25, agg.q75)

    def test_worker_count_does_not_change_results(self):
        cfg = simple_config(
            [PolicySpec.make("lbsda"), PolicySpec.make("ucb1")],
            horizon=400,
            replications=6,
            seed=5,
            invariant_checks=False,
        )
        seq = run_experiment(cfg, workers=1)
        par = run_experiment(cfg, workers=3)
        for name in ("lbsda", "ucb1"):
            assert np.array_equal(
                seq.per_policy[name].mean_regret, par.per_policy[name].mean_regret
            )
            assert np.array_equal(seq.per_policy[name].q25, par.per_policy[name].q25)

    def test_regret_series_nondecreasing_and_bounded(self):
        cfg = simple_config([PolicySpec.make("lbsda")], horizon=500, seed=2)
        rec = run_replication(cfg, cfg.policies[0], 2)
        diffs = np.diff(rec.cumulative_regret)
        assert np.all(diffs >= -1e-12)
        assert rec.cumulative_regret[-1] <= 500 * 0.4 + 1e-9

    def test_duplicate_policy_names_rejected(self):
        with pytest.raises(ConfigurationError):
            simple_config([PolicySpec.make("lbsda"), PolicySpec.make("lbsda")])

    def test_invariant_checks_populate_counts(self):
        cfg = simple_config([PolicySpec.make("lbsda")], horizon=400, replications=2)
        res = run_experiment(cfg)
        assert res.per_policy["lbsda"].invariant_violations == 0


class TestCheckpoints:
    def test_default_includes_endpoints(self):
        pts = default_checkpoints(10_000)
        assert pts[0] == 1 and pts[-1] == 10_000
        assert len(pts) <= 200
        assert list(pts) == sorted(set(pts))

    def test_small_horizon_is_dense(self):
        assert default_checkpoints(50) == tuple(range(1, 51))

    def test_invalid_checkpoints_rejected(self):
        with pytest.raises(ConfigurationError):
            simple_config([PolicySpec.make("lbsda")], checkpoints=(0, 5))
        with pytest.raises(ConfigurationError):
            simple_config([PolicySpec.make("lbsda")], horizon=10, checkpoints=(5, 11))


class TestPersist:
    def test_empty_checkpoint_list_header_only(self, tmp_path):
        cfg = simple_config([PolicySpec.make("fixed", {"arm": 1})], checkpoints=())
        res = run_experiment(cfg)
        csv_path, _ = persist(res, tmp_path)
        assert open(csv_path).read() == "t,policy,mean_regret,q25,q75\n"

    def test_single_policy_single_rep_row(self, tmp_path):
        cfg = simple_config(
            [PolicySpec.make("fixed", {"arm": 1})], horizon=1, checkpoints=(1,)
        )
        res = run_experiment(cfg)
        csv_path, manifest_path = persist(res, tmp_path)
        lines = open(csv_path).read().splitlines()
        assert lines[0] == "t,policy,mean_regret,q25,q75"
        assert lines[1] == "1,fixed,0.4,0.4,0.4"

    def test_round_trip_full_precision(self, tmp_path):
        cfg = simple_config(
            [PolicySpec.make("lbsda")], horizon=300, replications=3, seed=9
        )
        res = run_experiment(cfg)
        csv_path, _ = persist(res, tmp_path)
        loaded = load_regret_csv(csv_path)["lbsda"]
        agg = res.per_policy["lbsda"]
        assert np.array_equal(loaded["mean_regret"], agg.mean_regret)
        assert np.array_equal(loaded["q25"], agg.q25)
        assert np.array_equal(loaded["q75"], agg.q75)

    def test_band_ordering(self, tmp_path):
        cfg = simple_config(
            [PolicySpec.make("ts")], horizon=200, replications=8, seed=1
        )
        res = run_experiment(cfg)
        agg = res.per_policy["ts"]
        assert np.all(agg.q25 <= agg.q75 + 1e-12)

    def test_manifest_contents(self, tmp_path):
        import json

        cfg = simple_config([PolicySpec.make("lbsda")], replications=2, seed=11)
        res = run_experiment(cfg)
        _, manifest_path = persist(res, tmp_path)
        manifest = json.loads(open(manifest_path).read())
        assert manifest["horizon"] == 100
        assert manifest["seeds"] == [11, 12]
        assert manifest["environment"]["family"] == "bernoulli"
        assert manifest["environment"]["means"] == [[0.9, 0.5]]
        assert manifest["policies"][0]["name"] == "lbsda"
