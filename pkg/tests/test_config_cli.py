"""Config parsing, presets, and the command-line interface."""
import json

import pytest

from lastblock.cli import main
from lastblock.config import (
    build_config,
    build_preset,
    parse_config,
    preset_names,
    serialize_config,
)
from lastblock.harness import ConfigurationError

MINIMAL = {
    "horizon": 100,
    "replications": 2,
    "seed": 7,
    "environment": {
        "family": "bernoulli",
        "num_arms": 2,
        "breakpoints": [1],
        "means": [[0.05, 0.15]],
    },
    "policies": [{"name": "lbsda"}],
}


def write_config(tmp_path, raw):
    import yaml

    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(raw))
    return str(path)


class TestParseConfig:
    def test_minimal_single_phase(self, tmp_path):
        config = parse_config(write_config(tmp_path, MINIMAL))
        assert config.environment.num_breakpoints == 0
        assert config.horizon == 100
        assert config.policies[0].name == "lbsda"

    def test_mean_out_of_support_names_field(self):
        raw = json.loads(json.dumps(MINIMAL))
        raw["environment"]["means"] = [[0.05, 1.3]]
        with pytest.raises(ConfigurationError) as exc:
            build_config(raw)
        message = str(exc.value)
        assert "environment.means[0][1]" in message
        assert "[0, 1]" in message

    def test_unknown_policy_named(self):
        raw = json.loads(json.dumps(MINIMAL))
        raw["policies"] = [{"name": "mystery"}]
        with pytest.raises(ConfigurationError, match="policies\\[0\\].name"):
            build_config(raw)

    def test_breakpoints_out_of_range(self):
        raw = json.loads(json.dumps(MINIMAL))
        raw["environment"]["breakpoints"] = [1, 200]
        raw["environment"]["means"] = [[0.1, 0.2], [0.3, 0.4]]
        with pytest.raises(ConfigurationError, match="breakpoints"):
            build_config(raw)

    def test_window_below_arm_count(self):
        raw = json.loads(json.dumps(MINIMAL))
        raw["policies"] = [{"name": "sw-lbsda", "params": {"window": 1}}]
        with pytest.raises(ConfigurationError, match="window"):
            build_config(raw)

    def test_multiple_errors_collected(self):
        raw = json.loads(json.dumps(MINIMAL))
        raw["environment"]["means"] = [[1.5, -0.2]]
        raw["policies"] = [{"name": "nope"}]
        with pytest.raises(ConfigurationError) as exc:
            build_config(raw)
        assert len(exc.value.errors) >= 3

    def test_gaussian_scales_forms(self):
        raw = {
            "horizon": 40,
            "replications": 1,
            "seed": 1,
            "environment": {
                "family": "gaussian",
                "num_arms": 2,
                "breakpoints": [1, 21],
                "means": [[0.1, 0.2], [0.3, 0.4]],
                "scales": [0.5, [0.25, 1.0]],
            },
            "policies": [{"name": "lbsda"}],
        }
        config = build_config(raw)
        phases = config.environment.phases
        assert [m.scale for m in phases[0][1]] == [0.5, 0.5]
        assert [m.scale for m in phases[1][1]] == [0.25, 1.0]


class TestPresets:
    def test_fig3_contents(self):
        config = build_preset("fig3-bernoulli-stationary", replications=10, seed=3)
        env = config.environment
        assert env.num_arms == 2
        assert env.phases[0][1][0].mean == 0.05
        assert env.phases[0][1][1].mean == 0.15
        names = [p.name for p in config.policies]
        assert names == ["lbsda", "lbsda-lm", "klucb", "ts"]
        lm = config.policies[1].as_dict()
        assert lm == {"schedule": "additive", "floor": 50}

    def test_sigma_varying_scales(self):
        config = build_preset("gauss-sigma-varying")
        scales = [models[0].scale for _, models in config.environment.phases]
        assert scales == [0.5, 0.25, 1.0, 0.25]
        assert config.environment.phases[2][1][0].scale == 1.0

    def test_four_phase_partition(self):
        config = build_preset("fig4-bernoulli-switching", horizon=10_000)
        starts = [s for s, _ in config.environment.phases]
        assert starts == [1, 2501, 5001, 7501]
        assert config.environment.num_breakpoints == 3

    @pytest.mark.parametrize("name", preset_names())
    def test_round_trip(self, name, tmp_path):
        config = build_preset(name, horizon=400, replications=3, seed=11)
        text = serialize_config(config)
        path = tmp_path / "roundtrip.yaml"
        path.write_text(text)
        again = parse_config(path)
        assert again == config

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            build_preset("fig9")


class TestCli:
    def test_run_preset_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "results"
        code = main(
            [
                "run",
                "--preset",
                "fig3-bernoulli-stationary",
                "--horizon",
                "300",
                "--replications",
                "3",
                "--seed",
                "7",
                "--out-dir",
                str(out),
            ]
        )
        assert code == 0
        lines = (out / "regret.csv").read_text().splitlines()
        policies = {line.split(",")[1] for line in lines[1:]}
        assert policies == {"lbsda", "lbsda-lm", "klucb", "ts"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["replications"] == 3

    def test_run_config_file(self, tmp_path):
        import yaml

        cfg_path = tmp_path / "exp.yaml"
        cfg_path.write_text(yaml.safe_dump(MINIMAL))
        code = main(
            ["run", "--config", str(cfg_path), "--out-dir", str(tmp_path / "o")]
        )
        assert code == 0

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        raw = json.loads(json.dumps(MINIMAL))
        raw["environment"]["means"] = [[2.0, 0.1]]
        path = write_config(tmp_path, raw)
        assert main(["run", "--config", path]) == 2
        assert "environment.means" in capsys.readouterr().err

    def test_usage_error_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--bogus-flag"])
        assert exc.value.code == 1

    def test_unknown_suite_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "nonsense"])
        assert exc.value.code == 1

    def test_presets_listing(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        for name in preset_names():
            assert name in out

    def test_verify_storage_suite(self, capsys):
        code = main(
            ["verify", "storage", "--horizon", "500", "--runs", "10", "--seed", "5"]
        )
        assert code == 0
        assert "[pass] storage" in capsys.readouterr().out

    def test_verify_balance_suite(self, capsys):
        code = main(
            ["verify", "balance", "--queries", "3", "--samples", "2000", "--seed", "8"]
        )
        assert code == 0
        assert "[pass] balance" in capsys.readouterr().out

    def test_verify_lemma_wt_small(self, capsys):
        code = main(
            ["verify", "lemma-wt", "--runs", "4", "--horizon", "400", "--seed", "2"]
        )
        assert code == 0
        assert "[pass] lemma-wt" in capsys.readouterr().out

    def test_export_traj(self, tmp_path):
        out = tmp_path / "rounds.jsonl"
        code = main(
            [
                "export-traj",
                "--preset",
                "fig3-bernoulli-stationary",
                "--horizon",
                "200",
                "--policy",
                "lbsda",
                "--seed",
                "4",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines
        first = json.loads(lines[0])
        assert first["r"] == 1 and len(first["pulled"]) == 2

    def test_export_traj_unknown_policy(self, tmp_path, capsys):
        code = main(
            [
                "export-traj",
                "--preset",
                "fig3-bernoulli-stationary",
                "--policy",
                "zoom",
                "--out",
                str(tmp_path / "x.jsonl"),
            ]
        )
        assert code == 2
