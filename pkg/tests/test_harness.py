"""Harness: config parsing, artifacts, checkpoint round trips, resume
equality, plotting, CLI exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from teamregret import diffcore as dc
from teamregret.diffcore import Tensor
from teamregret.harness import (
    CSV_HEADER,
    ConfigError,
    build_env,
    load_checkpoint,
    load_config,
    moving_average,
    restore_trainer,
    run_eval,
    run_train,
    save_checkpoint,
)
from teamregret.harness.cli import main as cli_main
from teamregret.harness.config import RunConfig
from teamregret.harness.plotting import emit_plots
from teamregret.trainer import TrainConfig, Trainer
from teamregret.belief import FilterConfig

FAST_MATRIX = """
[run]
method = vrm
env = matrix
iterations = 6
eval_cadence = 3
eval_episodes = 4

[train]
batch_episodes = 4
hidden_width = 8
hidden_depth = 1

[belief]
particles = 3
hidden_dim = 4
kappa_dim = 4
net_width = 4
"""


@pytest.fixture
def matrix_config(tmp_path):
    cfg = tmp_path / "matrix.ini"
    cfg.write_text(FAST_MATRIX)
    return cfg


def write_battle_config(tmp_path, method="bvrm_shaping"):
    cfg = tmp_path / "battle.ini"
    cfg.write_text(f"""
[run]
method = {method}
env = battle
iterations = 2
eval_cadence = 2
eval_episodes = 2

[train]
batch_episodes = 1
hidden_width = 8
hidden_depth = 1

[belief]
particles = 2
hidden_dim = 4
kappa_dim = 4
net_width = 4

[env]
width = 8
height = 6
team_size = 2
max_ticks = 8
""")
    return cfg


class TestConfig:
    def test_defaults_and_overrides(self, matrix_config):
        config = load_config(matrix_config, seed=5)
        assert config.method == "vrm" and config.env == "matrix"
        assert config.iterations == 6 and config.seed == 5
        assert config.train.batch_episodes == 4
        assert config.filter.particles == 3
        # matrix-specific exploration defaults apply when not overridden
        assert config.train.epsilon_end == 0.2

    def test_cli_iteration_override(self, matrix_config):
        assert load_config(matrix_config, iterations=99).iterations == 99

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[run]\nmethod = vrm\nenv = matrix\nbogus = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            load_config(cfg)

    def test_unknown_method_rejected(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[run]\nmethod = coma\nenv = matrix\n")
        with pytest.raises(ConfigError, match="coma"):
            load_config(cfg)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.ini")

    def test_battle_env_options(self, tmp_path):
        config = load_config(write_battle_config(tmp_path))
        env = build_env(config)
        assert env.spec.n_agents == 2
        assert env.config.width == 8


class TestRunTrain:
    def test_artifacts_and_schema(self, matrix_config, tmp_path):
        out = tmp_path / "run"
        config = load_config(matrix_config, seed=1)
        report = run_train(config, out, single_thread=True)
        lines = (out / "metrics.csv").read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 1 + 6  # one row per iteration
        # cadence rows carry mean_return, off-cadence rows leave it empty
        row3 = lines[3].split(",")
        row4 = lines[4].split(",")
        assert row3[2] != "" and row4[2] == ""
        assert (out / "final.bin").exists()
        assert (out / "ckpt_000003.bin").exists()
        assert (out / "final_report.json").exists()
        meta = json.loads((out / "metrics.csv.meta.json").read_text())
        assert meta["seed"] == 1 and meta["config"]["method"] == "vrm"
        assert report["iterations"] == 6

    def test_single_thread_reruns_byte_identical(self, matrix_config, tmp_path):
        config = load_config(matrix_config, seed=3)
        run_train(config, tmp_path / "a", single_thread=True)
        run_train(config, tmp_path / "b", single_thread=True)
        a = (tmp_path / "a" / "metrics.csv").read_bytes()
        b = (tmp_path / "b" / "metrics.csv").read_bytes()
        assert a == b

    def test_wall_seconds_recorded_outside_strict_mode(self, matrix_config, tmp_path):
        config = load_config(matrix_config, seed=3)
        run_train(config, tmp_path / "a", single_thread=False)
        rows = (tmp_path / "a" / "metrics.csv").read_text().splitlines()[1:]
        assert all(r.split(",")[1] != "" for r in rows)

    def test_unwritable_output_fails_before_training(self, matrix_config, tmp_path):
        config = load_config(matrix_config)
        target = tmp_path / "blocked"
        target.write_text("a file, not a directory")
        with pytest.raises(RuntimeError, match="not writable"):
            run_train(config, target)

    def test_battle_run_writes_win_rate(self, tmp_path):
        config = load_config(write_battle_config(tmp_path), seed=0)
        out = tmp_path / "battle_run"
        run_train(config, out, single_thread=True)
        rows = (tmp_path / "battle_run" / "metrics.csv").read_text().splitlines()[1:]
        final = rows[-1].split(",")
        assert final[3] != ""  # win_rate present at cadence
        assert 0.0 <= float(final[3]) <= 1.0


class TestCheckpoint:
    def test_round_trip_bit_exact(self, matrix_config, tmp_path):
        config = load_config(matrix_config, seed=2)
        out = tmp_path / "run"
        run_train(config, out, single_thread=True)
        trainer, _ = restore_trainer(out / "final.bin")
        loaded = load_checkpoint(out / "final.bin")
        for group, params in trainer.bundle.param_groups().items():
            for p, q in zip(params, loaded.bundle.param_groups()[group]):
                assert p.data.tobytes() == q.data.tobytes()

    def test_resume_equals_uninterrupted(self, matrix_config, tmp_path):
        config = load_config(matrix_config, seed=4)
        full = tmp_path / "full"
        run_train(config, full, single_thread=True)

        # resume from the mid-run cadence checkpoint in a fresh directory
        resumed = tmp_path / "resumed"
        again = load_config(matrix_config, seed=4)
        run_train(again, resumed, single_thread=True,
                  resume=full / "ckpt_000003.bin")

        assert (full / "final.bin").read_bytes() == (resumed / "final.bin").read_bytes()
        full_rows = (full / "metrics.csv").read_text().splitlines()
        res_rows = (resumed / "metrics.csv").read_text().splitlines()
        assert full_rows[4:] == res_rows[1:]  # iterations 4..6 match exactly

    def test_resume_with_mismatched_config_rejected(self, matrix_config, tmp_path):
        config = load_config(matrix_config, seed=4)
        run_train(config, tmp_path / "a", single_thread=True)
        other = load_config(matrix_config, seed=5)
        with pytest.raises(ValueError, match="different config"):
            run_train(other, tmp_path / "b", resume=tmp_path / "a" / "final.bin")

    def test_truncated_checkpoint_fails_cleanly(self, matrix_config, tmp_path):
        config = load_config(matrix_config, seed=2)
        run_train(config, tmp_path / "run", single_thread=True)
        blob = (tmp_path / "run" / "final.bin").read_bytes()
        bad = tmp_path / "broken.bin"
        bad.write_bytes(blob[: len(blob) // 3])
        with pytest.raises(Exception, match="truncated|header"):
            load_checkpoint(bad)


class TestRunEval:
    def test_episode_count_and_report_shape(self, matrix_config, tmp_path):
        config = load_config(matrix_config, seed=2)
        run_train(config, tmp_path / "run", single_thread=True)
        report = run_eval(tmp_path / "run" / "final.bin", episodes=7, seed=1)
        assert report.episodes == 7
        assert len(report.returns) == 7
        assert report.win_rate is None  # matrix game has no win rate

    def test_optimal_policy_scores_the_oracle_optimum(self, matrix_config, tmp_path):
        config = load_config(matrix_config, seed=2)
        out = tmp_path / "run"
        run_train(config, out, single_thread=True)
        trainer, cfg = restore_trainer(out / "final.bin")
        # hand-build an optimal policy: positive regret only for action 0
        for net in (trainer.bundle.q_net, trainer.bundle.v_net):
            for p in net.params:
                p.data[...] = 0.0
        trainer.bundle.q_net.params[-1].data[...] = [1.0, 0.0]
        save_checkpoint(trainer, out / "optimal.bin", cfg)
        report = run_eval(out / "optimal.bin", episodes=12, seed=3)
        assert report.mean_return == pytest.approx(8.0)
        assert np.ptp(report.returns) == 0.0

    def test_battle_self_play_is_balanced(self, tmp_path):
        config = load_config(write_battle_config(tmp_path), seed=0)
        out = tmp_path / "battle_run"
        run_train(config, out, single_thread=True)
        report = run_eval(out / "final.bin", episodes=6, opponent="self", seed=2)
        assert report.win_rate is not None
        assert 0.0 <= report.win_rate <= 1.0

    def test_checkpoint_opponent_env_mismatch_detected(self, matrix_config, tmp_path):
        battle_cfg = load_config(write_battle_config(tmp_path), seed=0)
        run_train(battle_cfg, tmp_path / "b", single_thread=True)
        matrix_cfg = load_config(matrix_config, seed=0)
        run_train(matrix_cfg, tmp_path / "m", single_thread=True)
        with pytest.raises(ValueError, match="does not match"):
            run_eval(tmp_path / "b" / "final.bin", episodes=2,
                     opponent=str(tmp_path / "m" / "final.bin"))


class TestPlot:
    def make_csv(self, path, rows):
        lines = [CSV_HEADER] + rows
        Path(path).write_text("\n".join(lines) + "\n")

    def test_single_series_svg(self, tmp_path):
        csv_path = tmp_path / "one.csv"
        self.make_csv(csv_path, [f"{i},,{7 + i * 0.1},,0.5,0.2,0.1,1.0" for i in range(5)])
        out = emit_plots([csv_path], tmp_path / "plot.svg", column="mean_return")
        text = out.read_text()
        assert text.lstrip().startswith("<?xml")
        assert "one" in text  # legend label

    def test_window_smoothing_preserves_constants(self):
        assert moving_average([3.0] * 10, 4) == [3.0] * 10

    def test_six_series(self, tmp_path):
        paths = []
        for name in ("vrm", "bvrm", "bvrm_shaping", "iql", "vdn", "arm"):
            p = tmp_path / f"{name}.csv"
            self.make_csv(p, [f"{i},,{i},,0,0,0,0" for i in range(4)])
            paths.append(p)
        out = emit_plots(paths, tmp_path / "all.svg", column="mean_return", window=2)
        text = out.read_text()
        for name in ("bvrm_shaping", "iql", "vdn"):
            assert name in text

    def test_schema_mismatch_names_offender(self, tmp_path):
        good = tmp_path / "good.csv"
        self.make_csv(good, ["1,,7,,0,0,0,0"])
        bad = tmp_path / "bad.csv"
        bad.write_text("iteration,foo\n1,2\n")
        with pytest.raises(ValueError, match="bad.csv"):
            emit_plots([good, bad], tmp_path / "x.svg")

    def test_empty_win_rate_rows_skipped(self, tmp_path):
        p = tmp_path / "wr.csv"
        self.make_csv(p, ["1,,7,,0,0,0,0", "2,,7,0.5,0,0,0,0", "3,,8,0.7,0,0,0,0"])
        out = emit_plots([p], tmp_path / "wr.svg", column="win_rate")
        assert out.exists()


class TestCli:
    def test_train_eval_plot_check_loop(self, matrix_config, tmp_path):
        out = tmp_path / "run"
        rc = cli_main(["train", "--config", str(matrix_config), "--out", str(out),
                       "--seed", "1", "--iterations", "4", "--single-thread"])
        assert rc == 0
        rc = cli_main(["eval", "--checkpoint", str(out / "final.bin"),
                       "--episodes", "3"])
        assert rc == 0
        rc = cli_main(["plot", "--column", "mean_return",
                       "--out", str(tmp_path / "p.svg"), str(out / "metrics.csv")])
        assert rc == 0
        rc = cli_main(["check", "consistency", "--agents", "2", "--actions", "3",
                       "--trials", "200", "--seed", "0"])
        assert rc == 0

    def test_usage_error_exit_1(self):
        assert cli_main(["train", "--config"]) == 1
        assert cli_main(["bogus"]) == 1

    def test_runtime_error_exit_2(self, tmp_path):
        rc = cli_main(["eval", "--checkpoint", str(tmp_path / "missing.bin"),
                       "--episodes", "2"])
        assert rc == 2

    def test_consistency_violation_exit_3(self, monkeypatch):
        from teamregret import regret as rg

        def fake(n_agents, n_actions, trials, rng, chunk=1000):
            return rg.ConsistencyReport(n_agents, n_actions, trials, violations=3)

        monkeypatch.setattr(rg, "consistency_check", fake)
        rc = cli_main(["check", "consistency", "--agents", "2", "--actions", "2",
                       "--trials", "10", "--seed", "0"])
        assert rc == 3
