"""Tests for episode rollouts and trajectory file round-trips."""

import json
import math

import numpy as np
import pytest

from resnav.env import EpisodeConfig, NavEnv, SensorConfig, Terminal
from resnav.errors import ConfigurationError, UsageError
from resnav.nn import Mlp
from resnav.policy import EndToEndPolicy, GatedResidualPolicy, PriorPolicy, RandomPolicy
from resnav.rollout import (
    TRAJ_COLUMNS,
    load_trajectory,
    meta_path_for,
    policy_rng,
    run_episode,
    save_trajectory,
)

from conftest import make_cluttered_world, make_empty_world


def residual_env(world, max_steps=300):
    return NavEnv(world, episode=EpisodeConfig(max_steps=max_steps), mode="residual")


class TestRunEpisode:
    def test_prior_reaches_goal_in_the_open(self):
        env = residual_env(make_empty_world())
        record = run_episode(env, PriorPolicy(), seed=5)
        assert record.success
        assert record.terminal is Terminal.GOAL
        assert record.steps == len(record.rows) - 1
        assert record.rows[0].t == 0
        assert record.rows[0].v_exec is None and record.rows[0].reward is None
        assert record.rows[-1].reward == 1.0

    def test_sparse_return_is_gamma_power(self):
        env = residual_env(make_empty_world())
        record = run_episode(env, PriorPolicy(), seed=5)
        gamma = env.episode.gamma
        assert record.discounted_return == pytest.approx(gamma ** (record.steps - 1))

    def test_path_length_matches_the_rows(self):
        env = residual_env(make_empty_world())
        record = run_episode(env, PriorPolicy(), seed=8)
        total = 0.0
        for a, b in zip(record.rows, record.rows[1:]):
            total += math.hypot(b.x - a.x, b.y - a.y)
        assert record.path_length_m == pytest.approx(total, abs=1e-12)

    def test_same_seed_pairs_start_and_goal_across_env_modes(self):
        world = make_empty_world()
        rec_res = run_episode(residual_env(world), PriorPolicy(), seed=21)
        e2e_env = NavEnv(world, episode=EpisodeConfig(max_steps=20), mode="end_to_end")
        actor = Mlp([19, 8, 2], "tanh", 0.0, rng=None)
        rec_e2e = run_episode(e2e_env, EndToEndPolicy(actor), seed=21)
        assert rec_res.start == rec_e2e.start
        assert rec_res.goal == rec_e2e.goal

    def test_gated_rows_expose_the_decision(self):
        world = make_cluttered_world()
        actor = Mlp([21, 16, 16, 2], "tanh", 0.3, rng=np.random.default_rng(3))
        for w in actor.weights:
            w *= 10.0
        env = residual_env(world, max_steps=60)
        record = run_episode(env, GatedResidualPolicy(actor, n_passes=20), seed=2)
        decided = [r for r in record.rows if r.t > 0]
        assert all(r.epsilon is not None and r.used_prior_only is not None for r in decided)
        for r in decided:
            if r.used_prior_only:
                assert r.v_exec == r.v_prior and r.omega_exec == r.omega_prior
            else:
                assert r.v_exec == pytest.approx(
                    min(max(r.v_prior + r.mu_dv, -1.0), 1.0), abs=1e-12
                )
                assert r.omega_exec == pytest.approx(
                    min(max(r.omega_prior + r.mu_dw, -1.0), 1.0), abs=1e-12
                )
        assert any(r.used_prior_only for r in decided)
        assert any(not r.used_prior_only for r in decided)

    def test_random_policy_rows_leave_unused_fields_empty(self):
        env = residual_env(make_empty_world(), max_steps=15)
        record = run_episode(env, RandomPolicy(), seed=0)
        for r in record.rows[1:]:
            assert r.mu_dv is None and r.epsilon is None
            assert r.v_prior is not None  # the env still computes it

    def test_policy_rng_is_stable(self):
        a = policy_rng(7).uniform(size=4)
        b = policy_rng(7).uniform(size=4)
        assert np.array_equal(a, b)
        c = policy_rng(8).uniform(size=4)
        assert not np.array_equal(a, c)


class TestTrajectoryFiles:
    def make_record(self, tmp_path, seed=3):
        env = residual_env(make_empty_world(), max_steps=40)
        record = run_episode(env, PriorPolicy(), seed=seed)
        path = tmp_path / "ep.csv"
        save_trajectory(record, env, path)
        return record, env, path

    def test_round_trip_preserves_rows(self, tmp_path):
        record, env, path = self.make_record(tmp_path)
        rows, meta = load_trajectory(path)
        assert rows == record.rows
        assert meta["mode"] == "prior"
        assert meta["seed"] == 3
        assert meta["success"] == record.success
        assert meta["world"]["width"] == env.world.width

    def test_rewrite_is_byte_identical(self, tmp_path):
        record, env, path = self.make_record(tmp_path)
        first = path.read_bytes()
        first_meta = meta_path_for(path).read_bytes()
        save_trajectory(record, env, path)
        assert path.read_bytes() == first
        assert meta_path_for(path).read_bytes() == first_meta

    def test_bad_header_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b\n")
        with pytest.raises(ConfigurationError, match="header"):
            load_trajectory(p)

    def test_wrong_field_count_reports_line(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text(",".join(TRAJ_COLUMNS) + "\n1,2\n")
        with pytest.raises(ConfigurationError, match=":2"):
            load_trajectory(p)

    def test_non_consecutive_steps_rejected(self, tmp_path):
        record, env, path = self.make_record(tmp_path)
        lines = path.read_text().splitlines()
        del lines[2]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ConfigurationError, match="consecutive"):
            load_trajectory(path)

    def test_missing_start_row_rejected(self, tmp_path):
        record, env, path = self.make_record(tmp_path)
        lines = path.read_text().splitlines()
        del lines[1]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ConfigurationError, match="t=0"):
            load_trajectory(path)

    def test_missing_sidecar_rejected(self, tmp_path):
        record, env, path = self.make_record(tmp_path)
        meta_path_for(path).unlink()
        with pytest.raises(UsageError, match="sidecar"):
            load_trajectory(path)

    def test_sidecar_format_checked(self, tmp_path):
        record, env, path = self.make_record(tmp_path)
        meta_file = meta_path_for(path)
        meta = json.loads(meta_file.read_text())
        meta["format"] = "traj/0"
        meta_file.write_text(json.dumps(meta))
        with pytest.raises(ConfigurationError, match="format"):
            load_trajectory(path)

    def test_bad_boolean_cell_reports_line(self, tmp_path):
        record, env, path = self.make_record(tmp_path)
        text = path.read_text().replace("true", "yes").replace("false", "no")
        path.write_text(text)
        with pytest.raises(ConfigurationError, match="used_prior_only"):
            load_trajectory(path)
