"""Twin-delayed deterministic policy gradient over the navigation residual.

Residual mode trains a correction on top of the potential-field prior: the
executed command is clip(prior + policy_output). End-to-end mode trains
the same architecture directly on the 19-dim observation. Rewards are the
environment's sparse success signal; nothing is shaped.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import EpisodeConfig, NavEnv, SensorConfig, Terminal, discounted_return, obs_dim
from .errors import ConfigurationError, TrainingDiverged, UsageError
from .grid import ShortestPathOracle
from .nn import Adam, Mlp, load_checkpoint, polyak_update, save_checkpoint
from .prior import Action, PriorParams
from .world import WorldSpec

ACTION_DIM = 2
TRAIN_LOG_COLUMNS = ("episode", "steps", "path_length_m", "success", "return", "eval_success", "eval_spl")
# Reset seeds at and above this offset are reserved for evaluation, so the
# goals seen by any evaluation pass are disjoint from the training draws.
EVAL_SEED_OFFSET = 2**62


@dataclass(frozen=True)
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    smoothing_noise_sigma: float = 0.2
    smoothing_noise_clip: float = 0.5
    exploration_noise_sigma: float = 0.1
    batch_size: int = 256
    buffer_capacity: int = 200_000
    warmup_steps: int = 1000
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    total_episodes: int = 1000
    eval_every: int = 10
    eval_episodes: int = 10
    hidden_sizes: tuple[int, ...] = (256, 256)
    dropout_p: float = 0.2
    dropout_in_actor_update: bool = True
    eval_grid_cell: float = 0.05  # m, resolution of the periodic-eval planner

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigurationError(f"tau must be in [0, 1], got {self.tau}")
        for name in ("policy_delay", "batch_size", "buffer_capacity", "total_episodes",
                     "eval_every", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.warmup_steps < 0:
            raise ConfigurationError("warmup_steps must be >= 0")
        for name in ("smoothing_noise_sigma", "smoothing_noise_clip", "exploration_noise_sigma"):
            if getattr(self, name) < 0.0:
                raise ConfigurationError(f"{name} must be >= 0")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigurationError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ConfigurationError(f"bad hidden sizes {self.hidden_sizes}")
        if self.eval_grid_cell <= 0.0:
            raise ConfigurationError("eval_grid_cell must be positive")


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int) -> None:
        if capacity < 1:
            raise ConfigurationError(f"buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.action = np.zeros((capacity, ACTION_DIM))
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self._size = 0
        self._cursor = 0

    def __len__(self) -> int:
        return self._size

    def add(self, obs, action, reward, next_obs, done: float) -> None:
        i = self._cursor
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = done
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        if self._size < 1:
            raise UsageError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self._size, batch_size)
        return (self.obs[idx], self.action[idx], self.reward[idx], self.next_obs[idx], self.done[idx])


def compose_hybrid(prior_action: Action, residual) -> Action:
    """Executed command: prior plus residual, clipped per dimension to [-1, 1]."""
    r = np.asarray(residual, dtype=np.float64)
    return Action(
        min(max(prior_action.v + float(r[0]), -1.0), 1.0),
        min(max(prior_action.omega + float(r[1]), -1.0), 1.0),
    )


def bootstrap_mask(terminal: Terminal | None) -> float:
    """1.0 when the state itself ended the episode, 0.0 when only the clock did.

    Hitting the step limit says nothing about the value of the final state,
    so the Bellman target keeps its bootstrap term there.
    """
    return 1.0 if terminal in (Terminal.GOAL, Terminal.COLLISION) else 0.0


@dataclass
class Td3Nets:
    actor: Mlp
    actor_target: Mlp
    critic1: Mlp
    critic2: Mlp
    critic1_target: Mlp
    critic2_target: Mlp
    adam_actor: Adam
    adam_critic1: Adam
    adam_critic2: Adam

    @classmethod
    def build(cls, observation_dim: int, config: Td3Config, rng: np.random.Generator) -> Td3Nets:
        actor_sizes = [observation_dim, *config.hidden_sizes, ACTION_DIM]
        critic_sizes = [observation_dim + ACTION_DIM, *config.hidden_sizes, 1]
        actor = Mlp(actor_sizes, "tanh", config.dropout_p, rng=rng)
        critic1 = Mlp(critic_sizes, "identity", 0.0, rng=rng)
        critic2 = Mlp(critic_sizes, "identity", 0.0, rng=rng)
        return cls(
            actor=actor,
            actor_target=actor.copy(),
            critic1=critic1,
            critic2=critic2,
            critic1_target=critic1.copy(),
            critic2_target=critic2.copy(),
            adam_actor=Adam(actor.parameters(), config.actor_lr),
            adam_critic1=Adam(critic1.parameters(), config.critic_lr),
            adam_critic2=Adam(critic2.parameters(), config.critic_lr),
        )


def critic_update(nets: Td3Nets, batch, config: Td3Config, rng: np.random.Generator) -> float:
    """One clipped-double-Q regression step on both critics; returns mean loss."""
    obs, action, reward, next_obs, done = batch
    b = obs.shape[0]
    noise = rng.normal(0.0, config.smoothing_noise_sigma, (b, ACTION_DIM))
    np.clip(noise, -config.smoothing_noise_clip, config.smoothing_noise_clip, out=noise)
    next_action = np.clip(nets.actor_target.forward(next_obs) + noise, -1.0, 1.0)
    target_in = np.concatenate([next_obs, next_action], axis=1)
    q_next = np.minimum(
        nets.critic1_target.forward(target_in)[:, 0],
        nets.critic2_target.forward(target_in)[:, 0],
    )
    y = reward + config.gamma * (1.0 - done) * q_next

    critic_in = np.concatenate([obs, action], axis=1)
    total = 0.0
    for critic, adam in ((nets.critic1, nets.adam_critic1), (nets.critic2, nets.adam_critic2)):
        q, trace = critic.forward_trace(critic_in)
        err = q[:, 0] - y
        grads, _ = critic.backward(trace, (2.0 / b) * err[:, None])
        adam.step(critic.parameters(), critic.grad_arrays(grads))
        total += float(np.mean(err * err))
    return total / 2.0


def actor_update(nets: Td3Nets, batch, config: Td3Config, rng: np.random.Generator) -> float:
    """Deterministic policy-gradient ascent on critic1, then Polyak on all targets."""
    obs = batch[0]
    b = obs.shape[0]
    use_dropout = config.dropout_in_actor_update and nets.actor.dropout_p > 0.0
    action, actor_trace = nets.actor.forward_trace(obs, rng=rng if use_dropout else None)
    q, q_trace = nets.critic1.forward_trace(np.concatenate([obs, action], axis=1))
    # loss = -mean(Q1); gradients flow through the action slice only
    _, d_input = nets.critic1.backward(q_trace, np.full((b, 1), -1.0 / b))
    grads, _ = nets.actor.backward(actor_trace, d_input[:, obs.shape[1]:])
    nets.adam_actor.step(nets.actor.parameters(), nets.actor.grad_arrays(grads))
    for target, live in (
        (nets.actor_target, nets.actor),
        (nets.critic1_target, nets.critic1),
        (nets.critic2_target, nets.critic2),
    ):
        polyak_update(target, live, config.tau)
    return float(-np.mean(q))


@dataclass
class TrainLogRow:
    episode: int
    steps: int
    path_length_m: float
    success: int
    ret: float
    eval_success: float | None = None
    eval_spl: float | None = None


@dataclass
class TrainResult:
    actor: Mlp
    mode: str
    log: list[TrainLogRow]
    checkpoint_path: Path | None = None
    log_path: Path | None = None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_training_log(rows: list[TrainLogRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAIN_LOG_COLUMNS)
        for r in rows:
            writer.writerow([
                r.episode, r.steps, _fmt(r.path_length_m), r.success, _fmt(r.ret),
                _fmt(r.eval_success), _fmt(r.eval_spl),
            ])


def read_training_log(path: str | Path) -> list[TrainLogRow]:
    rows: list[TrainLogRow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(TRAIN_LOG_COLUMNS):
            raise ConfigurationError(f"{path}: unexpected training-log header {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(TRAIN_LOG_COLUMNS):
                raise ConfigurationError(f"{path}:{lineno}: expected {len(TRAIN_LOG_COLUMNS)} fields")
            try:
                rows.append(TrainLogRow(
                    episode=int(rec[0]), steps=int(rec[1]), path_length_m=float(rec[2]),
                    success=int(rec[3]), ret=float(rec[4]),
                    eval_success=float(rec[5]) if rec[5] else None,
                    eval_spl=float(rec[6]) if rec[6] else None,
                ))
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: bad field: {exc}") from exc
    return rows


def greedy_episode(env: NavEnv, actor: Mlp, mode: str, seed: int) -> tuple[bool, float, int,
                                                                           tuple, tuple]:
    """Deterministic rollout (no noise, dropout off) used for periodic eval."""
    obs = env.reset(seed)
    start = (env.pose.x, env.pose.y)
    path = 0.0
    prev = start
    while True:
        out = actor.forward(obs)
        if mode == "residual":
            act = compose_hybrid(env.last_prior_action, out)
        else:
            act = Action(float(out[0]), float(out[1]))
        result = env.step(act)
        cur = (env.pose.x, env.pose.y)
        path += math.hypot(cur[0] - prev[0], cur[1] - prev[1])
        prev = cur
        obs = result.observation
        if result.terminal is not None:
            return (result.terminal is Terminal.GOAL, path, env.steps, start, env.goal)


def _periodic_eval(envs, actor: Mlp, mode: str, n_episodes: int, oracle: ShortestPathOracle,
                   seed_base: int) -> tuple[float, float]:
    successes = 0
    spl_terms: list[float] = []
    for i in range(n_episodes):
        env = envs[i % len(envs)]
        ok, path, _steps, start, goal = greedy_episode(env, actor, mode, EVAL_SEED_OFFSET + seed_base + i)
        successes += int(ok)
        shortest = oracle.shortest(env.world, start, goal)
        if math.isfinite(shortest) and shortest > 0.0:
            spl_terms.append(float(ok) * shortest / max(path, shortest))
    success = successes / n_episodes
    spl = sum(spl_terms) / len(spl_terms) if spl_terms else 0.0
    return (success, spl)


def _dump_divergence(out_dir: Path | None, info: dict) -> None:
    if out_dir is not None:
        (out_dir / "divergence.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


def train(
    worlds: list[WorldSpec],
    mode: str,
    config: Td3Config,
    episode_config: EpisodeConfig | None = None,
    sensor_config: SensorConfig | None = None,
    prior_params: PriorParams | None = None,
    seed: int = 0,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> TrainResult:
    """Run TD3 over a world suite; returns the trained actor and the episode log.

    Checkpoints land in out_dir: actor.ckpt at the end plus a rolling
    snapshot (actor/critic1/critic2) every eval_every episodes. Resuming
    restarts from the snapshot networks with a fresh replay buffer and
    optimizer state; only network weights are checkpointed.
    """
    if mode not in ("residual", "end_to_end"):
        raise ConfigurationError(f"unknown training mode {mode!r}")
    if not worlds:
        raise ConfigurationError("training needs at least one world")
    episode_config = episode_config or EpisodeConfig()
    sensor_config = sensor_config or SensorConfig()
    if mode == "residual":
        prior_params = prior_params or PriorParams()

    ss = np.random.SeedSequence(seed)
    rng_init, rng_episode, rng_explore, rng_batch, rng_update = (
        np.random.default_rng(s) for s in ss.spawn(5)
    )

    dim = obs_dim(mode)
    start_episode = 1
    if resume_from is not None:
        nets, start_episode = _load_snapshot(Path(resume_from), dim, config)
    else:
        nets = Td3Nets.build(dim, config, rng_init)

    envs = [
        NavEnv(w, episode=episode_config, sensor=sensor_config, mode=mode, prior_params=prior_params)
        for w in worlds
    ]
    oracle = ShortestPathOracle(config.eval_grid_cell)
    buffer = ReplayBuffer(config.buffer_capacity, dim)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    log: list[TrainLogRow] = []
    total_steps = 0
    for ep in range(start_episode, config.total_episodes + 1):
        env = envs[int(rng_episode.integers(len(envs)))]
        obs = env.reset(int(rng_episode.integers(EVAL_SEED_OFFSET)))
        rewards: list[float] = []
        path_length = 0.0
        prev_xy = (env.pose.x, env.pose.y)
        while True:
            if total_steps < config.warmup_steps:
                policy_action = rng_explore.uniform(-1.0, 1.0, ACTION_DIM)
            else:
                noise = rng_explore.normal(0.0, config.exploration_noise_sigma, ACTION_DIM)
                policy_action = np.clip(nets.actor.forward(obs) + noise, -1.0, 1.0)
            if mode == "residual":
                executed = compose_hybrid(env.last_prior_action, policy_action)
            else:
                executed = Action(float(policy_action[0]), float(policy_action[1]))
            result = env.step(executed)
            buffer.add(obs, policy_action, result.reward, result.observation,
                       bootstrap_mask(result.terminal))
            obs = result.observation
            cur_xy = (env.pose.x, env.pose.y)
            path_length += math.hypot(cur_xy[0] - prev_xy[0], cur_xy[1] - prev_xy[1])
            prev_xy = cur_xy
            rewards.append(result.reward)
            total_steps += 1

            if total_steps >= config.warmup_steps and len(buffer) >= config.batch_size:
                batch = buffer.sample(rng_batch, config.batch_size)
                closs = critic_update(nets, batch, config, rng_update)
                if not math.isfinite(closs):
                    info = {"episode": ep, "step": total_steps, "critic_loss": closs, "seed": seed}
                    _dump_divergence(out_path, info)
                    raise TrainingDiverged(f"critic loss diverged at episode {ep}", info)
                if nets.adam_critic1.t % config.policy_delay == 0:
                    aloss = actor_update(nets, batch, config, rng_update)
                    if not math.isfinite(aloss):
                        info = {"episode": ep, "step": total_steps, "actor_loss": aloss, "seed": seed}
                        _dump_divergence(out_path, info)
                        raise TrainingDiverged(f"actor loss diverged at episode {ep}", info)
            if result.terminal is not None:
                break

        row = TrainLogRow(
            episode=ep,
            steps=env.steps,
            path_length_m=path_length,
            success=int(result.terminal is Terminal.GOAL),
            ret=discounted_return(rewards, config.gamma),
        )
        if ep % config.eval_every == 0:
            row.eval_success, row.eval_spl = _periodic_eval(
                envs, nets.actor, mode, config.eval_episodes, oracle, seed_base=seed * 100_000
            )
            if out_path is not None:
                _save_snapshot(out_path, nets, mode, ep)
        log.append(row)

    ckpt_path = log_path = None
    if out_path is not None:
        ckpt_path = out_path / "actor.ckpt"
        save_checkpoint(nets.actor, mode, ckpt_path)
        log_path = out_path / "train_log.csv"
        write_training_log(log, log_path)
    return TrainResult(actor=nets.actor, mode=mode, log=log, checkpoint_path=ckpt_path, log_path=log_path)


def _save_snapshot(out_dir: Path, nets: Td3Nets, mode: str, episode: int) -> None:
    snap = out_dir / "snapshot"
    snap.mkdir(exist_ok=True)
    save_checkpoint(nets.actor, mode, snap / "actor.ckpt")
    save_checkpoint(nets.critic1, mode, snap / "critic1.ckpt")
    save_checkpoint(nets.critic2, mode, snap / "critic2.ckpt")
    (snap / "state.json").write_text(json.dumps({"episode": episode, "mode": mode}) + "\n")


def _load_snapshot(run_dir: Path, dim: int, config: Td3Config) -> tuple[Td3Nets, int]:
    snap = run_dir / "snapshot"
    state_file = snap / "state.json"
    if not state_file.exists():
        raise ConfigurationError(f"no snapshot to resume from under {run_dir}")
    state = json.loads(state_file.read_text())
    actor, _ = load_checkpoint(snap / "actor.ckpt")
    critic1, _ = load_checkpoint(snap / "critic1.ckpt")
    critic2, _ = load_checkpoint(snap / "critic2.ckpt")
    if actor.layer_sizes[0] != dim:
        raise ConfigurationError(
            f"snapshot actor expects {actor.layer_sizes[0]}-dim observations, run uses {dim}"
        )
    nets = Td3Nets(
        actor=actor,
        actor_target=actor.copy(),
        critic1=critic1,
        critic2=critic2,
        critic1_target=critic1.copy(),
        critic2_target=critic2.copy(),
        adam_actor=Adam(actor.parameters(), config.actor_lr),
        adam_critic1=Adam(critic1.parameters(), config.critic_lr),
        adam_critic2=Adam(critic2.parameters(), config.critic_lr),
    )
    return nets, int(state["episode"]) + 1
