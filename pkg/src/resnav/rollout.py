"""Single-episode execution and trajectory files.

A trajectory is a CSV (one row per control step, plus a t=0 row for the
start pose) and a JSON sidecar carrying episode metadata and the full
world description, so a trajectory file is replottable on its own.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import NavEnv, Terminal, discounted_return
from .errors import ConfigurationError, UsageError
from .policy import PolicyOutput
from .world import world_from_dict, world_to_dict

TRAJ_FORMAT = "traj/1"
TRAJ_COLUMNS = (
    "t", "x", "y", "theta",
    "v_exec", "omega_exec", "v_prior", "omega_prior",
    "mu_dv", "mu_dw", "var_dv", "var_dw",
    "epsilon", "used_prior_only", "reward",
)


@dataclass(frozen=True)
class TrajectoryRow:
    t: int
    x: float
    y: float
    theta: float
    v_exec: float | None = None
    omega_exec: float | None = None
    v_prior: float | None = None
    omega_prior: float | None = None
    mu_dv: float | None = None
    mu_dw: float | None = None
    var_dv: float | None = None
    var_dw: float | None = None
    epsilon: float | None = None
    used_prior_only: bool | None = None
    reward: float | None = None


@dataclass
class EpisodeRecord:
    mode: str
    seed: int
    terminal: Terminal
    success: bool
    steps: int
    path_length_m: float
    discounted_return: float
    start: tuple[float, float]
    goal: tuple[float, float]
    rows: list[TrajectoryRow] = field(repr=False, default_factory=list)


def policy_rng(seed: int) -> np.random.Generator:
    """Action-noise stream for an episode, decoupled from the reset draw.

    The environment consumes the bare seed so that start and goal pairs
    line up across controllers; this stream feeds the controller itself.
    """
    return np.random.default_rng([seed, 1])


def run_episode(env: NavEnv, policy, seed: int) -> EpisodeRecord:
    """Roll one episode of `policy` in `env`, recording every step."""
    obs = env.reset(seed)
    rng = policy_rng(seed)
    start = (env.pose.x, env.pose.y)
    rows = [TrajectoryRow(t=0, x=env.pose.x, y=env.pose.y, theta=env.pose.theta)]
    rewards: list[float] = []
    path_length = 0.0
    prev = start
    while True:
        prior = env.last_prior_action if env.mode == "residual" else None
        out: PolicyOutput = policy.act(obs, prior, rng)
        result = env.step(out.action)
        executed = result.info["executed"]
        cur = (env.pose.x, env.pose.y)
        path_length += math.hypot(cur[0] - prev[0], cur[1] - prev[1])
        prev = cur
        rewards.append(result.reward)
        rows.append(TrajectoryRow(
            t=env.steps,
            x=env.pose.x, y=env.pose.y, theta=env.pose.theta,
            v_exec=executed.v, omega_exec=executed.omega,
            v_prior=prior.v if prior is not None else None,
            omega_prior=prior.omega if prior is not None else None,
            mu_dv=float(out.residual_mean[0]) if out.residual_mean is not None else None,
            mu_dw=float(out.residual_mean[1]) if out.residual_mean is not None else None,
            var_dv=float(out.residual_variance[0]) if out.residual_variance is not None else None,
            var_dw=float(out.residual_variance[1]) if out.residual_variance is not None else None,
            epsilon=out.epsilon,
            used_prior_only=out.used_prior_only,
            reward=result.reward,
        ))
        obs = result.observation
        if result.terminal is not None:
            return EpisodeRecord(
                mode=policy.mode.value,
                seed=seed,
                terminal=result.terminal,
                success=result.terminal is Terminal.GOAL,
                steps=env.steps,
                path_length_m=path_length,
                discounted_return=discounted_return(rewards, env.episode.gamma),
                start=start,
                goal=env.goal,
                rows=rows,
            )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def meta_path_for(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta.json")


def save_trajectory(record: EpisodeRecord, env: NavEnv, path: str | Path) -> None:
    """Write the step CSV and its .meta.json sidecar next to it."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJ_COLUMNS)
        for row in record.rows:
            writer.writerow([_cell(getattr(row, col)) for col in TRAJ_COLUMNS])
    meta = {
        "format": TRAJ_FORMAT,
        "mode": record.mode,
        "seed": record.seed,
        "terminal": record.terminal.name.lower(),
        "success": record.success,
        "steps": record.steps,
        "path_length_m": record.path_length_m,
        "discounted_return": record.discounted_return,
        "start": list(record.start),
        "goal": list(record.goal),
        "goal_radius": env.episode.d_threshold,
        "world": world_to_dict(env.world),
    }
    meta_path_for(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _parse_cell(name: str, raw: str, lineno: int, path) -> float | bool | int | None:
    if raw == "":
        return None
    try:
        if name == "t":
            return int(raw)
        if name == "used_prior_only":
            if raw not in ("true", "false"):
                raise ValueError(f"expected true/false, got {raw!r}")
            return raw == "true"
        return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{path}:{lineno}: bad {name} field: {exc}") from exc


def load_trajectory(path: str | Path) -> tuple[list[TrajectoryRow], dict]:
    """Read a trajectory CSV plus sidecar; validates layout and step numbering."""
    path = Path(path)
    rows: list[TrajectoryRow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(TRAJ_COLUMNS):
            raise ConfigurationError(f"{path}: unexpected trajectory header {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(TRAJ_COLUMNS):
                raise ConfigurationError(
                    f"{path}:{lineno}: expected {len(TRAJ_COLUMNS)} fields, got {len(rec)}"
                )
            values = {
                name: _parse_cell(name, raw, lineno, path)
                for name, raw in zip(TRAJ_COLUMNS, rec)
            }
            for required in ("t", "x", "y", "theta"):
                if values[required] is None:
                    raise ConfigurationError(f"{path}:{lineno}: missing {required}")
            rows.append(TrajectoryRow(**values))
    if not rows or rows[0].t != 0:
        raise ConfigurationError(f"{path}: trajectory must begin with a t=0 start row")
    for i, row in enumerate(rows):
        if row.t != i:
            raise ConfigurationError(f"{path}: step numbers must be consecutive, row {i} has t={row.t}")

    meta_file = meta_path_for(path)
    if not meta_file.exists():
        raise UsageError(f"missing trajectory sidecar {meta_file}")
    meta = json.loads(meta_file.read_text())
    if meta.get("format") != TRAJ_FORMAT:
        raise ConfigurationError(f"{meta_file}: unsupported format {meta.get('format')!r}")
    # materialize the embedded world to catch stale or hand-edited sidecars
    world_from_dict(meta["world"])
    return rows, meta
