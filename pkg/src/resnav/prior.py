"""Potential-field reactive controller used as the hand-designed prior.

The controller sums a unit attraction toward the goal with per-beam
repulsion from every scan return closer than d_influence, all in the robot
frame, then steers along the resultant. It sees only the current scan and
the goal bearing, so it is memoryless and rotation-equivariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .world import LaserScan


@dataclass(frozen=True)
class Action:
    """A velocity command: linear v in m/s, angular omega in rad/s."""

    v: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega], dtype=np.float64)


@dataclass(frozen=True)
class PriorParams:
    k_att: float = 1.0  # attraction gain (unit goal vector scale)
    k_rep: float = 0.012  # per-beam repulsion gain
    d_influence: float = 1.5  # m, beams farther than this are ignored
    k_omega: float = 2.0  # bearing-to-turn-rate gain
    v_max: float = 1.0  # m/s

    def __post_init__(self) -> None:
        for name in ("k_att", "k_rep", "d_influence", "k_omega", "v_max"):
            if getattr(self, name) <= 0.0:
                raise ConfigurationError(f"prior parameter {name} must be positive")


def prior_command(
    scan: LaserScan,
    angle_to_goal: float,
    dist_to_goal: float,
    params: PriorParams,
) -> Action:
    """Compute the prior's command from a raw scan and the goal bearing.

    Repulsion per beam i with range d < d_influence has magnitude
    k_rep * (1/d - 1/d_influence) / d**2 and points back along the beam.
    The command is v = clip(v_max * max(0, cos(b)), 0, 1) and
    omega = clip(k_omega * b, -1, 1) where b is the resultant bearing.
    dist_to_goal is accepted for interface completeness; the attraction
    term is deliberately distance-independent.
    """
    if params.d_influence > scan.max_range:
        raise ConfigurationError(
            f"d_influence={params.d_influence} exceeds scan max_range={scan.max_range}"
        )
    fx = params.k_att * math.cos(angle_to_goal)
    fy = params.k_att * math.sin(angle_to_goal)

    r = scan.ranges
    near = r < params.d_influence
    if near.any():
        rn = r[near]
        mag = params.k_rep * (1.0 / rn - 1.0 / params.d_influence) / (rn * rn)
        ang = scan.angles[near]
        fx -= float(np.dot(mag, np.cos(ang)))
        fy -= float(np.dot(mag, np.sin(ang)))

    bearing = math.atan2(fy, fx)
    omega = min(max(params.k_omega * bearing, -1.0), 1.0)
    v = min(max(params.v_max * max(0.0, math.cos(bearing)), 0.0), 1.0)
    return Action(v, omega)


def tune_check(
    worlds,
    episode_config=None,
    sensor_config=None,
    params: PriorParams | None = None,
    n_episodes: int = 100,
    seed: int = 0,
) -> float:
    """Success fraction of the prior alone over a suite of episodes.

    Used to calibrate PriorParams against a generated world suite before
    any learning happens.
    """
    from .env import EpisodeConfig, NavEnv, SensorConfig  # env layers above prior

    if n_episodes < 1:
        raise ConfigurationError(f"n_episodes must be >= 1, got {n_episodes}")
    if not worlds:
        raise ConfigurationError("tune_check needs at least one world")
    episode_config = episode_config or EpisodeConfig()
    sensor_config = sensor_config or SensorConfig()
    params = params or PriorParams()

    envs = [
        NavEnv(w, episode=episode_config, sensor=sensor_config, mode="residual", prior_params=params)
        for w in worlds
    ]
    successes = 0
    for i in range(n_episodes):
        env = envs[i % len(envs)]
        env.reset(seed * 1_000_003 + i)
        while True:
            result = env.step(env.last_prior_action)
            if result.terminal is not None:
                successes += int(result.reward > 0.0)
                break
    return successes / n_episodes
