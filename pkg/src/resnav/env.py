"""Point-goal navigation episodes over a WorldSpec.

Builds the policy observation, advances the unicycle, and classifies
terminal outcomes. Residual mode produces a 21-dim observation that ends
with the prior's command for the current state; end-to-end mode drops
those two slots and is 19-dim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError, UsageError
from .prior import Action, PriorParams, prior_command
from .world import (
    LaserScan,
    Pose,
    WorldSpec,
    collides,
    normalize_angle,
    point_clear,
    sample_in_shape,
    scan,
    step_kinematics,
)

N_BINS = 15
RESIDUAL_OBS_DIM = 21
E2E_OBS_DIM = 19
_MAX_RESET_ATTEMPTS = 1000

# Observation layout (residual mode); end-to-end stops after IDX_PREV_OMEGA.
IDX_ANGLE_TO_GOAL = 15
IDX_DIST_TO_GOAL = 16
IDX_PREV_V = 17
IDX_PREV_OMEGA = 18
IDX_PRIOR_V = 19
IDX_PRIOR_OMEGA = 20


class Terminal(Enum):
    GOAL = "goal"
    COLLISION = "collision"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class EpisodeConfig:
    d_threshold: float = 0.2  # m, success iff distance to goal < this
    max_steps: int = 300
    gamma: float = 0.99
    dt: float = 0.1  # s

    def __post_init__(self) -> None:
        if self.d_threshold <= 0.0:
            raise ConfigurationError(f"d_threshold must be positive, got {self.d_threshold}")
        if self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be >= 1, got {self.max_steps}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.dt <= 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class SensorConfig:
    n_rays: int = 180
    max_range: float = 5.0  # m

    def __post_init__(self) -> None:
        if self.n_rays < N_BINS or self.n_rays % N_BINS != 0:
            raise ConfigurationError(
                f"n_rays must be >= {N_BINS} and divisible by {N_BINS}, got {self.n_rays}"
            )
        if self.max_range <= 0.0:
            raise ConfigurationError(f"max_range must be positive, got {self.max_range}")


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminal: Terminal | None
    info: dict = field(default_factory=dict)


def compute_reward(d_target: float, config: EpisodeConfig) -> float:
    """Sparse success reward: 1 iff strictly inside the threshold, else 0."""
    return 1.0 if d_target < config.d_threshold else 0.0


def discounted_return(rewards, gamma: float) -> float:
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError(f"gamma must be in (0, 1), got {gamma}")
    return float(sum(r * gamma**i for i, r in enumerate(rewards)))


def build_observation(
    laser: LaserScan,
    pose: Pose,
    goal: tuple[float, float],
    prev_action: Action,
    prior_action: Action | None,
    mode: str = "residual",
) -> np.ndarray:
    """Assemble the policy observation vector.

    Layout: 15 laser bins (min range per bin / max_range), angle to goal
    (rad, robot frame), distance to goal (m), previous executed (v, omega),
    then in residual mode the prior command (v, omega).
    """
    n = len(laser.ranges)
    if n % N_BINS != 0:
        raise ConfigurationError(f"scan with {n} rays does not divide into {N_BINS} bins")
    bins = laser.ranges.reshape(N_BINS, n // N_BINS).min(axis=1) / laser.max_range
    angle = normalize_angle(math.atan2(goal[1] - pose.y, goal[0] - pose.x) - pose.theta)
    dist = math.hypot(goal[0] - pose.x, goal[1] - pose.y)
    tail = [angle, dist, prev_action.v, prev_action.omega]
    if mode == "residual":
        if prior_action is None:
            raise UsageError("residual observation requires a prior action")
        tail += [prior_action.v, prior_action.omega]
    elif mode != "end_to_end":
        raise ConfigurationError(f"unknown observation mode {mode!r}")
    return np.concatenate([bins, np.array(tail, dtype=np.float64)])


def obs_dim(mode: str) -> int:
    if mode == "residual":
        return RESIDUAL_OBS_DIM
    if mode == "end_to_end":
        return E2E_OBS_DIM
    raise ConfigurationError(f"unknown observation mode {mode!r}")


class NavEnv:
    """Episode runner binding a world, a sensor model, and the prior."""

    def __init__(
        self,
        world: WorldSpec,
        episode: EpisodeConfig | None = None,
        sensor: SensorConfig | None = None,
        mode: str = "residual",
        prior_params: PriorParams | None = None,
    ) -> None:
        if mode not in ("residual", "end_to_end"):
            raise ConfigurationError(f"unknown env mode {mode!r}")
        self.world = world
        self.episode = episode or EpisodeConfig()
        self.sensor = sensor or SensorConfig()
        self.mode = mode
        self.prior_params = prior_params or (PriorParams() if mode == "residual" else None)
        if self.prior_params is not None and self.prior_params.d_influence > self.sensor.max_range:
            raise ConfigurationError(
                f"prior d_influence={self.prior_params.d_influence} exceeds "
                f"laser max_range={self.sensor.max_range}"
            )
        self._pose: Pose | None = None
        self._goal: tuple[float, float] | None = None
        self._steps = 0
        self._terminal: Terminal | None = Terminal.TIMEOUT  # force reset before stepping
        self._prev_action = Action(0.0, 0.0)
        self._prior_action: Action | None = None

    @property
    def pose(self) -> Pose:
        if self._pose is None:
            raise UsageError("reset the environment before reading its state")
        return self._pose

    @property
    def goal(self) -> tuple[float, float]:
        if self._goal is None:
            raise UsageError("reset the environment before reading its state")
        return self._goal

    @property
    def steps(self) -> int:
        return self._steps

    @property
    def last_prior_action(self) -> Action:
        if self._prior_action is None:
            raise UsageError("no prior action available (end-to-end mode or before reset)")
        return self._prior_action

    @property
    def observation_dim(self) -> int:
        return obs_dim(self.mode)

    def reset(self, seed: int) -> np.ndarray:
        """Sample a collision-free start pose and goal, return the first observation."""
        rng = np.random.default_rng(seed)
        self._pose = Pose(*self._sample_clear(self.world.start_region, rng), rng.uniform(-math.pi, math.pi))
        self._goal = self._sample_clear(self.world.goal_region, rng)
        self._steps = 0
        self._terminal = None
        self._prev_action = Action(0.0, 0.0)
        return self._observe()

    def _sample_clear(self, region, rng: np.random.Generator) -> tuple[float, float]:
        for _ in range(_MAX_RESET_ATTEMPTS):
            x, y = sample_in_shape(region, rng)
            if point_clear(self.world, x, y, self.world.robot_radius):
                return (x, y)
        raise UsageError(
            f"could not sample a collision-free point in {region} "
            f"after {_MAX_RESET_ATTEMPTS} attempts"
        )

    def step(self, action: Action) -> StepResult:
        if self._terminal is not None:
            raise UsageError("episode already terminated; call reset before stepping")
        v = min(max(action.v, -1.0), 1.0)
        omega = min(max(action.omega, -1.0), 1.0)
        self._pose = step_kinematics(self._pose, v, omega, self.episode.dt)
        self._steps += 1

        d_target = math.hypot(self._goal[0] - self._pose.x, self._goal[1] - self._pose.y)
        if d_target < self.episode.d_threshold:
            self._terminal = Terminal.GOAL
        elif collides(self._pose, self.world):
            self._terminal = Terminal.COLLISION
        elif self._steps >= self.episode.max_steps:
            self._terminal = Terminal.TIMEOUT

        executed = Action(v, omega)
        self._prev_action = executed
        observation = self._observe()
        info = {
            "pose": self._pose,
            "d_target": d_target,
            "executed": executed,
            "prior_action": self._prior_action,
        }
        return StepResult(observation, compute_reward(d_target, self.episode), self._terminal, info)

    def _observe(self) -> np.ndarray:
        laser = scan(self._pose, self.sensor.n_rays, self.sensor.max_range, self.world)
        angle = normalize_angle(
            math.atan2(self._goal[1] - self._pose.y, self._goal[0] - self._pose.x) - self._pose.theta
        )
        dist = math.hypot(self._goal[0] - self._pose.x, self._goal[1] - self._pose.y)
        if self.mode == "residual":
            self._prior_action = prior_command(laser, angle, dist, self.prior_params)
        return build_observation(laser, self._pose, self._goal, self._prev_action, self._prior_action, self.mode)
