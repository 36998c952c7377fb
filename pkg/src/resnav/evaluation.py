"""Controller evaluation: success rate, path efficiency, actuation time.

Every controller sees the same episode list (same worlds, same reset
seeds, hence identical start and goal draws), so the comparison is
paired. Path efficiency weights each success by the ratio of the
planner's shortest path to the driven path; failures contribute zero.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

from .env import EpisodeConfig, NavEnv, SensorConfig
from .errors import ConfigurationError
from .grid import ShortestPathOracle
from .policy import PolicyMode, env_mode_for
from .prior import PriorParams
from .rollout import EpisodeRecord, run_episode
from .td3 import EVAL_SEED_OFFSET
from .world import WorldSpec

EPISODE_CSV_COLUMNS = (
    "mode", "episode", "seed", "world", "success", "steps",
    "actuation_s", "path_length_m", "shortest_m", "spl_term",
)


@dataclass(frozen=True)
class EpisodeMetrics:
    mode: str
    episode: int
    seed: int
    world: int
    success: bool
    steps: int
    actuation_s: float
    path_length_m: float
    shortest_m: float
    spl_term: float | None  # None when the planner gave no usable length


def spl_term(success: bool, path_m: float, shortest_m: float) -> float | None:
    """One episode's efficiency-weighted success, None if not computable."""
    if not math.isfinite(shortest_m) or shortest_m <= 0.0:
        return None
    return float(success) * shortest_m / max(path_m, shortest_m)


@dataclass
class ModeResult:
    mode: str
    episodes: list[EpisodeMetrics]

    @property
    def n_episodes(self) -> int:
        return len(self.episodes)

    @property
    def success_rate(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(e.success for e in self.episodes) / len(self.episodes)

    @property
    def spl(self) -> float:
        terms = [e.spl_term for e in self.episodes if e.spl_term is not None]
        if not terms:
            return 0.0
        return sum(terms) / len(terms)

    @property
    def mean_actuation_s(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(e.actuation_s for e in self.episodes) / len(self.episodes)


@dataclass
class EvalResult:
    results: dict[str, ModeResult]

    def __getitem__(self, label: str) -> ModeResult:
        return self.results[label]

    def report(self) -> str:
        lines = [f"{'controller':<14}{'episodes':>9}{'success':>9}{'spl':>8}{'actuation_s':>13}"]
        for label, res in self.results.items():
            lines.append(
                f"{label:<14}{res.n_episodes:>9d}{res.success_rate:>9.3f}"
                f"{res.spl:>8.3f}{res.mean_actuation_s:>13.2f}"
            )
        return "\n".join(lines) + "\n"

    def write_episode_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EPISODE_CSV_COLUMNS)
            for res in self.results.values():
                for e in res.episodes:
                    writer.writerow([
                        e.mode, e.episode, e.seed, e.world,
                        "true" if e.success else "false", e.steps,
                        repr(e.actuation_s), repr(e.path_length_m), repr(e.shortest_m),
                        "" if e.spl_term is None else repr(e.spl_term),
                    ])


def evaluate(
    worlds: list[WorldSpec],
    policies: dict[str, object],
    n_episodes: int,
    seed_base: int = 0,
    episode_config: EpisodeConfig | None = None,
    sensor_config: SensorConfig | None = None,
    prior_params: PriorParams | None = None,
    oracle: ShortestPathOracle | None = None,
) -> EvalResult:
    """Run each policy over the same paired episode set and aggregate.

    Episode i draws its start and goal from seed EVAL_SEED_OFFSET +
    seed_base + i on world i % len(worlds); the offset keeps these draws
    disjoint from anything a training run consumed.
    """
    if not worlds:
        raise ConfigurationError("evaluation needs at least one world")
    if not policies:
        raise ConfigurationError("evaluation needs at least one controller")
    if n_episodes < 1:
        raise ConfigurationError("n_episodes must be >= 1")
    episode_config = episode_config or EpisodeConfig()
    sensor_config = sensor_config or SensorConfig()
    oracle = oracle or ShortestPathOracle()

    envs: dict[tuple[int, str], NavEnv] = {}

    def env_for(world_index: int, policy) -> NavEnv:
        env_mode = env_mode_for(PolicyMode(policy.mode))
        key = (world_index, env_mode)
        if key not in envs:
            envs[key] = NavEnv(
                worlds[world_index], episode=episode_config, sensor=sensor_config,
                mode=env_mode,
                prior_params=prior_params if env_mode == "residual" else None,
            )
        return envs[key]

    results = {label: ModeResult(mode=label, episodes=[]) for label in policies}
    dropped = 0
    for i in range(n_episodes):
        world_index = i % len(worlds)
        seed = EVAL_SEED_OFFSET + seed_base + i
        for label, policy in policies.items():
            env = env_for(world_index, policy)
            record: EpisodeRecord = run_episode(env, policy, seed)
            shortest = oracle.shortest(worlds[world_index], record.start, record.goal)
            term = spl_term(record.success, record.path_length_m, shortest)
            if term is None:
                dropped += 1
            results[label].episodes.append(EpisodeMetrics(
                mode=label,
                episode=i,
                seed=seed,
                world=world_index,
                success=record.success,
                steps=record.steps,
                actuation_s=record.steps * episode_config.dt,
                path_length_m=record.path_length_m,
                shortest_m=shortest,
                spl_term=term,
            ))
    if dropped:
        warnings.warn(
            f"{dropped} episode(s) had no usable shortest path and were "
            "excluded from the efficiency average",
            stacklevel=2,
        )
    return EvalResult(results=results)
