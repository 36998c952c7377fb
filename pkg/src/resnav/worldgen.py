"""Procedural arena generation for training and held-out evaluation suites.

Layout contract: a square-ish arena with a start box in the middle, a
goal strip along one randomly chosen wall, and rectangles and circles
scattered under clearance constraints (to the walls, to each other, and
much more generously to the start box so that an aimless controller
rarely collides early). Every accepted world is checked for planner
reachability from the start box to both ends of the goal strip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, UsageError
from .grid import ShortestPathOracle
from .world import Circle, Rect, Shape, WorldSpec, load_world, save_world, shape_distance

_WORLD_TRIES = 100
_OBSTACLE_TRIES = 50
_SIDES = ("east", "west", "north", "south")


@dataclass(frozen=True)
class WorldGenParams:
    width: float = 8.0
    height: float = 8.0
    robot_radius: float = 0.15
    n_obstacles_min: int = 4
    n_obstacles_max: int = 7
    rect_side_min: float = 0.4
    rect_side_max: float = 0.9
    circle_radius_min: float = 0.2
    circle_radius_max: float = 0.45
    start_box_half: float = 0.45
    goal_strip_depth: float = 0.5
    goal_strip_margin: float = 1.0
    goal_wall_offset: float = 0.7
    start_clearance: float = 1.25
    goal_clearance: float = 0.30
    wall_clearance: float = 0.25
    pairwise_clearance: float = 0.85
    planner_cell: float = 0.05

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0 or self.robot_radius <= 0:
            raise ConfigurationError("arena dimensions and robot radius must be positive")
        if not 0 <= self.n_obstacles_min <= self.n_obstacles_max:
            raise ConfigurationError(
                f"bad obstacle count range [{self.n_obstacles_min}, {self.n_obstacles_max}]"
            )
        for lo, hi, name in (
            (self.rect_side_min, self.rect_side_max, "rect side"),
            (self.circle_radius_min, self.circle_radius_max, "circle radius"),
        ):
            if not 0 < lo <= hi:
                raise ConfigurationError(f"bad {name} range [{lo}, {hi}]")
        for name in ("start_box_half", "goal_strip_depth", "goal_wall_offset", "planner_cell"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("goal_strip_margin", "start_clearance", "goal_clearance",
                     "wall_clearance", "pairwise_clearance"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if 2 * self.start_box_half >= min(self.width, self.height):
            raise ConfigurationError("start box does not fit in the arena")
        if self.goal_strip_margin * 2 >= min(self.width, self.height):
            raise ConfigurationError("goal strip margins leave no strip")
        if self.goal_wall_offset + self.goal_strip_depth >= min(self.width, self.height) / 2:
            raise ConfigurationError("goal strip would cross the arena midline")

    def start_region(self) -> Rect:
        cx, cy = self.width / 2.0, self.height / 2.0
        h = self.start_box_half
        return Rect(cx - h, cy - h, cx + h, cy + h)

    def goal_region(self, side: str) -> Rect:
        m = self.goal_strip_margin
        o = self.goal_wall_offset
        d = self.goal_strip_depth
        if side == "east":
            return Rect(self.width - o - d, m, self.width - o, self.height - m)
        if side == "west":
            return Rect(o, m, o + d, self.height - m)
        if side == "north":
            return Rect(m, self.height - o - d, self.width - m, self.height - o)
        if side == "south":
            return Rect(m, o, self.width - m, o + d)
        raise ConfigurationError(f"unknown goal side {side!r}")


def _sample_shape(params: WorldGenParams, rng: np.random.Generator) -> Shape:
    if rng.random() < 0.5:
        w = rng.uniform(params.rect_side_min, params.rect_side_max)
        h = rng.uniform(params.rect_side_min, params.rect_side_max)
        x_lo = params.wall_clearance
        x_hi = params.width - params.wall_clearance - w
        y_lo = params.wall_clearance
        y_hi = params.height - params.wall_clearance - h
        if x_hi < x_lo or y_hi < y_lo:
            raise ConfigurationError("arena too small for the rectangle size range")
        x = rng.uniform(x_lo, x_hi)
        y = rng.uniform(y_lo, y_hi)
        return Rect(x, y, x + w, y + h)
    r = rng.uniform(params.circle_radius_min, params.circle_radius_max)
    lo = params.wall_clearance + r
    hi_x = params.width - params.wall_clearance - r
    hi_y = params.height - params.wall_clearance - r
    if hi_x < lo or hi_y < lo:
        raise ConfigurationError("arena too small for the circle radius range")
    return Circle(rng.uniform(lo, hi_x), rng.uniform(lo, hi_y), r)


def _clearances_ok(shape: Shape, placed: list[Shape], start: Rect, goal: Rect,
                   params: WorldGenParams) -> bool:
    if shape_distance(shape, start) < params.start_clearance:
        return False
    if shape_distance(shape, goal) < params.goal_clearance:
        return False
    return all(shape_distance(shape, other) >= params.pairwise_clearance for other in placed)


def _reachable(world: WorldSpec, params: WorldGenParams) -> bool:
    oracle = ShortestPathOracle(params.planner_cell)
    start = world.start_region.center
    g = world.goal_region
    probes = (
        g.center,
        (g.x_min + (g.x_max - g.x_min) / 2, g.y_min),
        (g.x_min + (g.x_max - g.x_min) / 2, g.y_max),
        (g.x_min, g.y_min + (g.y_max - g.y_min) / 2),
        (g.x_max, g.y_min + (g.y_max - g.y_min) / 2),
    )
    try:
        return all(math.isfinite(oracle.shortest(world, start, p)) for p in probes)
    except UsageError:
        # a probe point had no nearby free cell, so the strip edge is sealed
        return False


def generate_world(params: WorldGenParams, rng: np.random.Generator) -> WorldSpec:
    """One arena from the stream, retrying until all constraints hold."""
    start = params.start_region()
    for _ in range(_WORLD_TRIES):
        side = _SIDES[int(rng.integers(len(_SIDES)))]
        goal = params.goal_region(side)
        n = int(rng.integers(params.n_obstacles_min, params.n_obstacles_max + 1))
        placed: list[Shape] = []
        feasible = True
        for _ in range(n):
            for _ in range(_OBSTACLE_TRIES):
                cand = _sample_shape(params, rng)
                if _clearances_ok(cand, placed, start, goal, params):
                    placed.append(cand)
                    break
            else:
                feasible = False
                break
        if not feasible:
            continue
        world = WorldSpec(
            width=params.width, height=params.height, robot_radius=params.robot_radius,
            obstacles=tuple(placed), start_region=start, goal_region=goal,
        )
        if _reachable(world, params):
            return world
    raise ConfigurationError(
        f"could not generate a valid world in {_WORLD_TRIES} attempts; relax the clearances"
    )


def generate_suite(params: WorldGenParams, n_worlds: int, seed: int) -> list[WorldSpec]:
    """n deterministic worlds; each has its own child stream of `seed`."""
    if n_worlds < 1:
        raise ConfigurationError("n_worlds must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(n_worlds)
    return [generate_world(params, np.random.default_rng(s)) for s in streams]


def suite_paths(directory: str | Path, n_worlds: int) -> list[Path]:
    directory = Path(directory)
    return [directory / f"world_{i:03d}.json" for i in range(n_worlds)]


def write_suite(worlds: list[WorldSpec], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = suite_paths(directory, len(worlds))
    for world, path in zip(worlds, paths):
        save_world(world, path)
    return paths


def load_suite(directory: str | Path) -> list[WorldSpec]:
    directory = Path(directory)
    paths = sorted(directory.glob("world_*.json"))
    if not paths:
        raise ConfigurationError(f"no world_*.json files under {directory}")
    return [load_world(p) for p in paths]
