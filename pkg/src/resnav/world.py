"""2D arena geometry: shapes, ray casting, unicycle kinematics, collision tests.

The arena occupies [0, width] x [0, height] with x to the right and y up.
Angles are radians, counter-clockwise from +x, always wrapped to (-pi, pi].
A WorldSpec never changes after construction and can be shared freely
between episode runners; derived ray-casting arrays are cached on it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

WORLD_FORMAT = "world/1"
TWO_PI = 2.0 * math.pi
_EPS_PARALLEL = 1e-12


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    t = math.fmod(theta + math.pi, TWO_PI)
    if t <= 0.0:
        t += TWO_PI
    return t - math.pi


@dataclass(frozen=True)
class Pose:
    x: float  # m
    y: float  # m
    theta: float  # rad, normalized on construction

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by its corner coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ConfigurationError(
                f"degenerate rect: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    def distance_to_point(self, x: float, y: float) -> float:
        dx = max(self.x_min - x, 0.0, x - self.x_max)
        dy = max(self.y_min - y, 0.0, y - self.y_max)
        return math.hypot(dx, dy)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def __post_init__(self) -> None:
        if self.r <= 0.0:
            raise ConfigurationError(f"circle radius must be positive, got {self.r}")

    def distance_to_point(self, x: float, y: float) -> float:
        return max(0.0, math.hypot(x - self.cx, y - self.cy) - self.r)

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x - self.cx, y - self.cy) <= self.r

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)


Shape = Rect | Circle


def shape_to_dict(shape: Shape) -> dict:
    if isinstance(shape, Rect):
        return {"type": "rect", "params": [shape.x_min, shape.y_min, shape.x_max, shape.y_max]}
    return {"type": "circle", "params": [shape.cx, shape.cy, shape.r]}


def shape_from_dict(d: dict) -> Shape:
    if not isinstance(d, dict):
        raise ConfigurationError(f"shape entry must be an object, got {type(d).__name__}")
    unknown = set(d) - {"type", "params"}
    if unknown:
        raise ConfigurationError(f"unknown shape keys: {sorted(unknown)}")
    kind = d.get("type")
    params = d.get("params")
    if kind == "rect":
        if not isinstance(params, list) or len(params) != 4:
            raise ConfigurationError(f"rect needs 4 params, got {params!r}")
        return Rect(*[float(p) for p in params])
    if kind == "circle":
        if not isinstance(params, list) or len(params) != 3:
            raise ConfigurationError(f"circle needs 3 params, got {params!r}")
        return Circle(*[float(p) for p in params])
    raise ConfigurationError(f"unknown shape type {kind!r}")


def shape_distance(a: Shape, b: Shape) -> float:
    """Euclidean gap between two shapes; 0 when they touch or overlap."""
    if isinstance(a, Rect) and isinstance(b, Rect):
        dx = max(a.x_min - b.x_max, b.x_min - a.x_max, 0.0)
        dy = max(a.y_min - b.y_max, b.y_min - a.y_max, 0.0)
        return math.hypot(dx, dy)
    if isinstance(a, Rect) and isinstance(b, Circle):
        return max(0.0, a.distance_to_point(b.cx, b.cy) - b.r)
    if isinstance(a, Circle) and isinstance(b, Rect):
        return shape_distance(b, a)
    assert isinstance(a, Circle) and isinstance(b, Circle)
    return max(0.0, math.hypot(a.cx - b.cx, a.cy - b.cy) - a.r - b.r)


def sample_in_shape(shape: Shape, rng: np.random.Generator) -> tuple[float, float]:
    """Draw a uniform point inside the shape (two rng draws per call)."""
    if isinstance(shape, Rect):
        x = rng.uniform(shape.x_min, shape.x_max)
        y = rng.uniform(shape.y_min, shape.y_max)
        return (float(x), float(y))
    rho = shape.r * math.sqrt(rng.uniform(0.0, 1.0))
    phi = rng.uniform(-math.pi, math.pi)
    return (shape.cx + rho * math.cos(phi), shape.cy + rho * math.sin(phi))


@dataclass(frozen=True)
class LaserScan:
    """One planar scan: ranges[i] belongs to angles()[i], robot frame."""

    ranges: np.ndarray  # m, strictly positive, clamped to max_range
    fov: float  # rad, total field of view
    max_range: float  # m

    @cached_property
    def angles(self) -> np.ndarray:
        """Relative beam angles, evenly spaced over [-fov/2, fov/2]."""
        n = len(self.ranges)
        a = np.linspace(-0.5 * self.fov, 0.5 * self.fov, n)
        a.flags.writeable = False
        return a


@dataclass(frozen=True)
class WorldSpec:
    """Immutable arena description.

    Invariants are checked at construction: obstacles inside the arena
    bounds and the start/goal regions clear of every obstacle inflated by
    robot_radius.
    """

    width: float
    height: float
    robot_radius: float
    obstacles: tuple[Shape, ...]
    start_region: Shape
    goal_region: Shape

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        _validate_world(self)

    @cached_property
    def _segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Wall and rectangle-edge segments as (origins P, extents Q-P)."""
        w, h = self.width, self.height
        corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
        segs = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
        for ob in self.obstacles:
            if isinstance(ob, Rect):
                cs = [
                    (ob.x_min, ob.y_min),
                    (ob.x_max, ob.y_min),
                    (ob.x_max, ob.y_max),
                    (ob.x_min, ob.y_max),
                ]
                segs.extend((cs[i], cs[(i + 1) % 4]) for i in range(4))
        p = np.array([s[0] for s in segs], dtype=np.float64)
        q = np.array([s[1] for s in segs], dtype=np.float64)
        e = q - p
        p.flags.writeable = False
        e.flags.writeable = False
        return (p, e)

    @cached_property
    def _circles(self) -> np.ndarray:
        cs = [(c.cx, c.cy, c.r) for c in self.obstacles if isinstance(c, Circle)]
        arr = np.array(cs, dtype=np.float64).reshape(len(cs), 3)
        arr.flags.writeable = False
        return arr


def _shape_in_arena(shape: Shape, width: float, height: float) -> bool:
    if isinstance(shape, Rect):
        return 0.0 <= shape.x_min and shape.x_max <= width and 0.0 <= shape.y_min and shape.y_max <= height
    return (
        shape.cx - shape.r >= 0.0
        and shape.cx + shape.r <= width
        and shape.cy - shape.r >= 0.0
        and shape.cy + shape.r <= height
    )


def _validate_world(world: WorldSpec) -> None:
    if world.width <= 0.0 or world.height <= 0.0:
        raise ConfigurationError(f"arena sides must be positive, got {world.width} x {world.height}")
    if world.robot_radius <= 0.0:
        raise ConfigurationError(f"robot_radius must be positive, got {world.robot_radius}")
    for i, ob in enumerate(world.obstacles):
        if not _shape_in_arena(ob, world.width, world.height):
            raise ConfigurationError(f"obstacle {i} extends outside the arena: {ob}")
    for name, region in (("start_region", world.start_region), ("goal_region", world.goal_region)):
        if not _shape_in_arena(region, world.width, world.height):
            raise ConfigurationError(f"{name} extends outside the arena: {region}")
        for i, ob in enumerate(world.obstacles):
            if shape_distance(region, ob) < world.robot_radius:
                raise ConfigurationError(
                    f"{name} intersects obstacle {i} inflated by robot_radius={world.robot_radius}"
                )


def raycast_angles(
    x: float, y: float, angles: np.ndarray, max_range: float, world: WorldSpec
) -> np.ndarray:
    """Cast rays from (x, y) at absolute angles; nearest hit per ray.

    Returns distances clamped to max_range.  Walls bound every ray, so a
    ray from inside the arena always has a finite hit.
    """
    dx = np.cos(angles)
    dy = np.sin(angles)
    best = np.full(angles.shape, np.inf)

    p, e = world._segments
    if p.shape[0]:
        diff_x = p[:, 0] - x
        diff_y = p[:, 1] - y
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = dx[:, None] * e[None, :, 1] - dy[:, None] * e[None, :, 0]
            t_num = diff_x * e[:, 1] - diff_y * e[:, 0]
            t = t_num[None, :] / denom
            u = (diff_x[None, :] * dy[:, None] - diff_y[None, :] * dx[:, None]) / denom
        hit = (np.abs(denom) > _EPS_PARALLEL) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
        best = np.where(hit, t, np.inf).min(axis=1)

    circles = world._circles
    if circles.shape[0]:
        ocx = x - circles[:, 0]
        ocy = y - circles[:, 1]
        b = dx[:, None] * ocx[None, :] + dy[:, None] * ocy[None, :]
        c0 = ocx * ocx + ocy * ocy - circles[:, 2] ** 2
        disc = b * b - c0[None, :]
        sq = np.sqrt(np.maximum(disc, 0.0))
        t1 = -b - sq
        t2 = -b + sq
        t = np.where(t1 >= 0.0, t1, t2)
        hit = (disc >= 0.0) & (t >= 0.0)
        best = np.minimum(best, np.where(hit, t, np.inf).min(axis=1))

    return np.minimum(best, max_range)


def raycast(origin: Pose, ray_angle: float, max_range: float, world: WorldSpec) -> float:
    """Distance along one absolute-angle ray from the pose's position."""
    if max_range <= 0.0:
        raise ConfigurationError(f"max_range must be positive, got {max_range}")
    out = raycast_angles(origin.x, origin.y, np.array([ray_angle], dtype=np.float64), max_range, world)
    return float(out[0])


def scan(pose: Pose, n_rays: int, max_range: float, world: WorldSpec) -> LaserScan:
    """Simulate a 180-degree planar scan centred on the robot heading.

    Beam i points at pose.theta - pi/2 + i * pi / (n_rays - 1); beams are
    evenly spaced and include both endpoints of the field of view.
    """
    if n_rays < 15 or n_rays % 15 != 0:
        raise ConfigurationError(f"n_rays must be >= 15 and divisible into 15 bins, got {n_rays}")
    if max_range <= 0.0:
        raise ConfigurationError(f"max_range must be positive, got {max_range}")
    rel = np.linspace(-0.5 * math.pi, 0.5 * math.pi, n_rays)
    ranges = raycast_angles(pose.x, pose.y, pose.theta + rel, max_range, world)
    ranges.flags.writeable = False
    return LaserScan(ranges=ranges, fov=math.pi, max_range=max_range)


def step_kinematics(pose: Pose, v: float, omega: float, dt: float) -> Pose:
    """Forward-Euler unicycle step: translate along the old heading, then turn."""
    if dt <= 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    return Pose(
        pose.x + v * math.cos(pose.theta) * dt,
        pose.y + v * math.sin(pose.theta) * dt,
        pose.theta + omega * dt,
    )


def collides(pose: Pose, world: WorldSpec) -> bool:
    """True when the robot disc intersects an obstacle or leaves the arena."""
    return not point_clear(world, pose.x, pose.y, world.robot_radius)


def point_clear(world: WorldSpec, x: float, y: float, radius: float) -> bool:
    """True when a disc of the given radius at (x, y) is collision free."""
    if x < radius or x > world.width - radius or y < radius or y > world.height - radius:
        return False
    for ob in world.obstacles:
        if ob.distance_to_point(x, y) < radius:
            return False
    return True


def world_to_dict(world: WorldSpec) -> dict:
    return {
        "format": WORLD_FORMAT,
        "width": world.width,
        "height": world.height,
        "robot_radius": world.robot_radius,
        "obstacles": [shape_to_dict(ob) for ob in world.obstacles],
        "start_region": shape_to_dict(world.start_region),
        "goal_region": shape_to_dict(world.goal_region),
    }


def world_from_dict(d: dict) -> WorldSpec:
    if not isinstance(d, dict):
        raise ConfigurationError("world document must be a JSON object")
    expected = {"format", "width", "height", "robot_radius", "obstacles", "start_region", "goal_region"}
    unknown = set(d) - expected
    if unknown:
        raise ConfigurationError(f"unknown world keys: {sorted(unknown)}")
    missing = expected - set(d)
    if missing:
        raise ConfigurationError(f"missing world keys: {sorted(missing)}")
    if d["format"] != WORLD_FORMAT:
        raise ConfigurationError(f"unsupported world format {d['format']!r}, expected {WORLD_FORMAT!r}")
    if not isinstance(d["obstacles"], list):
        raise ConfigurationError("world obstacles must be a list")
    return WorldSpec(
        width=float(d["width"]),
        height=float(d["height"]),
        robot_radius=float(d["robot_radius"]),
        obstacles=tuple(shape_from_dict(ob) for ob in d["obstacles"]),
        start_region=shape_from_dict(d["start_region"]),
        goal_region=shape_from_dict(d["goal_region"]),
    )


def world_to_json(world: WorldSpec) -> str:
    return json.dumps(world_to_dict(world), indent=2, sort_keys=True) + "\n"


def save_world(world: WorldSpec, path: str | Path) -> None:
    Path(path).write_text(world_to_json(world))


def load_world(path: str | Path) -> WorldSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON in world file {path}: {exc}") from exc
    return world_from_dict(doc)
