"""Geometry tests: ray casting against a marching oracle, kinematics, collision."""

from __future__ import annotations

import math

import numpy as np
import pytest

from resnav.errors import ConfigurationError
from resnav.world import (
    Circle,
    Pose,
    Rect,
    WorldSpec,
    collides,
    load_world,
    normalize_angle,
    raycast,
    save_world,
    scan,
    shape_distance,
    step_kinematics,
    world_from_dict,
    world_to_dict,
)
from tests.conftest import make_empty_world


def centered_world(side: float, obstacles=(), robot_radius: float = 0.1) -> WorldSpec:
    """Arena [0, side]^2 with regions tucked into clear corners."""
    return WorldSpec(
        width=side,
        height=side,
        robot_radius=robot_radius,
        obstacles=obstacles,
        start_region=Rect(0.3, 0.3, 0.8, 0.8),
        goal_region=Rect(side - 0.8, side - 0.8, side - 0.3, side - 0.3),
    )


def march_raycast(world: WorldSpec, x: float, y: float, angle: float, max_range: float,
                  step: float = 0.001) -> float:
    """Oracle: march 1 mm samples along the ray, first sample inside anything."""
    n = int(max_range / step) + 1
    ts = np.arange(1, n + 1) * step
    px = x + ts * math.cos(angle)
    py = y + ts * math.sin(angle)
    inside = (px < 0) | (px > world.width) | (py < 0) | (py > world.height)
    for ob in world.obstacles:
        if isinstance(ob, Rect):
            inside |= (px >= ob.x_min) & (px <= ob.x_max) & (py >= ob.y_min) & (py <= ob.y_max)
        else:
            inside |= (px - ob.cx) ** 2 + (py - ob.cy) ** 2 <= ob.r**2
    hits = np.nonzero(inside)[0]
    return float(ts[hits[0]]) if hits.size else max_range


class TestRaycast:
    def test_empty_arena_wall_hit(self):
        w = centered_world(10.0)
        assert raycast(Pose(5.0, 5.0, 0.0), 0.0, 20.0, w) == pytest.approx(5.0, abs=1e-12)

    def test_rect_face_hit(self):
        # rect two metres ahead of the robot along +x
        ob = Rect(7.0, 4.0, 8.0, 6.0)
        w = centered_world(10.0, obstacles=(ob,))
        assert raycast(Pose(5.0, 5.0, 0.0), 0.0, 20.0, w) == pytest.approx(2.0, abs=1e-12)

    def test_circle_hit(self):
        ob = Circle(9.0, 5.0, 1.0)
        w = centered_world(12.0, obstacles=(ob,))
        assert raycast(Pose(5.0, 5.0, 0.0), 0.0, 20.0, w) == pytest.approx(3.0, abs=1e-12)

    def test_max_range_clamp(self):
        w = centered_world(10.0)
        assert raycast(Pose(5.0, 5.0, 0.0), 0.0, 3.0, w) == pytest.approx(3.0)
        assert raycast(Pose(5.0, 5.0, 0.0), 2.1, 3.0, w) == pytest.approx(3.0)

    def test_against_marching_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            side = rng.uniform(4.0, 10.0)
            obstacles = []
            for _k in range(rng.integers(0, 5)):
                if rng.random() < 0.5:
                    cx = rng.uniform(1.0, side - 1.0)
                    cy = rng.uniform(1.0, side - 1.0)
                    obstacles.append(Circle(cx, cy, rng.uniform(0.2, min(1.0, cx, cy, side - cx, side - cy))))
                else:
                    x0 = rng.uniform(0.5, side - 1.5)
                    y0 = rng.uniform(0.5, side - 1.5)
                    obstacles.append(Rect(x0, y0, x0 + rng.uniform(0.3, 1.0), y0 + rng.uniform(0.3, 1.0)))
            w = WorldSpec(side, side, 0.05, tuple(obstacles),
                          Rect(0.05, 0.05, 0.15, 0.15), Rect(side - 0.15, 0.05, side - 0.05, 0.15))
            for _r in range(5):
                x, y = rng.uniform(0.3, side - 0.3, 2)
                if not all(ob.distance_to_point(x, y) > 0.05 for ob in obstacles):
                    continue
                ang = rng.uniform(-math.pi, math.pi)
                got = raycast(Pose(x, y, 0.0), ang, 5.0, w)
                want = march_raycast(w, x, y, ang, 5.0)
                assert abs(got - want) <= 2e-3, (x, y, ang, got, want)


class TestScan:
    def test_symmetry_in_empty_square(self):
        w = centered_world(10.0)
        s = scan(Pose(5.0, 5.0, 0.3), 180, 5.0, w)
        assert np.all(np.abs(s.ranges - s.ranges[::-1]) < 1e-9)

    def test_left_obstacle_shortens_left_half(self):
        # obstacle on the robot's left (+y side for heading 0)
        w = centered_world(10.0, obstacles=(Rect(4.0, 6.0, 6.0, 7.0),))
        s = scan(Pose(5.0, 5.0, 0.0), 180, 5.0, w)
        right = s.ranges[:90]  # beams at negative relative angle
        left = s.ranges[90:]
        assert left.min() < right.min()

    def test_ray_count_and_spacing(self):
        w = centered_world(10.0)
        s = scan(Pose(5.0, 5.0, 0.0), 180, 5.0, w)
        assert len(s.ranges) == 180
        assert s.angles[0] == pytest.approx(-math.pi / 2)
        assert s.angles[-1] == pytest.approx(math.pi / 2)
        gaps = np.diff(s.angles)
        assert np.allclose(gaps, math.pi / 179)

    def test_all_ranges_clamped_and_positive(self):
        w = centered_world(6.0, obstacles=(Circle(3.0, 4.0, 0.5),))
        s = scan(Pose(3.0, 2.0, 1.1), 180, 4.0, w)
        assert np.all(s.ranges > 0.0)
        assert np.all(s.ranges <= 4.0)

    def test_determinism(self):
        w = centered_world(9.0, obstacles=(Circle(4.0, 6.0, 0.7), Rect(6.0, 2.0, 7.0, 3.0)))
        a = scan(Pose(3.3, 3.1, -0.7), 180, 5.0, w)
        b = scan(Pose(3.3, 3.1, -0.7), 180, 5.0, w)
        assert np.array_equal(a.ranges, b.ranges)

    def test_bad_ray_count_rejected(self):
        w = centered_world(10.0)
        with pytest.raises(ConfigurationError):
            scan(Pose(5.0, 5.0, 0.0), 14, 5.0, w)
        with pytest.raises(ConfigurationError):
            scan(Pose(5.0, 5.0, 0.0), 100, 5.0, w)


class TestKinematics:
    def test_straight_line(self):
        p = step_kinematics(Pose(0.0, 0.0, 0.0), 1.0, 0.0, 0.1)
        assert (p.x, p.y, p.theta) == pytest.approx((0.1, 0.0, 0.0), abs=1e-15)

    def test_turn_in_place_wraps_to_pi(self):
        p = step_kinematics(Pose(0.0, 0.0, 0.0), 0.0, math.pi, 1.0)
        assert p.x == 0.0 and p.y == 0.0
        assert p.theta == pytest.approx(math.pi)
        assert p.theta <= math.pi

    def test_translation_uses_old_heading(self):
        p = step_kinematics(Pose(1.0, 1.0, math.pi / 2), 2.0, 1.0, 0.1)
        assert p.x == pytest.approx(1.0, abs=1e-12)
        assert p.y == pytest.approx(1.2)
        assert p.theta == pytest.approx(math.pi / 2 + 0.1)

    def test_theta_always_normalized(self):
        rng = np.random.default_rng(3)
        p = Pose(2.0, 2.0, 0.0)
        for _ in range(500):
            p = step_kinematics(p, rng.uniform(-1, 1), rng.uniform(-1, 1), 0.5)
            assert -math.pi < p.theta <= math.pi

    def test_normalize_angle_edges(self):
        assert normalize_angle(math.pi) == pytest.approx(math.pi)
        assert normalize_angle(-math.pi) == pytest.approx(math.pi)
        assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
        assert normalize_angle(0.0) == 0.0


class TestCollision:
    def test_circle_boundary(self):
        ob = Circle(5.0, 5.0, 1.0)
        w = centered_world(10.0, obstacles=(ob,), robot_radius=0.5)
        # centre distance r_obs + robot_radius -/+ 0.01
        assert collides(Pose(5.0, 5.0 + 1.49, 0.0), w)
        assert not collides(Pose(5.0, 5.0 + 1.51, 0.0), w)

    def test_wall_containment(self):
        w = centered_world(10.0, robot_radius=0.5)
        assert collides(Pose(0.4, 5.0, 0.0), w)
        assert not collides(Pose(0.6, 5.0, 0.0), w)

    def test_rect_overlap(self):
        ob = Rect(4.0, 4.0, 6.0, 6.0)
        w = centered_world(10.0, obstacles=(ob,), robot_radius=0.3)
        assert collides(Pose(3.8, 5.0, 0.0), w)
        assert not collides(Pose(3.6, 5.0, 0.0), w)

    def test_monotone_in_radius(self):
        rng = np.random.default_rng(11)
        ob = (Circle(4.0, 6.0, 0.8), Rect(6.0, 2.0, 7.5, 3.5))
        for _ in range(200):
            x, y = rng.uniform(1.0, 9.0, 2)
            r_small = rng.uniform(0.05, 0.4)
            r_big = r_small + rng.uniform(0.01, 0.5)
            w_small = centered_world(10.0, obstacles=ob, robot_radius=r_small)
            w_big = centered_world(10.0, obstacles=ob, robot_radius=r_big)
            if collides(Pose(x, y, 0.0), w_small):
                assert collides(Pose(x, y, 0.0), w_big)


class TestWorldSpec:
    def test_region_overlapping_obstacle_rejected(self):
        with pytest.raises(ConfigurationError):
            WorldSpec(
                width=10.0,
                height=10.0,
                robot_radius=0.2,
                obstacles=(Rect(2.0, 2.0, 3.0, 3.0),),
                start_region=Rect(2.5, 2.5, 4.0, 4.0),
                goal_region=Rect(8.0, 8.0, 9.0, 9.0),
            )

    def test_obstacle_outside_arena_rejected(self):
        with pytest.raises(ConfigurationError):
            WorldSpec(10.0, 10.0, 0.2, (Circle(9.9, 5.0, 0.5),),
                      Rect(1.0, 1.0, 2.0, 2.0), Rect(7.0, 7.0, 8.0, 8.0))

    def test_shape_distance(self):
        assert shape_distance(Rect(0, 0, 1, 1), Rect(2, 0, 3, 1)) == pytest.approx(1.0)
        assert shape_distance(Rect(0, 0, 1, 1), Circle(3.0, 0.5, 0.5)) == pytest.approx(1.5)
        assert shape_distance(Circle(0, 0, 1), Circle(4, 0, 1)) == pytest.approx(2.0)
        assert shape_distance(Rect(0, 0, 2, 2), Circle(1.0, 1.0, 0.2)) == 0.0

    def test_file_round_trip(self, tmp_path):
        w = centered_world(8.0, obstacles=(Circle(4.0, 5.0, 0.6), Rect(5.5, 1.0, 6.5, 2.0)))
        path = tmp_path / "w.json"
        save_world(w, path)
        again = load_world(path)
        assert again == w
        save_world(again, tmp_path / "w2.json")
        assert (tmp_path / "w.json").read_bytes() == (tmp_path / "w2.json").read_bytes()

    def test_unknown_key_rejected(self):
        doc = world_to_dict(make_empty_world())
        doc["extra"] = 1
        with pytest.raises(ConfigurationError, match="extra"):
            world_from_dict(doc)

    def test_bad_format_rejected(self):
        doc = world_to_dict(make_empty_world())
        doc["format"] = "world/9"
        with pytest.raises(ConfigurationError, match="world/9"):
            world_from_dict(doc)
