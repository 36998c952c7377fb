"""Shared fixtures: small hand-built worlds used across test modules."""

from __future__ import annotations

import pytest

from resnav.world import Circle, Rect, WorldSpec


def make_empty_world(side: float = 10.0, robot_radius: float = 0.15) -> WorldSpec:
    return WorldSpec(
        width=side,
        height=side,
        robot_radius=robot_radius,
        obstacles=(),
        start_region=Rect(0.2 * side, 0.2 * side, 0.35 * side, 0.8 * side),
        goal_region=Rect(0.65 * side, 0.2 * side, 0.8 * side, 0.8 * side),
    )


def make_cluttered_world() -> WorldSpec:
    """8x8 arena with a central start box, right-side goal strip, mixed obstacles."""
    return WorldSpec(
        width=8.0,
        height=8.0,
        robot_radius=0.15,
        obstacles=(
            Rect(5.2, 1.2, 5.9, 2.1),
            Rect(5.3, 5.6, 6.0, 6.3),
            Circle(5.7, 3.9, 0.35),
            Circle(2.0, 6.0, 0.3),
            Rect(1.4, 1.5, 2.1, 2.2),
        ),
        start_region=Rect(3.55, 3.55, 4.45, 4.45),
        goal_region=Rect(6.8, 1.0, 7.3, 7.0),
    )


@pytest.fixture
def empty_world() -> WorldSpec:
    return make_empty_world()


@pytest.fixture
def cluttered_world() -> WorldSpec:
    return make_cluttered_world()
