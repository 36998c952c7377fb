"""Occupancy rasterisation and shortest paths for the evaluation oracle.

Cells are occupied when their centre lies inside an obstacle inflated by
robot_radius or within robot_radius of the arena boundary, matching the
collision test for the robot centre. Paths are 8-connected with unit and
sqrt(2) step costs in cell units; diagonal moves may not cut corners (both
orthogonal neighbours must be free).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, UsageError
from .world import Circle, Rect, WorldSpec

SQRT2 = math.sqrt(2.0)
_CELL_ASPECT_TOL = 1e-9


@dataclass(frozen=True)
class OccupancyGrid:
    occupied: np.ndarray  # bool, indexed [iy, ix]
    width: float  # m
    height: float  # m

    @property
    def rows(self) -> int:
        return self.occupied.shape[0]

    @property
    def cols(self) -> int:
        return self.occupied.shape[1]

    @cached_property
    def cell_size(self) -> float:
        """Metres per cell; requires square cells."""
        cw = self.width / self.cols
        ch = self.height / self.rows
        if abs(cw - ch) > _CELL_ASPECT_TOL * max(cw, ch, 1.0):
            raise ConfigurationError(
                f"grid cells are not square ({cw} x {ch}); pick cols/rows matching the arena aspect"
            )
        return cw

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell (ix, iy) containing a world point, clipped to the grid."""
        ix = min(max(int(x / (self.width / self.cols)), 0), self.cols - 1)
        iy = min(max(int(y / (self.height / self.rows)), 0), self.rows - 1)
        return (ix, iy)

    def center_of(self, ix: int, iy: int) -> tuple[float, float]:
        return ((ix + 0.5) * self.width / self.cols, (iy + 0.5) * self.height / self.rows)


def rasterize(world: WorldSpec, cols: int, rows: int) -> OccupancyGrid:
    """Rasterise a world to an inflated occupancy grid."""
    if cols < 1 or rows < 1:
        raise ConfigurationError(f"grid size must be positive, got {cols} x {rows}")
    r = world.robot_radius
    xs = (np.arange(cols) + 0.5) * (world.width / cols)
    ys = (np.arange(rows) + 0.5) * (world.height / rows)
    gx, gy = np.meshgrid(xs, ys)  # (rows, cols)
    occ = (gx < r) | (gx > world.width - r) | (gy < r) | (gy > world.height - r)
    for ob in world.obstacles:
        if isinstance(ob, Rect):
            dx = np.maximum(np.maximum(ob.x_min - gx, gx - ob.x_max), 0.0)
            dy = np.maximum(np.maximum(ob.y_min - gy, gy - ob.y_max), 0.0)
            occ |= dx * dx + dy * dy < r * r
        else:
            assert isinstance(ob, Circle)
            occ |= (gx - ob.cx) ** 2 + (gy - ob.cy) ** 2 < (ob.r + r) ** 2
    occ.flags.writeable = False
    return OccupancyGrid(occupied=occ, width=world.width, height=world.height)


def _octile(ix: int, iy: int, gx: int, gy: int) -> float:
    dx = abs(ix - gx)
    dy = abs(iy - gy)
    lo = min(dx, dy)
    return (dx + dy - 2 * lo) + SQRT2 * lo


def astar_path(
    grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int]
) -> tuple[float, list[tuple[int, int]]]:
    """A* over the grid; returns (length in metres, cell path) or (inf, []).

    Runs until no open node can beat the best goal cost, so the returned
    length is the exact minimum over float-accumulated step costs.
    """
    cell = grid.cell_size
    occ = grid.occupied
    rows, cols = occ.shape
    for name, (ix, iy) in (("start", start), ("goal", goal)):
        if not (0 <= ix < cols and 0 <= iy < rows):
            raise UsageError(f"{name} cell {(ix, iy)} outside grid {cols} x {rows}")
        if occ[iy, ix]:
            raise UsageError(f"{name} cell {(ix, iy)} is occupied")
    if start == goal:
        return (0.0, [start])

    gx, gy = goal
    g = np.full((rows, cols), np.inf)
    parent = np.full((rows, cols), -1, dtype=np.int64)
    g[start[1], start[0]] = 0.0
    heap: list[tuple[float, float, int, int]] = [(_octile(start[0], start[1], gx, gy), 0.0, start[0], start[1])]
    best = np.inf
    while heap:
        f, gc, ix, iy = heapq.heappop(heap)
        if f >= best:
            break
        if gc > g[iy, ix]:
            continue  # stale entry
        if ix == gx and iy == gy:
            best = gc
            continue
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nx, ny = ix + dx, iy + dy
                if not (0 <= nx < cols and 0 <= ny < rows) or occ[ny, nx]:
                    continue
                if dx != 0 and dy != 0:
                    if occ[iy, nx] or occ[ny, ix]:
                        continue  # no corner cutting
                    step = SQRT2
                else:
                    step = 1.0
                g2 = gc + step
                if g2 < g[ny, nx]:
                    g[ny, nx] = g2
                    parent[ny, nx] = iy * cols + ix
                    heapq.heappush(heap, (g2 + _octile(nx, ny, gx, gy), g2, nx, ny))
    if not math.isfinite(best):
        return (math.inf, [])
    path = [goal]
    node = goal
    while node != start:
        enc = parent[node[1], node[0]]
        node = (int(enc % cols), int(enc // cols))
        path.append(node)
    path.reverse()
    return (best * cell, path)


def astar_shortest(grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int]) -> float:
    """Shortest 8-connected path length in metres, inf when unreachable."""
    return astar_path(grid, start, goal)[0]


def nearest_free_cell(grid: OccupancyGrid, ix: int, iy: int, radius: int = 3) -> tuple[int, int]:
    """The given cell, or the closest free cell within a small window.

    A pose can be collision-free while the centre of its cell sits inside
    the inflated set; snapping keeps the planner usable at coarse
    resolutions.
    """
    if not grid.occupied[iy, ix]:
        return (ix, iy)
    best = None
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            nx, ny = ix + dx, iy + dy
            if 0 <= nx < grid.cols and 0 <= ny < grid.rows and not grid.occupied[ny, nx]:
                d = dx * dx + dy * dy
                if best is None or d < best[0]:
                    best = (d, nx, ny)
    if best is None:
        raise UsageError(f"no free cell near ({ix}, {iy}) within {radius} cells")
    return (best[1], best[2])


class ShortestPathOracle:
    """Caches rasterized grids and shortest-path queries per world.

    Worlds are keyed by identity, so reuse the same WorldSpec objects
    across queries to benefit from the cache. Query endpoints snap to the
    nearest free cell within a few cells.
    """

    def __init__(self, cell: float = 0.05) -> None:
        if cell <= 0.0:
            raise ConfigurationError(f"cell size must be positive, got {cell}")
        self.cell = cell
        self._grids: dict[int, OccupancyGrid] = {}
        self._lengths: dict[tuple[int, tuple[int, int], tuple[int, int]], float] = {}

    def grid(self, world: WorldSpec) -> OccupancyGrid:
        key = id(world)
        if key not in self._grids:
            cols = max(2, round(world.width / self.cell))
            rows = max(2, round(world.height / self.cell))
            self._grids[key] = rasterize(world, cols, rows)
        return self._grids[key]

    def shortest(self, world: WorldSpec, start_xy, goal_xy) -> float:
        grid = self.grid(world)
        s = nearest_free_cell(grid, *grid.cell_of(*start_xy))
        g = nearest_free_cell(grid, *grid.cell_of(*goal_xy))
        key = (id(world), s, g)
        if key not in self._lengths:
            self._lengths[key] = astar_shortest(grid, s, g)
        return self._lengths[key]
