import math

import numpy as np
import pytest

from gridnav.gridworld import CellState, OccupancyGrid, Pose, WorldMap


def make_box_grid(w_m=10.0, h_m=10.0, res=0.05, wall=2):
    """Free rectangular room enclosed by `wall` cells of occupied border."""
    w = int(round(w_m / res))
    h = int(round(h_m / res))
    cells = np.full((h, w), CellState.FREE, dtype=np.uint8)
    cells[:wall, :] = CellState.OCCUPIED
    cells[-wall:, :] = CellState.OCCUPIED
    cells[:, :wall] = CellState.OCCUPIED
    cells[:, -wall:] = CellState.OCCUPIED
    return OccupancyGrid(resolution=res, origin=np.zeros(2), cells=cells)


@pytest.fixture
def box_grid():
    return make_box_grid()


@pytest.fixture
def box_world():
    return WorldMap(grid=make_box_grid(), labels=[], name="box")


@pytest.fixture
def center_pose():
    return Pose(5.0, 5.0, 0.0)


def march_range(grid, pose, angle, max_range, step_frac=0.1):
    """Independent fine-step marching oracle for ray ranges (step res/10).

    Point sampling can step over a cell the ray only grazes at a corner, so
    use slab_range to adjudicate large disagreements.
    """
    step = grid.resolution * step_frac
    d = step
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    while d <= max_range:
        x = pose.x + d * cos_a
        y = pose.y + d * sin_a
        state = grid.state_at((x, y))
        if state == CellState.OCCUPIED:
            return d
        gx = (x - grid.origin[0]) / grid.resolution
        gy = (y - grid.origin[1]) / grid.resolution
        if not (0 <= gx < grid.width and 0 <= gy < grid.height):
            return max_range
        d += step
    return max_range


def slab_range(grid, pose, angle, max_range):
    """Exact independent oracle: minimum positive ray/box intersection over
    every occupied cell, via slab tests (no grid traversal involved)."""
    res = grid.resolution
    rows, cols = np.nonzero(grid.cells == CellState.OCCUPIED)
    x0 = grid.origin[0] + cols * res
    x1 = x0 + res
    y0 = grid.origin[1] + (grid.height - rows - 1) * res
    y1 = y0 + res
    dx, dy = math.cos(angle), math.sin(angle)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx0 = (x0 - pose.x) / dx
        tx1 = (x1 - pose.x) / dx
        ty0 = (y0 - pose.y) / dy
        ty1 = (y1 - pose.y) / dy
    if dx == 0:
        inside_x = (x0 <= pose.x) & (pose.x <= x1)
        tx_lo = np.where(inside_x, -np.inf, np.inf)
        tx_hi = np.where(inside_x, np.inf, -np.inf)
    else:
        tx_lo = np.minimum(tx0, tx1)
        tx_hi = np.maximum(tx0, tx1)
    if dy == 0:
        inside_y = (y0 <= pose.y) & (pose.y <= y1)
        ty_lo = np.where(inside_y, -np.inf, np.inf)
        ty_hi = np.where(inside_y, np.inf, -np.inf)
    else:
        ty_lo = np.minimum(ty0, ty1)
        ty_hi = np.maximum(ty0, ty1)
    t_enter = np.maximum(tx_lo, ty_lo)
    t_exit = np.minimum(tx_hi, ty_hi)
    hit = (t_enter <= t_exit) & (t_exit > 0) & (t_enter <= max_range)
    if not hit.any():
        return max_range
    return float(np.maximum(t_enter[hit], 0.0).min())
