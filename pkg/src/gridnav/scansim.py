"""Simulated 2D LiDAR: ray casting against a world map and trajectory replay.

Scans are robot-relative: beam angles are offsets from the robot heading,
CCW positive, ordered from ``angle_min`` to ``angle_max``. A beam that hits
nothing within range carries the ``max_range`` sentinel.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from gridnav import kernels
from gridnav.gridworld import CellState, OccupancyGrid, Pose, world_to_grid_frame


class SimulationError(ValueError):
    pass


class TrajectoryError(ValueError):
    pass


@dataclass
class LidarParams:
    fov: float = math.radians(270.0)
    n_beams: int = 541
    max_range: float = 20.0
    range_noise_sigma: float = 0.0

    def __post_init__(self):
        if not 0 < self.fov <= 2 * math.pi:
            raise SimulationError(f"fov must be in (0, 2pi], got {self.fov}")
        if self.n_beams < 2:
            raise SimulationError(f"need at least 2 beams, got {self.n_beams}")
        if self.max_range <= 0:
            raise SimulationError(f"max_range must be positive, got {self.max_range}")
        if self.range_noise_sigma < 0:
            raise SimulationError("range_noise_sigma must be >= 0")


@dataclass
class Scan:
    angle_min: float
    angle_max: float
    ranges: np.ndarray
    max_range: float
    timestamp: float = 0.0

    def __post_init__(self):
        self.ranges = np.asarray(self.ranges, dtype=np.float64)

    @property
    def n_beams(self):
        return self.ranges.shape[0]

    @property
    def angles(self):
        return np.linspace(self.angle_min, self.angle_max, self.n_beams)

    @property
    def hits(self):
        return self.ranges < self.max_range


@dataclass
class Trajectory:
    waypoints: np.ndarray       # (N, 2) world meters
    speed: float = 0.5          # m/s
    scan_rate: float = 10.0     # Hz

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=np.float64)
        if self.waypoints.ndim != 2 or self.waypoints.shape[0] < 2:
            raise TrajectoryError("trajectory needs at least 2 waypoints")
        if self.speed <= 0 or self.scan_rate <= 0:
            raise TrajectoryError("speed and scan_rate must be positive")

    @property
    def total_length(self):
        return float(np.sum(np.hypot(*np.diff(self.waypoints, axis=0).T)))


def load_trajectory(path):
    with open(path) as f:
        doc = json.load(f)
    try:
        return Trajectory(waypoints=np.asarray(doc["waypoints_m"], float),
                          speed=float(doc.get("speed_mps", 0.5)),
                          scan_rate=float(doc.get("scan_rate_hz", 10.0)))
    except KeyError as e:
        raise TrajectoryError(f"{path}: missing field {e}") from None


def save_trajectory(path, traj):
    from gridnav.util import atomic_write
    atomic_write(path, json.dumps({"waypoints_m": traj.waypoints.tolist(),
                                   "speed_mps": traj.speed,
                                   "scan_rate_hz": traj.scan_rate}) + "\n")


def cast_scan(grid, pose, params, rng=None, timestamp=0.0):
    """Cast one scan from ``pose`` against the grid's OCCUPIED cells.

    Per beam, the range is the distance to the first OCCUPIED cell along the
    ray (UNKNOWN does not block); beams that reach ``max_range`` or exit the
    map carry the sentinel. With ``range_noise_sigma`` set, Gaussian noise is
    added to hit ranges only and the result clamped to (0, max_range].
    """
    if isinstance(grid, OccupancyGrid):
        g = grid
    else:
        g = grid.grid  # WorldMap
    gx, gy = world_to_grid_frame(g, (pose.x, pose.y))
    col, row = int(math.floor(gx)), int(math.floor(gy))
    if not g.in_bounds(col, row):
        raise SimulationError(f"pose ({pose.x:.2f}, {pose.y:.2f}) outside map bounds")
    if g.cells[row, col] == CellState.OCCUPIED:
        raise SimulationError(f"pose ({pose.x:.2f}, {pose.y:.2f}) inside an occupied cell")

    rel = np.linspace(-params.fov / 2.0, params.fov / 2.0, params.n_beams)
    world_angles = pose.theta + rel
    # grid frame has y flipped relative to world
    dir_x = np.cos(world_angles)
    dir_y = -np.sin(world_angles)
    max_cells = params.max_range / g.resolution
    dist = kernels.raycast(g.cells, gx, gy, dir_x, dir_y, max_cells,
                           int(CellState.OCCUPIED))
    ranges = dist * g.resolution

    if params.range_noise_sigma > 0:
        if rng is None:
            raise SimulationError("range noise requested but no rng supplied")
        hit = ranges < params.max_range
        noise = rng.normal(0.0, params.range_noise_sigma, size=ranges.shape)
        noisy = np.clip(ranges + noise, 1e-6, params.max_range)
        ranges = np.where(hit, noisy, params.max_range)

    return Scan(angle_min=float(rel[0]), angle_max=float(rel[-1]),
                ranges=ranges, max_range=params.max_range, timestamp=timestamp)


def pose_at(traj, distance):
    """Pose on the trajectory polyline at arclength ``distance``.

    Heading follows the current segment; a point exactly on a shared waypoint
    takes the next segment's heading.
    """
    seg = np.diff(traj.waypoints, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    d = min(max(distance, 0.0), total)
    i = int(np.searchsorted(cum, d, side="right")) - 1
    i = min(i, len(seg_len) - 1)
    frac = (d - cum[i]) / seg_len[i] if seg_len[i] > 0 else 0.0
    p = traj.waypoints[i] + frac * seg[i]
    theta = math.atan2(seg[i, 1], seg[i, 0])
    return Pose(float(p[0]), float(p[1]), theta)


def play_trajectory(world, traj, params, rng=None):
    """Yield (pose, scan) samples at 1/scan_rate spacing along the polyline.

    The robot moves at constant speed; timestamps start at 0 and include the
    final endpoint when it falls on the sample lattice.
    """
    grid = world.grid if hasattr(world, "grid") else world
    for k, wp in enumerate(traj.waypoints):
        state = grid.state_at(wp)
        if state != CellState.FREE:
            raise TrajectoryError(
                f"waypoint {k} at {tuple(wp)} is {CellState(state).name}, not FREE"
            )
    total_time = traj.total_length / traj.speed
    n = int(math.floor(total_time * traj.scan_rate + 1e-9)) + 1
    for k in range(n):
        t = k / traj.scan_rate
        pose = pose_at(traj, traj.speed * t)
        yield pose, cast_scan(grid, pose, params, rng=rng, timestamp=t)


@dataclass
class OdometryDrift:
    """Cumulative Gaussian pose drift, for emulating SLAM frame wander."""
    sigma_xy: float = 0.0       # meters per step
    sigma_theta: float = 0.0    # radians per step
    _offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def apply(self, pose, rng):
        if self.sigma_xy > 0 or self.sigma_theta > 0:
            self._offset = self._offset + rng.normal(
                0.0, [self.sigma_xy, self.sigma_xy, self.sigma_theta])
        return Pose(pose.x + self._offset[0], pose.y + self._offset[1],
                    pose.theta + self._offset[2])
