"""Local-map construction: per-scan rasters and crops of the running global map.

A LocalMap is robot-centric and heading-up: the robot sits at the bottom
center of a square image covering ``extent`` meters ahead (robot frame
x in [-extent/2, extent/2], y in [0, extent]). Pixel semantics are
FREE=255, OCCUPIED=0, UNKNOWN=128.
"""

import json
from dataclasses import dataclass

import numpy as np

from gridnav import kernels
from gridnav.gridworld import CellState, OccupancyGrid, Pose
from gridnav.pgmio import load_pgm, save_pgm

PX_FREE = 255
PX_OCCUPIED = 0
PX_UNKNOWN = 128

_STATE_TO_PIXEL = np.array([PX_FREE, PX_OCCUPIED, PX_UNKNOWN], dtype=np.uint8)

# log-odds update constants (hit/miss increments, saturation clamp, and the
# thresholds that refresh the tri-state raster)
L_HIT = 0.85
L_MISS = -0.4
L_CLAMP = 5.0
L_OCC_THRESHOLD = 0.3
L_FREE_THRESHOLD = -0.3

DEFAULT_EXTENT = 16.0


def robot_to_image(xr, yf, extent, px):
    """Robot-frame meters -> continuous image coordinates (u along columns,
    v along rows, v down). The robot maps to (px/2, px)."""
    scale = px / extent
    u = (np.asarray(xr) + extent / 2.0) * scale
    v = (extent - np.asarray(yf)) * scale
    return u, v


def image_to_robot(u, v, extent, px):
    """Pixel-center image coordinates -> robot-frame meters."""
    scale = extent / px
    xr = (np.asarray(u) + 0.5) * scale - extent / 2.0
    yf = extent - (np.asarray(v) + 0.5) * scale
    return xr, yf


@dataclass
class LocalMap:
    image: np.ndarray           # uint8, square, values in {0, 128, 255}
    extent: float               # meters per side
    anchor_pose: Pose

    def __post_init__(self):
        self.image = np.ascontiguousarray(self.image, dtype=np.uint8)
        if self.image.ndim != 2 or self.image.shape[0] != self.image.shape[1]:
            raise ValueError(f"local map image must be square, got {self.image.shape}")
        if self.extent <= 0:
            raise ValueError(f"extent must be positive, got {self.extent}")

    @property
    def px(self):
        return self.image.shape[0]

    @classmethod
    def unknown(cls, extent, px, anchor_pose):
        return cls(np.full((px, px), PX_UNKNOWN, dtype=np.uint8), extent, anchor_pose)

    def save(self, image_path, sidecar_path):
        from gridnav.util import atomic_write
        save_pgm(image_path, self.image)
        atomic_write(sidecar_path, json.dumps(
            {"extent_m": self.extent,
             "anchor_pose": [self.anchor_pose.x, self.anchor_pose.y,
                             self.anchor_pose.theta]}) + "\n")

    @classmethod
    def load(cls, image_path, sidecar_path):
        image = load_pgm(image_path)
        with open(sidecar_path) as f:
            meta = json.load(f)
        x, y, theta = meta["anchor_pose"]
        return cls(image, float(meta["extent_m"]), Pose(x, y, theta))


def scan_endpoints_robot(scan):
    """Beam endpoints in the robot frame (x right, y forward)."""
    a = scan.angles
    xr = -scan.ranges * np.sin(a)
    yf = scan.ranges * np.cos(a)
    return xr, yf


def rasterize_scan(scan, pose, extent=DEFAULT_EXTENT, px=488):
    """Render one scan into a LocalMap: traversed pixels FREE, hit endpoints
    OCCUPIED, everything untouched UNKNOWN."""
    if px < 2:
        raise ValueError(f"px must be >= 2, got {px}")
    img = np.full((px, px), PX_UNKNOWN, dtype=np.uint8)
    xr, yf = scan_endpoints_robot(scan)
    ue, ve = robot_to_image(xr, yf, extent, px)
    hit = scan.hits.astype(np.uint8)
    # start half a pixel above the bottom edge so the ray origin is in-raster
    u0 = px / 2.0
    v0 = px - 0.5
    kernels.paint_beams(img, u0, v0, np.ascontiguousarray(ue),
                        np.ascontiguousarray(ve), hit, PX_FREE)
    cu = np.floor(ue).astype(np.int64)
    cv = np.floor(ve).astype(np.int64)
    inb = (cu >= 0) & (cu < px) & (cv >= 0) & (cv < px) & scan.hits
    img[cv[inb], cu[inb]] = PX_OCCUPIED
    return LocalMap(img, extent, pose)


@dataclass
class GlobalMapState:
    """Incrementally built global occupancy map (known-pose log-odds)."""
    grid: OccupancyGrid
    l_hit: float = L_HIT
    l_miss: float = L_MISS
    l_clamp: float = L_CLAMP
    l_occ: float = L_OCC_THRESHOLD
    l_free: float = L_FREE_THRESHOLD

    @classmethod
    def like(cls, grid, **kw):
        """Fresh all-unknown state sharing a world grid's georeferencing."""
        g = OccupancyGrid(
            resolution=grid.resolution,
            origin=grid.origin.copy(),
            cells=np.full(grid.cells.shape, CellState.UNKNOWN, dtype=np.uint8),
            logodds=np.zeros(grid.cells.shape, dtype=np.float32),
        )
        return cls(grid=g, **kw)

    def copy(self):
        return GlobalMapState(grid=self.grid.copy(), l_hit=self.l_hit,
                              l_miss=self.l_miss, l_clamp=self.l_clamp,
                              l_occ=self.l_occ, l_free=self.l_free)


def update_global(state, scan, pose):
    """Fold one scan into the global log-odds map.

    Traversed cells get the miss increment, hit endpoints the hit increment;
    values are clamped and the tri-state raster refreshed from thresholds.
    """
    g = state.grid
    from gridnav.gridworld import world_to_grid_frame
    gx, gy = world_to_grid_frame(g, (pose.x, pose.y))
    if not (0 <= gx < g.width and 0 <= gy < g.height):
        raise ValueError(f"pose ({pose.x:.2f}, {pose.y:.2f}) outside global map")

    xr, yf = scan_endpoints_robot(scan)
    world = pose.robot_to_world(np.stack([xr, yf], axis=1))
    ex = (world[:, 0] - g.origin[0]) / g.resolution
    ey = g.height - (world[:, 1] - g.origin[1]) / g.resolution
    hit = scan.hits.astype(np.uint8)

    kernels.accumulate_beams(g.logodds, gx, gy,
                             np.ascontiguousarray(ex), np.ascontiguousarray(ey),
                             hit, state.l_miss, state.l_hit)
    np.clip(g.logodds, -state.l_clamp, state.l_clamp, out=g.logodds)

    cells = np.full(g.logodds.shape, CellState.UNKNOWN, dtype=np.uint8)
    cells[g.logodds > state.l_occ] = CellState.OCCUPIED
    cells[g.logodds < state.l_free] = CellState.FREE
    g.cells = cells
    return state


def crop_local(state, pose, extent=DEFAULT_EXTENT, px=488):
    """Robot-centric heading-up crop of the global tri-state raster
    (nearest-neighbor; samples outside the map are UNKNOWN)."""
    g = state.grid
    c = np.arange(px)
    xr, yf = image_to_robot(*np.meshgrid(c, c), extent, px)
    pts = np.stack([xr.ravel(), yf.ravel()], axis=1)
    world = pose.robot_to_world(pts)
    col = np.floor((world[:, 0] - g.origin[0]) / g.resolution).astype(np.int64)
    row = np.floor(g.height - (world[:, 1] - g.origin[1]) / g.resolution).astype(np.int64)
    inb = (col >= 0) & (col < g.width) & (row >= 0) & (row < g.height)
    out = np.full(px * px, PX_UNKNOWN, dtype=np.uint8)
    out[inb] = _STATE_TO_PIXEL[g.cells[row[inb], col[inb]]]
    return LocalMap(out.reshape(px, px), extent, pose)


def network_view(local16, out_px=244, expected_extent=DEFAULT_EXTENT):
    """Central-front half-extent crop resized for the network (nearest
    neighbor). For the default 16 m stored map this is the 8 m input view."""
    if expected_extent is not None and not np.isclose(local16.extent, expected_extent):
        raise ValueError(
            f"expected a {expected_extent} m local map, got {local16.extent} m"
        )
    e16 = local16.extent
    e8 = e16 / 2.0
    p16 = local16.px
    c = np.arange(out_px)
    xr, yf = image_to_robot(*np.meshgrid(c, c), e8, out_px)
    u16, v16 = robot_to_image(xr, yf, e16, p16)
    cu = np.clip(np.floor(u16).astype(np.int64), 0, p16 - 1)
    cv = np.clip(np.floor(v16).astype(np.int64), 0, p16 - 1)
    return LocalMap(local16.image[cv, cu], e8, local16.anchor_pose)
