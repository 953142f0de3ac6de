"""Occupancy-grid world maps, their annotations, and coordinate transforms.

Conventions used throughout the package:

* World frame: x right, y up, angles CCW from +x in radians.
* Grid rasters are stored image-style: row 0 is the maximum-y edge of the
  world, so moving down the array moves toward smaller world y.
* ``origin`` is the world position of the raster's lower-left corner.
* Cell indices are (col, row). A point exactly on a cell edge belongs to the
  higher-index cell, which makes world/cell roundtrips deterministic.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from gridnav.pgmio import load_pgm, save_pgm
from gridnav.util import atomic_write

DEFAULT_RESOLUTION = 0.05
FREE_PIXEL_THRESHOLD = 200
OCCUPIED_PIXEL_THRESHOLD = 50


class CellState(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


class Category(str, Enum):
    CLOSED_ROOM = "closed_room"
    OPEN_ROOM = "open_room"
    CORRIDOR = "corridor"


# Fixed order; doubles as the tie-break order for equal scores.
CATEGORIES = (Category.CLOSED_ROOM, Category.OPEN_ROOM, Category.CORRIDOR)


class MapFormatError(ValueError):
    pass


class LabelError(ValueError):
    pass


def normalize_angle(theta):
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(theta, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@dataclass
class Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        self.theta = normalize_angle(self.theta)

    @property
    def xy(self):
        return np.array([self.x, self.y], dtype=np.float64)

    def robot_to_world(self, points):
        """Map robot-frame points (x right, y forward) to world coordinates.

        Accepts a single (x, y) pair or an (N, 2) array.
        """
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        c, s = math.cos(self.theta), math.sin(self.theta)
        # forward = (c, s), right = (s, -c)
        out = np.empty_like(p)
        out[:, 0] = self.x + p[:, 0] * s + p[:, 1] * c
        out[:, 1] = self.y - p[:, 0] * c + p[:, 1] * s
        return out[0] if np.asarray(points).ndim == 1 else out

    def world_to_robot(self, points):
        """Inverse of :meth:`robot_to_world`."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = p[:, 0] - self.x
        dy = p[:, 1] - self.y
        out = np.empty_like(p)
        out[:, 0] = dx * s - dy * c
        out[:, 1] = dx * c + dy * s
        return out[0] if np.asarray(points).ndim == 1 else out


@dataclass
class OccupancyGrid:
    resolution: float
    origin: np.ndarray          # world (x, y) of the lower-left raster corner
    cells: np.ndarray           # uint8 CellState raster, row 0 = max world y
    logodds: np.ndarray | None = None

    def __post_init__(self):
        if self.resolution <= 0:
            raise MapFormatError(f"resolution must be positive, got {self.resolution}")
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if self.cells.ndim != 2 or min(self.cells.shape) < 1:
            raise MapFormatError("cell raster must be 2D and non-empty")

    @property
    def height(self):
        return self.cells.shape[0]

    @property
    def width(self):
        return self.cells.shape[1]

    @property
    def extent_m(self):
        return (self.width * self.resolution, self.height * self.resolution)

    def in_bounds(self, col, row):
        return 0 <= col < self.width and 0 <= row < self.height

    def contains_world(self, xy):
        col, row = world_to_cell(self, xy)
        return self.in_bounds(col, row)

    def state_at(self, xy):
        col, row = world_to_cell(self, xy)
        if not self.in_bounds(col, row):
            return CellState.UNKNOWN
        return CellState(self.cells[row, col])

    def copy(self):
        return OccupancyGrid(
            resolution=self.resolution,
            origin=self.origin.copy(),
            cells=self.cells.copy(),
            logodds=None if self.logodds is None else self.logodds.copy(),
        )


def world_to_cell(grid, xy):
    """World point -> (col, row). Out-of-bounds indices are returned as-is;
    check with ``grid.in_bounds``."""
    gx = (xy[0] - grid.origin[0]) / grid.resolution
    gy = (xy[1] - grid.origin[1]) / grid.resolution
    col = math.floor(gx)
    row = math.floor(grid.height - gy)
    return col, row


def cell_to_world(grid, col, row):
    """Cell index -> world coordinates of the cell center."""
    x = grid.origin[0] + (col + 0.5) * grid.resolution
    y = grid.origin[1] + (grid.height - row - 0.5) * grid.resolution
    return np.array([x, y], dtype=np.float64)


def world_to_grid_frame(grid, xy):
    """World point -> continuous raster coordinates (x along columns, y along
    rows, y down). Used by the traversal kernels."""
    gx = (xy[0] - grid.origin[0]) / grid.resolution
    gy = grid.height - (xy[1] - grid.origin[1]) / grid.resolution
    return gx, gy


@dataclass
class DoorSpec:
    hinge: np.ndarray           # world meters
    width: float                # meters
    frame_angle: float          # radians, direction of the closed frame line

    def __post_init__(self):
        self.hinge = np.asarray(self.hinge, dtype=np.float64)
        if self.width <= 0:
            raise LabelError(f"door width must be positive, got {self.width}")


@dataclass
class NavLabel:
    category: Category
    position: np.ndarray        # world meters (feature center)
    door: DoorSpec | None = None

    def __post_init__(self):
        self.category = Category(self.category)
        self.position = np.asarray(self.position, dtype=np.float64)
        if (self.door is not None) != (self.category is Category.OPEN_ROOM):
            raise LabelError(
                f"door geometry is required exactly for open_room labels "
                f"(category={self.category.value}, door={'set' if self.door else 'missing'})"
            )


@dataclass
class FrameLabel:
    """A label expressed in the robot frame (x right, y forward, meters).

    Door geometry is irrelevant once a label is robot-relative, so only the
    category and position survive the frame change.
    """
    category: Category
    position: np.ndarray

    def __post_init__(self):
        self.category = Category(self.category)
        self.position = np.asarray(self.position, dtype=np.float64)


@dataclass
class WorldMap:
    grid: OccupancyGrid
    labels: list = field(default_factory=list)
    name: str = "map"

    def __post_init__(self):
        for lab in self.labels:
            if not self.grid.contains_world(lab.position):
                raise LabelError(
                    f"label {lab.category.value} at {tuple(lab.position)} lies "
                    f"outside map {self.name!r}"
                )


def load_map(map_image_path, metadata_path,
             free_threshold=FREE_PIXEL_THRESHOLD,
             occupied_threshold=OCCUPIED_PIXEL_THRESHOLD):
    """Load a PGM raster plus its JSON metadata into an OccupancyGrid.

    Pixel value >= free_threshold -> FREE, <= occupied_threshold -> OCCUPIED,
    anything between -> UNKNOWN. Image row 0 maps to the maximum-y row.
    """
    image = load_pgm(map_image_path)
    with open(metadata_path) as f:
        meta = json.load(f)
    try:
        resolution = float(meta["resolution_m_per_cell"])
        origin = meta["origin_xy_m"]
    except (KeyError, TypeError) as e:
        raise MapFormatError(f"{metadata_path}: missing metadata field {e}") from None
    if resolution <= 0:
        raise MapFormatError(f"{metadata_path}: non-positive resolution {resolution}")

    cells = np.full(image.shape, CellState.UNKNOWN, dtype=np.uint8)
    cells[image >= free_threshold] = CellState.FREE
    cells[image <= occupied_threshold] = CellState.OCCUPIED
    return OccupancyGrid(resolution=resolution, origin=np.asarray(origin, float),
                         cells=cells)


def save_map(grid, map_image_path, metadata_path):
    """Inverse of load_map for generated worlds (FREE=255, OCCUPIED=0,
    UNKNOWN=128, which the default thresholds map back losslessly)."""
    image = np.full(grid.cells.shape, 128, dtype=np.uint8)
    image[grid.cells == CellState.FREE] = 255
    image[grid.cells == CellState.OCCUPIED] = 0
    save_pgm(map_image_path, image)
    atomic_write(metadata_path, json.dumps(
        {"resolution_m_per_cell": grid.resolution,
         "origin_xy_m": [float(grid.origin[0]), float(grid.origin[1])]}) + "\n")


def label_to_dict(label):
    d = {"category": label.category.value,
         "x_m": float(label.position[0]), "y_m": float(label.position[1])}
    if label.door is not None:
        d["door"] = {
            "hinge_xy_m": [float(label.door.hinge[0]), float(label.door.hinge[1])],
            "width_m": float(label.door.width),
            "frame_angle_rad": float(label.door.frame_angle),
        }
    return d


def label_from_dict(d):
    try:
        category = Category(d["category"])
    except ValueError:
        raise LabelError(f"unknown category {d.get('category')!r}") from None
    except KeyError:
        raise LabelError("label entry missing 'category'") from None
    try:
        pos = (float(d["x_m"]), float(d["y_m"]))
    except KeyError as e:
        raise LabelError(f"label entry missing {e}") from None
    door = None
    if "door" in d and d["door"] is not None:
        if category is not Category.OPEN_ROOM:
            raise LabelError(f"door geometry not allowed on {category.value} labels")
        dd = d["door"]
        door = DoorSpec(hinge=np.asarray(dd["hinge_xy_m"], float),
                        width=float(dd["width_m"]),
                        frame_angle=float(dd["frame_angle_rad"]))
    return NavLabel(category=category, position=np.asarray(pos), door=door)


def load_labels(path, grid=None):
    """Load a JSON label file; optionally validate positions against a grid."""
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, list):
        raise LabelError(f"{path}: label document must be a JSON array")
    labels = [label_from_dict(d) for d in doc]
    if grid is not None:
        for lab in labels:
            if not grid.contains_world(lab.position):
                raise LabelError(
                    f"{path}: label {lab.category.value} at {tuple(lab.position)} "
                    f"outside grid bounds"
                )
    return labels


def save_labels(path, labels):
    atomic_write(path, json.dumps([label_to_dict(l) for l in labels], indent=1) + "\n")


def load_world(map_image_path, metadata_path, labels_path, name="map"):
    grid = load_map(map_image_path, metadata_path)
    labels = load_labels(labels_path, grid=grid)
    return WorldMap(grid=grid, labels=labels, name=name)
