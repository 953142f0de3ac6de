"""Geometric training-time augmentation and open-door synthesis.

A stored sample carries paired 16 m laser / global-map local-maps plus its
robot-frame labels. Augmentation applies one rigid+scale transform (about the
robot origin) to both images and the labels, then crops the half-extent
network window. Door synthesis edits world maps before simulation so LiDAR
shadows stay physically consistent.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from gridnav.detector import window_contains
from gridnav.gridworld import CellState, FrameLabel, WorldMap, world_to_cell
from gridnav.mapper import PX_UNKNOWN, LocalMap, image_to_robot, robot_to_image


@dataclass
class Sample:
    """One training frame: paired local-maps plus robot-frame labels."""
    laser: LocalMap
    gmap: LocalMap
    labels: list                # FrameLabel
    pose: object = None         # provenance

    def __post_init__(self):
        if self.laser.px != self.gmap.px or not np.isclose(
                self.laser.extent, self.gmap.extent):
            raise ValueError("laser and gmap local-maps must share size and extent")

    @property
    def extent(self):
        return self.laser.extent


@dataclass
class AugmentPolicy:
    rotation_rad: float = math.radians(30.0)        # +/- range
    translation_m: float = 1.6                      # +/- range, per axis
    scale_range: tuple = (0.85, 1.2)
    door_angle_range: tuple = (math.radians(30.0), math.radians(100.0))
    p_rotate: float = 0.5
    p_translate: float = 0.5
    p_scale: float = 0.5

    def __post_init__(self):
        if self.scale_range[0] <= 0:
            raise ValueError("scale range must be positive")
        if not (0 < self.door_angle_range[0] <= self.door_angle_range[1] < math.pi):
            raise ValueError("door angle range must lie in (0, pi)")
        for p in (self.p_rotate, self.p_translate, self.p_scale):
            if not 0 <= p <= 1:
                raise ValueError("application probabilities must be in [0, 1]")


def load_policy(path):
    with open(path) as f:
        doc = json.load(f)
    kw = {}
    if "rotation_deg" in doc:
        kw["rotation_rad"] = math.radians(float(doc["rotation_deg"]))
    for key in ("translation_m", "p_rotate", "p_translate", "p_scale"):
        if key in doc:
            kw[key] = float(doc[key])
    if "scale_range" in doc:
        kw["scale_range"] = tuple(float(v) for v in doc["scale_range"])
    if "door_angle_deg" in doc:
        lo, hi = doc["door_angle_deg"]
        kw["door_angle_range"] = (math.radians(lo), math.radians(hi))
    return AugmentPolicy(**kw)


def transform_label(position, rot, trans_xy, scale):
    """Apply the sample transform to a robot-frame point: scale, then rotate
    about the robot origin, then translate."""
    c, s = math.cos(rot), math.sin(rot)
    x = scale * position[0]
    y = scale * position[1]
    return np.array([c * x - s * y + trans_xy[0],
                     s * x + c * y + trans_xy[1]])


def _resample(image, extent_in, rot, trans_xy, scale, out_px):
    """Inverse-map the transformed half-extent window onto a source raster.

    Source pixels are looked up nearest-neighbor; samples falling outside the
    stored raster come back UNKNOWN (the window can poke past the raster for
    large parameter draws, since the stored map only covers the front half
    plane).
    """
    p_in = image.shape[0]
    extent_out = extent_in / 2.0
    c = np.arange(out_px)
    qx, qy = image_to_robot(*np.meshgrid(c, c), extent_out, out_px)
    ci, si = math.cos(-rot), math.sin(-rot)
    px_ = qx - trans_xy[0]
    py_ = qy - trans_xy[1]
    sx = (ci * px_ - si * py_) / scale
    sy = (si * px_ + ci * py_) / scale
    u, v = robot_to_image(sx, sy, extent_in, p_in)
    cu = np.floor(u).astype(np.int64)
    cv = np.floor(v).astype(np.int64)
    inb = (cu >= 0) & (cu < p_in) & (cv >= 0) & (cv < p_in)
    out = np.full((out_px, out_px), PX_UNKNOWN, dtype=np.uint8)
    out[inb] = image[cv[inb], cu[inb]]
    return out


def transform_sample(sample, rot, trans_xy, scale, out_px):
    """Transform both local-maps with identical parameters and crop the
    half-extent network window; labels get the same analytic transform and
    are dropped once their center leaves the window."""
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    extent_out = sample.extent / 2.0
    laser = _resample(sample.laser.image, sample.extent, rot, trans_xy, scale, out_px)
    gmap = _resample(sample.gmap.image, sample.extent, rot, trans_xy, scale, out_px)
    labels = []
    for lab in sample.labels:
        p = transform_label(lab.position, rot, trans_xy, scale)
        if window_contains(p[0], p[1], extent_out):
            labels.append(FrameLabel(category=lab.category, position=p))
    return Sample(
        laser=LocalMap(laser, extent_out, sample.laser.anchor_pose),
        gmap=LocalMap(gmap, extent_out, sample.gmap.anchor_pose),
        labels=labels, pose=sample.pose)


def draw_params(policy, rng):
    """Draw one (rot, trans_xy, scale) tuple from the policy; skipped ops
    contribute their identity value."""
    rot = 0.0
    trans = np.zeros(2)
    scale = 1.0
    if rng.random() < policy.p_rotate:
        rot = rng.uniform(-policy.rotation_rad, policy.rotation_rad)
    if rng.random() < policy.p_translate:
        trans = rng.uniform(-policy.translation_m, policy.translation_m, size=2)
    if rng.random() < policy.p_scale:
        scale = rng.uniform(policy.scale_range[0], policy.scale_range[1])
    return rot, trans, scale


def random_augment(sample, policy, rng, out_px):
    rot, trans, scale = draw_params(policy, rng)
    return transform_sample(sample, rot, trans, scale, out_px)


def bresenham_cells(c0, r0, c1, r1):
    """Integer cells of the 8-connected line from (c0, r0) to (c1, r1)."""
    cells = []
    dc = abs(c1 - c0)
    dr = -abs(r1 - r0)
    sc = 1 if c0 < c1 else -1
    sr = 1 if r0 < r1 else -1
    err = dc + dr
    c, r = c0, r0
    while True:
        cells.append((c, r))
        if c == c1 and r == r1:
            return cells
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c += sc
        if e2 <= dc:
            err += dc
            r += sr


def _panel_cells(grid, hinge, width, angle):
    tip = hinge + width * np.array([math.cos(angle), math.sin(angle)])
    c0, r0 = world_to_cell(grid, hinge)
    c1, r1 = world_to_cell(grid, tip)
    return [(c, r) for c, r in bresenham_cells(c0, r0, c1, r1)
            if grid.in_bounds(c, r)]


def synthesize_door(world_map, label, angle, previous_angle=None):
    """Return a copy of the world with the label's door panel drawn at
    ``angle`` radians from its frame (one cell thick, panel length = door
    width). A previously drawn panel at ``previous_angle`` is cleared first.
    """
    if label.door is None:
        raise ValueError("label has no door geometry to synthesize")
    grid = world_map.grid.copy()
    if previous_angle is not None:
        for c, r in _panel_cells(grid, label.door.hinge, label.door.width,
                                 label.door.frame_angle + previous_angle):
            grid.cells[r, c] = CellState.FREE
    for c, r in _panel_cells(grid, label.door.hinge, label.door.width,
                             label.door.frame_angle + angle):
        grid.cells[r, c] = CellState.OCCUPIED
    return WorldMap(grid=grid, labels=list(world_map.labels), name=world_map.name)
