"""Parametric synthetic buildings: corridors, rooms, doors, intersections.

Worlds are carved out of a solid canvas: a main corridor, one or two branch
corridors forming intersections, and rooms attached to the main corridor
through recessed doorways. Closed rooms get a panel across the doorway; open
rooms get a panel swung into the room at a sampled angle. Labels follow the
annotation scheme used throughout: door midpoints for rooms, mouth midpoints
for the corridors meeting each intersection.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from gridnav.augment import bresenham_cells, synthesize_door
from gridnav.gridworld import (Category, CellState, DoorSpec, NavLabel,
                               OccupancyGrid, WorldMap, save_labels, save_map,
                               world_to_cell)
from gridnav.scansim import Trajectory, save_trajectory
from gridnav.util import atomic_write


@dataclass
class SynthParams:
    resolution: float = 0.05
    map_w: tuple = (22.0, 26.0)
    map_h: tuple = (16.0, 20.0)
    margin: float = 1.0
    corridor_width: tuple = (2.4, 3.0)
    branch_count: int = 2
    room_depth: tuple = (2.8, 4.0)
    room_width: tuple = (2.6, 3.0)   # kept under slot_pitch so rooms never merge
    door_width: float = 1.0
    wall_thickness: float = 0.5
    closed_recess: float = 0.12      # shut doors sit near the corridor face, like real scans
    slot_pitch: float = 3.6
    p_room: float = 0.95
    p_open: float = 0.5
    door_angle: tuple = (math.radians(30.0), math.radians(100.0))
    speed: float = 0.5
    scan_rate: float = 5.0


def _fill_rect(grid, x0, y0, x1, y1, state):
    """Set all cells whose extent intersects the world rect [x0,x1]x[y0,y1]."""
    res = grid.resolution
    c0 = max(0, int(math.floor(x0 / res)))
    c1 = min(grid.width, int(math.ceil(x1 / res)))
    r0 = max(0, int(math.floor(grid.height - y1 / res)))
    r1 = min(grid.height, int(math.ceil(grid.height - y0 / res)))
    grid.cells[r0:r1, c0:c1] = state


def _draw_segment(grid, p0, p1, state):
    c0, r0 = world_to_cell(grid, p0)
    c1, r1 = world_to_cell(grid, p1)
    for c, r in bresenham_cells(c0, r0, c1, r1):
        if grid.in_bounds(c, r):
            grid.cells[r, c] = state


def _door_endpoints(center_along, face, dw, axis, side):
    """Doorway segment endpoints on the panel plane, ordered so a positive
    panel angle swings into the room (normal points from corridor to room).

    ``axis`` 0 means the corridor runs along x (door faces +/-y); 1 means it
    runs along y (door faces +/-x).
    """
    if axis == 0:
        e1 = np.array([center_along - dw / 2.0, face])
        e2 = np.array([center_along + dw / 2.0, face])
        n = np.array([0.0, float(side)])
    else:
        e1 = np.array([face, center_along - dw / 2.0])
        e2 = np.array([face, center_along + dw / 2.0])
        n = np.array([float(side), 0.0])
    f = (e2 - e1) / np.hypot(*(e2 - e1))
    if f[0] * n[1] - f[1] * n[0] < 0:
        e1, e2 = e2, e1
    return e1, e2


def _rects_overlap(a, b, gap=0.0):
    return not (a[2] + gap <= b[0] or b[2] + gap <= a[0]
                or a[3] + gap <= b[1] or b[3] + gap <= a[1])


def _try_room(grid, p, rng, axis, side, slot, face, limit, keepout):
    """Carve one room plus its doorway off a corridor wall; returns the door
    request (midpoint, panel endpoints) or None when it does not fit.

    ``face`` is the corridor wall's outer coordinate on the room side,
    ``limit`` the last usable coordinate in that direction, ``keepout`` the
    rects (rooms and foreign corridors) the room must not touch.
    """
    wt = p.wall_thickness
    rw = rng.uniform(*p.room_width)
    rd = rng.uniform(*p.room_depth)
    avail = (limit - face) * side - wt
    rd = min(rd, avail)
    if rd < 2.0:
        return None
    lo_n = face + side * wt
    hi_n = face + side * (wt + rd)
    if axis == 0:
        rect = (slot - rw / 2, min(lo_n, hi_n), slot + rw / 2, max(lo_n, hi_n))
    else:
        rect = (min(lo_n, hi_n), slot - rw / 2, max(lo_n, hi_n), slot + rw / 2)
    if any(_rects_overlap(rect, k, gap=p.wall_thickness) for k in keepout):
        return None
    _fill_rect(grid, *rect, CellState.FREE)
    keepout.append(rect)

    jitter = rw / 2 - p.door_width / 2 - 0.3
    d = slot + rng.uniform(-jitter, jitter)
    if axis == 0:
        _fill_rect(grid, d - p.door_width / 2, min(face, lo_n),
                   d + p.door_width / 2, max(face, lo_n), CellState.FREE)
        mid = np.array([d, face + side * wt / 2.0])
    else:
        _fill_rect(grid, min(face, lo_n), d - p.door_width / 2,
                   max(face, lo_n), d + p.door_width / 2, CellState.FREE)
        mid = np.array([face + side * wt / 2.0, d])
    return {"axis": axis, "side": side, "d": d, "face": face,
            "room_face": lo_n, "mid": mid}


def generate_world(name, seed, params=None):
    """Build one annotated world plus a trajectory sweeping every corridor."""
    p = params or SynthParams()
    rng = np.random.default_rng(seed)
    res = p.resolution
    w_m = rng.uniform(*p.map_w)
    h_m = rng.uniform(*p.map_h)
    cw = rng.uniform(*p.corridor_width)
    ym = h_m / 2.0 + rng.uniform(-1.0, 1.0)

    cells = np.full((int(round(h_m / res)), int(round(w_m / res))),
                    CellState.OCCUPIED, dtype=np.uint8)
    grid = OccupancyGrid(resolution=res, origin=np.zeros(2), cells=cells)
    w_m = grid.width * res
    h_m = grid.height * res

    x_lo = p.margin
    x_hi = w_m - p.margin
    y_top = ym + cw / 2.0
    y_bot = ym - cw / 2.0
    _fill_rect(grid, x_lo, y_bot, x_hi, y_top, CellState.FREE)

    # branch corridors form the intersections
    labels = []
    branches = []
    usable = np.linspace(x_lo + 4.0, x_hi - 4.0, max(p.branch_count, 1))
    for i in range(p.branch_count):
        bx = float(usable[i] + rng.uniform(-1.0, 1.0))
        bw = rng.uniform(*p.corridor_width)
        up = bool(rng.random() < 0.5)
        if up:
            _fill_rect(grid, bx - bw / 2, ym, bx + bw / 2, h_m - p.margin,
                       CellState.FREE)
            far = h_m - p.margin - 1.2
            mouth = (bx, y_top)
        else:
            _fill_rect(grid, bx - bw / 2, p.margin, bx + bw / 2, ym,
                       CellState.FREE)
            far = p.margin + 1.2
            mouth = (bx, y_bot)
        branches.append({"x": bx, "width": bw, "up": up, "far_y": far})
        labels.append(NavLabel(Category.CORRIDOR, np.array(mouth)))
        labels.append(NavLabel(Category.CORRIDOR, np.array([bx - bw / 2, ym])))
        labels.append(NavLabel(Category.CORRIDOR, np.array([bx + bw / 2, ym])))

    # rooms off every corridor; keepout rects stop rooms from merging with
    # each other or punching into a foreign corridor
    keepout = [(b["x"] - b["width"] / 2, min(ym, b["far_y"]) - 1.2,
                b["x"] + b["width"] / 2, max(ym, b["far_y"]) + 1.2)
               for b in branches]
    keepout.append((x_lo, y_bot, x_hi, y_top))
    door_requests = []

    for sx in np.arange(x_lo + 2.2, x_hi - 2.2, p.slot_pitch):
        for side in (1, -1):
            if rng.random() > p.p_room:
                continue
            face = y_top if side > 0 else y_bot
            limit = h_m - 0.4 if side > 0 else 0.4
            req = _try_room(grid, p, rng, 0, side, float(sx), face, limit,
                            keepout)
            if req:
                door_requests.append(req)

    for b in branches:
        lo = ym + cw / 2 + 1.6 if b["up"] else p.margin + 1.0
        hi = h_m - p.margin - 1.0 if b["up"] else ym - cw / 2 - 1.6
        for sy in np.arange(lo + 1.4, hi - 1.4, p.slot_pitch):
            for side in (1, -1):
                if rng.random() > p.p_room:
                    continue
                face = b["x"] + side * b["width"] / 2
                limit = w_m - 0.4 if side > 0 else 0.4
                req = _try_room(grid, p, rng, 1, side, float(sy), face,
                                limit, keepout)
                if req:
                    door_requests.append(req)

    # balanced door types: every map gets both open and closed rooms
    n_open = int(round(p.p_open * len(door_requests)))
    if len(door_requests) >= 2:
        n_open = min(max(n_open, 1), len(door_requests) - 1)
    kinds = np.array([True] * n_open
                     + [False] * (len(door_requests) - n_open))
    rng.shuffle(kinds)

    for is_open, req in zip(kinds, door_requests):
        if is_open:
            # open panel (drawn later) swings from the room-face frame
            e1, e2 = _door_endpoints(req["d"], req["room_face"],
                                     p.door_width, req["axis"], req["side"])
            frame_angle = math.atan2(e2[1] - e1[1], e2[0] - e1[0])
            labels.append(NavLabel(
                Category.OPEN_ROOM, req["mid"],
                door=DoorSpec(hinge=e1, width=p.door_width,
                              frame_angle=frame_angle)))
        else:
            # closed panel sits near the corridor face, like a real shut door
            closed_face = req["face"] + req["side"] * p.closed_recess
            e1, e2 = _door_endpoints(req["d"], closed_face,
                                     p.door_width, req["axis"], req["side"])
            _draw_segment(grid, e1, e2, CellState.OCCUPIED)
            labels.append(NavLabel(Category.CLOSED_ROOM, req["mid"]))

    world = WorldMap(grid=grid, labels=labels, name=name)
    for lab in labels:
        if lab.category is Category.OPEN_ROOM:
            angle = rng.uniform(*p.door_angle)
            world = synthesize_door(world, lab, angle)

    waypoints = [(x_lo + 0.8, ym), (x_hi - 0.8, ym)]
    for b in sorted(branches, key=lambda b: -b["x"]):
        waypoints += [(b["x"], ym), (b["x"], b["far_y"]), (b["x"], ym)]
    traj = Trajectory(waypoints=np.asarray(waypoints), speed=p.speed,
                      scan_rate=p.scan_rate)
    return world, traj


def split_for_index(i, count):
    """Map-level split assignment: the last map is held out for testing, the
    one before for validation, the rest train."""
    if count >= 3:
        if i == count - 1:
            return "test"
        if i == count - 2:
            return "validation"
    return "train"


def generate_suite(out_dir, count, seed, params=None):
    """Write ``count`` worlds plus a suite index; returns the index entries."""
    os.makedirs(out_dir, exist_ok=True)
    ss = np.random.SeedSequence(seed)
    entries = []
    for i, child in enumerate(ss.spawn(count)):
        name = f"synth{i:02d}"
        world, traj = generate_world(name, child, params)
        mdir = os.path.join(out_dir, name)
        os.makedirs(mdir, exist_ok=True)
        save_map(world.grid, os.path.join(mdir, "map.pgm"),
                 os.path.join(mdir, "map.json"))
        save_labels(os.path.join(mdir, "labels.json"), world.labels)
        save_trajectory(os.path.join(mdir, "trajectory.json"), traj)
        entries.append({"name": name, "split": split_for_index(i, count),
                        "dir": name,
                        "map_pgm": f"{name}/map.pgm",
                        "map_meta": f"{name}/map.json",
                        "labels": f"{name}/labels.json",
                        "trajectory": f"{name}/trajectory.json"})
    atomic_write(os.path.join(out_dir, "suite.json"),
                 json.dumps({"maps": entries}, indent=1) + "\n")
    return entries


def load_suite(path):
    """Load a suite index; accepts the directory or the suite.json path."""
    if os.path.isdir(path):
        path = os.path.join(path, "suite.json")
    with open(path) as f:
        doc = json.load(f)
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    for e in doc["maps"]:
        e = dict(e)
        for key in ("map_pgm", "map_meta", "labels", "trajectory"):
            e[key] = os.path.join(base, e[key])
        entries.append(e)
    return entries
