"""Dataset generation: trajectory replay into paired local-map frames."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from gridnav.detector import labels_in_window
from gridnav.gridworld import CATEGORIES, Category, FrameLabel, load_world
from gridnav.mapper import (DEFAULT_EXTENT, GlobalMapState, LocalMap,
                            crop_local, rasterize_scan, update_global)
from gridnav.scansim import LidarParams, load_trajectory, play_trajectory
from gridnav.util import atomic_write


@dataclass
class DatasetRecord:
    laser16: str
    gmap16: str
    pose: tuple             # (x, y, theta)
    t: float
    labels_rf: list = field(default_factory=list)   # FrameLabel
    map_name: str = ""
    split: str = "train"

    def to_dict(self):
        return {"laser16": self.laser16, "gmap16": self.gmap16,
                "pose": list(self.pose), "t": self.t,
                "labels_rf": [{"category": l.category.value,
                               "x_m": float(l.position[0]),
                               "y_m": float(l.position[1])}
                              for l in self.labels_rf],
                "map": self.map_name, "split": self.split}

    @classmethod
    def from_dict(cls, d):
        labels = [FrameLabel(category=Category(l["category"]),
                             position=(l["x_m"], l["y_m"]))
                  for l in d["labels_rf"]]
        return cls(laser16=d["laser16"], gmap16=d["gmap16"],
                   pose=tuple(d["pose"]), t=float(d["t"]), labels_rf=labels,
                   map_name=d["map"], split=d["split"])


def generate_dataset(suite_entries, out_dir, seed, lidar=None, px16=488,
                     extent=DEFAULT_EXTENT, window=None, progress=None):
    """Replay every map's trajectory and emit paired 16 m local-maps plus the
    labels visible in the network window; returns the index path.

    Deterministic for a fixed seed: each map gets its own child rng stream.
    """
    lidar = lidar or LidarParams()
    window = window or extent / 2.0
    frames_dir = os.path.join(out_dir, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    ss = np.random.SeedSequence(seed)
    records = []
    for entry, child in zip(suite_entries, ss.spawn(len(suite_entries))):
        rng = np.random.default_rng(child)
        world = load_world(entry["map_pgm"], entry["map_meta"],
                           entry["labels"], name=entry["name"])
        traj = load_trajectory(entry["trajectory"])
        state = GlobalMapState.like(world.grid)
        for k, (pose, scan) in enumerate(play_trajectory(world, traj, lidar,
                                                         rng=rng)):
            update_global(state, scan, pose)
            laser = rasterize_scan(scan, pose, extent, px16)
            gmap = crop_local(state, pose, extent, px16)
            stem = f"{entry['name']}_{k:05d}"
            paths = {}
            for tag, lm in (("laser", laser), ("gmap", gmap)):
                rel = os.path.join("frames", f"{stem}_{tag}.pgm")
                lm.save(os.path.join(out_dir, rel),
                        os.path.join(out_dir, rel[:-4] + ".json"))
                paths[tag] = rel
            records.append(DatasetRecord(
                laser16=paths["laser"], gmap16=paths["gmap"],
                pose=(pose.x, pose.y, pose.theta), t=scan.timestamp,
                labels_rf=labels_in_window(pose, world.labels, window),
                map_name=entry["name"], split=entry["split"]))
            if progress:
                progress(entry["name"], k)
    index_path = os.path.join(out_dir, "index.jsonl")
    atomic_write(index_path,
                 "".join(json.dumps(r.to_dict()) + "\n" for r in records))
    return index_path


def load_index(path):
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(DatasetRecord.from_dict(json.loads(line)))
    base = os.path.dirname(os.path.abspath(path))
    for r in records:
        r.laser16 = os.path.join(base, r.laser16)
        r.gmap16 = os.path.join(base, r.gmap16)
    return records


def split_records(records):
    out = {}
    for r in records:
        out.setdefault(r.split, []).append(r)
    return out


def label_count_table(records):
    """Per-split label counts by category, as (dict, printable text)."""
    counts = {}
    for r in records:
        row = counts.setdefault(r.split, {c.value: 0 for c in CATEGORIES})
        for lab in r.labels_rf:
            row[lab.category.value] += 1
    lines = ["{:<12} {:>12} {:>10} {:>9} {:>8}".format(
        "", "Closed Room", "Open Room", "Corridor", "Total")]
    for split in ("train", "validation", "test"):
        if split not in counts:
            continue
        row = counts[split]
        total = sum(row.values())
        pct = {k: (100.0 * v / total if total else 0.0) for k, v in row.items()}
        lines.append("{:<12} {:>11.0f}% {:>9.0f}% {:>8.0f}% {:>8d}".format(
            split.capitalize(), pct["closed_room"], pct["open_room"],
            pct["corridor"], total))
    return counts, "\n".join(lines)


class FrameStore:
    """Caches decoded local-map images by path (a dataset easily fits in
    memory as uint8)."""

    def __init__(self):
        self._cache = {}

    def local_map(self, path):
        lm = self._cache.get(path)
        if lm is None:
            lm = LocalMap.load(path, path[:-4] + ".json")
            self._cache[path] = lm
        return lm
