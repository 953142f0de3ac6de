"""Online pipeline replay and the tracked-map evaluation protocol.

A run replays a trajectory through scan simulation, global mapping, per-frame
detection, and tracking. For scoring, each tracked feature is frozen once it
has been out of the network's front window for a grace period (detections can
no longer update it), and the frozen set is matched against the world's
ground-truth labels. Explored runs replay the same trajectory a second time
over the already-built global map.
"""

from dataclasses import dataclass, field

import numpy as np

from gridnav.detector import Detection, decode, head_probs, labels_in_window, \
    window_contains
from gridnav.evalkit.metrics import MetricsReport, accumulate_matches, \
    mean_reports, new_counts
from gridnav.evalkit.training import _BLANK_VALUE, image_to_input
from gridnav.mapper import (DEFAULT_EXTENT, GlobalMapState, crop_local,
                            network_view, rasterize_scan, update_global)
from gridnav.scansim import LidarParams, play_trajectory
from gridnav.tracker import FeatureTracker, TrackerConfig


def make_net_detector(net, variant="combined", threshold=0.5):
    """Wrap a trained network as a per-frame detect function."""
    net_px = net.spec.input_px

    def detect(laser16, gmap16, pose, t):
        laser = image_to_input(network_view(laser16, net_px,
                                            expected_extent=None).image)
        gmap = image_to_input(network_view(gmap16, net_px,
                                           expected_extent=None).image)
        if variant == "laser":
            gmap = np.full_like(gmap, _BLANK_VALUE)
        elif variant == "map":
            laser = np.full_like(laser, _BLANK_VALUE)
        out, _ = net.forward(laser[None], gmap[None], train=False)
        probs = head_probs(out.astype(np.float64))[0]
        return decode(probs, pose, threshold=threshold,
                      window=laser16.extent / 2.0, timestamp=t)

    return detect


def make_oracle_detector(world, window=None):
    """Perfect detector from ground truth; exercises the harness end to end."""

    def detect(laser16, gmap16, pose, t):
        w = window or laser16.extent / 2.0
        out = []
        for lab in labels_in_window(pose, world.labels, w):
            out.append(Detection(
                category=lab.category, position=lab.position,
                world=pose.robot_to_world(lab.position), probability=1.0,
                cell=(0, 0), timestamp=t))
        return out

    return detect


class ExitRecorder:
    """Freeze each tracked feature once it leaves the front window for the
    grace period; features never frozen keep their final state."""

    def __init__(self, window, grace=1.0):
        self.window = window
        self.grace = grace
        self._last = {}
        self._outside_since = {}
        self._frozen = {}

    def update(self, t, pose, summaries):
        for s in summaries:
            if s.feature_id in self._frozen:
                continue
            rel = pose.world_to_robot(s.position)
            if window_contains(rel[0], rel[1], self.window):
                self._outside_since.pop(s.feature_id, None)
                self._last[s.feature_id] = s
            else:
                since = self._outside_since.setdefault(s.feature_id, t)
                self._last.setdefault(s.feature_id, s)
                if t - since >= self.grace:
                    self._frozen[s.feature_id] = self._last[s.feature_id]

    def scored_features(self):
        out = dict(self._last)
        out.update(self._frozen)
        return [out[k] for k in sorted(out)]


@dataclass
class OnlineResult:
    tracker: FeatureTracker
    recorder: ExitRecorder
    state: GlobalMapState
    n_frames: int = 0
    snapshots: list = field(default_factory=list)


def run_online(world, traj, detect_fn, lidar=None, px16=488,
               extent=DEFAULT_EXTENT, tracker_config=None, rng=None,
               state=None, detect_every=1, keep_snapshots=False,
               on_frame=None):
    """Replay a trajectory through the full perception pipeline.

    ``state`` continues from a previously built global map (explored runs);
    ``detect_every`` runs the detector on every k-th frame (mapping still
    updates every frame); ``on_frame`` receives (t, pose, detections,
    snapshot) for streaming consumers.
    """
    lidar = lidar or LidarParams()
    tracker = FeatureTracker(tracker_config or TrackerConfig())
    if state is None:
        state = GlobalMapState.like(world.grid)
    recorder = ExitRecorder(window=extent / 2.0)
    n = 0
    snapshots = []
    for k, (pose, scan) in enumerate(play_trajectory(world, traj, lidar,
                                                     rng=rng)):
        update_global(state, scan, pose)
        detections = []
        if k % detect_every == 0:
            laser16 = rasterize_scan(scan, pose, extent, px16)
            gmap16 = crop_local(state, pose, extent, px16)
            detections = detect_fn(laser16, gmap16, pose, scan.timestamp)
            tracker.integrate(detections, scan.timestamp)
        tracker.prune(scan.timestamp)
        snap = tracker.snapshot()
        recorder.update(scan.timestamp, pose, snap)
        if keep_snapshots:
            snapshots.append((scan.timestamp, snap))
        if on_frame:
            on_frame(scan.timestamp, pose, detections, snap)
        n += 1
    return OnlineResult(tracker=tracker, recorder=recorder, state=state,
                        n_frames=n, snapshots=snapshots)


def dedup_features(summaries, radius=1.0):
    """Merge same-category features within the cluster radius for scoring.

    A feature whose cluster expired (member lifetime) re-seeds a new cluster
    when the robot revisits the spot; track identity across expiry is out of
    scope, so the scored map keeps one entry per location: the one with the
    most supporting members (ties go to the most recent).
    """
    ordered = sorted(summaries, key=lambda s: (-s.n_members, -s.last_seen))
    kept = []
    for s in ordered:
        dup = any(k.category == s.category
                  and np.hypot(k.position[0] - s.position[0],
                               k.position[1] - s.position[1]) <= radius
                  for k in kept)
        if not dup:
            kept.append(s)
    return kept


def score_tracked(world, summaries, radius=0.5, dedup_radius=1.0, meta=None):
    counts = new_counts()
    kept = dedup_features(summaries, dedup_radius)
    preds = [(s.category, np.asarray(s.position)) for s in kept]
    truths = [(l.category, l.position) for l in world.labels]
    accumulate_matches(counts, preds, truths, radius)
    return MetricsReport.from_counts(counts, meta=meta)


def eval_tracked(world, traj, detect_fn, explored=False, repetitions=30,
                 seed=0, lidar=None, px16=488, extent=DEFAULT_EXTENT,
                 tracker_config=None, radius=0.5, detect_every=1, meta=None):
    """Average tracked-map metrics over seeded repetitions.

    Per repetition: (optionally) pre-build the global map by replaying the
    trajectory once without detection, then run the scored pass, freeze
    features on field-of-view exit, and match them against ground truth.
    """
    reports = []
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(repetitions):
        rng = np.random.default_rng(child)
        state = None
        if explored:
            state = GlobalMapState.like(world.grid)
            for pose, scan in play_trajectory(world, traj, lidar or LidarParams(),
                                              rng=rng):
                update_global(state, scan, pose)
        result = run_online(world, traj, detect_fn, lidar=lidar, px16=px16,
                            extent=extent, tracker_config=tracker_config,
                            rng=rng, state=state, detect_every=detect_every)
        reports.append(score_tracked(world, result.recorder.scored_features(),
                                     radius=radius))
    m = dict(meta or {})
    m.update({"explored": explored, "radius": radius, "seed": seed})
    return mean_reports(reports, meta=m)
