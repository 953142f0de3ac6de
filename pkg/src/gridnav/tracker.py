"""Frame-to-frame data association over world-frame detections.

Detections are clustered greedily at insertion: each one joins the nearest
existing cluster whose aggregated position lies within the cluster radius,
otherwise it founds a new cluster. Per category the cluster keeps the mean
final probability over the members reporting that category; the cluster's
category is the argmax of those means and its position the mean position of
the winning category's members. Members expire after a fixed lifetime.

Greedy assignment makes the result dependent on detection order within a
frame; order is preserved as given, which keeps runs reproducible.
"""

from dataclasses import dataclass, field

import numpy as np

from gridnav.gridworld import CATEGORIES, Category


class TimeRegressionError(ValueError):
    pass


@dataclass
class TrackerConfig:
    cluster_radius: float = 1.0     # meters
    member_lifetime: float = 30.0   # seconds

    def __post_init__(self):
        if self.cluster_radius <= 0 or self.member_lifetime <= 0:
            raise ValueError("cluster radius and member lifetime must be positive")


@dataclass
class _Member:
    category: Category
    position: np.ndarray
    probability: float
    timestamp: float


@dataclass
class TrackedSummary:
    """Immutable snapshot of one tracked feature."""
    feature_id: int
    category: Category
    position: tuple
    mean_probs: dict            # category value -> mean final probability
    n_members: int
    created_at: float
    last_seen: float

    def to_dict(self):
        return {"id": self.feature_id, "category": self.category.value,
                "x_m": self.position[0], "y_m": self.position[1],
                "mean_probs": dict(self.mean_probs),
                "n_members": self.n_members,
                "created_at": self.created_at, "last_seen": self.last_seen}


@dataclass
class TrackedFeature:
    feature_id: int
    members: list = field(default_factory=list)
    created_at: float = 0.0
    last_seen: float = 0.0
    category: Category = Category.CLOSED_ROOM
    position: np.ndarray = None
    mean_probs: dict = field(default_factory=dict)

    def aggregate(self):
        """Recompute category, per-category means, and position."""
        sums = {c: 0.0 for c in CATEGORIES}
        counts = {c: 0 for c in CATEGORIES}
        for m in self.members:
            sums[m.category] += m.probability
            counts[m.category] += 1
        self.mean_probs = {c.value: (sums[c] / counts[c] if counts[c] else 0.0)
                           for c in CATEGORIES}
        # argmax over means; ties resolve in fixed category order
        best = max(CATEGORIES, key=lambda c: (self.mean_probs[c.value],
                                              -CATEGORIES.index(c)))
        self.category = best
        pos = [m.position for m in self.members if m.category == best]
        self.position = np.mean(pos, axis=0) if pos else None
        self.last_seen = max((m.timestamp for m in self.members), default=self.last_seen)

    def summary(self):
        return TrackedSummary(
            feature_id=self.feature_id, category=self.category,
            position=(float(self.position[0]), float(self.position[1])),
            mean_probs=dict(self.mean_probs), n_members=len(self.members),
            created_at=self.created_at, last_seen=self.last_seen)


class FeatureTracker:
    def __init__(self, config=None):
        self.config = config or TrackerConfig()
        self.clusters = []
        self._next_id = 0
        self._last_t = -np.inf

    def integrate(self, detections, t):
        """Fold one frame's world-frame detections into the cluster set."""
        if t < self._last_t:
            raise TimeRegressionError(
                f"detections at t={t} arrived after t={self._last_t}")
        self._last_t = t
        for det in detections:
            pos = np.asarray(det.world, dtype=np.float64)
            member = _Member(category=det.category, position=pos,
                             probability=det.probability, timestamp=t)
            best = None
            best_d = None
            for cl in self.clusters:
                d = float(np.hypot(*(cl.position - pos)))
                if d <= self.config.cluster_radius and (best is None or d < best_d):
                    best = cl
                    best_d = d
            if best is None:
                cl = TrackedFeature(feature_id=self._next_id, members=[member],
                                    created_at=t)
                self._next_id += 1
                cl.aggregate()
                self.clusters.append(cl)
            else:
                best.members.append(member)
                best.aggregate()
        return self

    def prune(self, now):
        """Drop members older than the lifetime (a member exactly at the
        lifetime boundary is retained) and clusters left empty."""
        lifetime = self.config.member_lifetime
        keep = []
        for cl in self.clusters:
            cl.members = [m for m in cl.members if now - m.timestamp <= lifetime]
            if cl.members:
                cl.aggregate()
                keep.append(cl)
        self.clusters = keep
        return self

    def snapshot(self):
        """Value-semantics summaries ordered by creation time."""
        return [cl.summary() for cl in
                sorted(self.clusters, key=lambda c: (c.created_at, c.feature_id))]
