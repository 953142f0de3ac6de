"""The describe module: turn tracked features near the robot into utterances.

A feature within 5 m is announced by the side it lies on. Q is the angle
between the robot-object line and the robot heading, positive to the robot's
right:

    LEFT   -120 deg < Q < -50 deg
    FRONT   -30 deg < Q <  30 deg
    RIGHT    50 deg < Q < 120 deg

Angles in the gaps (and beyond +/-120 deg) stay silent. Each feature is
announced once per category until its category changes or it leaves and
re-enters the 5 m disc.
"""

import math
from dataclasses import dataclass
from enum import Enum

from gridnav.gridworld import Category


class Side(Enum):
    LEFT = "left"
    FRONT = "front"
    RIGHT = "right"


_BINS = (
    (Side.LEFT, math.radians(-120.0), math.radians(-50.0)),
    (Side.FRONT, math.radians(-30.0), math.radians(30.0)),
    (Side.RIGHT, math.radians(50.0), math.radians(120.0)),
)

_DISPLAY = {Category.CLOSED_ROOM: "Closed-room",
            Category.OPEN_ROOM: "Open-room",
            Category.CORRIDOR: "Corridor"}


@dataclass
class Utterance:
    category: Category
    side: Side
    q_rad: float
    feature_id: int
    timestamp: float

    def to_dict(self):
        return {"t": self.timestamp, "category": self.category.value,
                "side": self.side.value, "q_deg": math.degrees(self.q_rad),
                "feature_id": self.feature_id}


def side_for_angle(q):
    for side, lo, hi in _BINS:
        if lo < q < hi:
            return side
    return None


class Narrator:
    def __init__(self, max_distance=5.0):
        self.max_distance = max_distance
        self._announced = {}    # feature_id -> last announced category

    def narrate(self, robot, summaries, t=0.0):
        """Utterances for this frame given the robot pose and a tracker
        snapshot. Updates the per-feature announcement state."""
        utterances = []
        seen_inside = set()
        for s in summaries:
            rel = robot.world_to_robot(s.position)
            dist = math.hypot(rel[0], rel[1])
            if dist > self.max_distance:
                continue
            seen_inside.add(s.feature_id)
            q = math.atan2(rel[0], rel[1])
            side = side_for_angle(q)
            if side is None:
                continue
            if self._announced.get(s.feature_id) == s.category:
                continue
            self._announced[s.feature_id] = s.category
            utterances.append(Utterance(category=s.category, side=side,
                                        q_rad=q, feature_id=s.feature_id,
                                        timestamp=t))
        # forget features outside the disc so re-entry re-announces them
        for fid in list(self._announced):
            if fid not in seen_inside:
                del self._announced[fid]
        return utterances


def format_utterance(u):
    return f"{_DISPLAY[u.category]} on the {u.side.value}"


def format_frame(utterances):
    """Sentences for one frame; corridor utterances sharing the frame are
    grouped into a single sentence listing their sides."""
    sides_order = {Side.LEFT: 0, Side.FRONT: 1, Side.RIGHT: 2}
    corridors = [u for u in utterances if u.category is Category.CORRIDOR]
    rest = [u for u in utterances if u.category is not Category.CORRIDOR]
    lines = [format_utterance(u) for u in rest]
    if len(corridors) == 1:
        lines.append(format_utterance(corridors[0]))
    elif len(corridors) > 1:
        sides = sorted({u.side for u in corridors}, key=sides_order.get)
        if len(sides) == 1:
            lines.append(f"Corridor on the {sides[0].value}")
        else:
            lines.append("corridors on the " +
                         " and ".join(s.value for s in sides))
    return lines
