"""Grid-cell detection semantics: target encoding, the weighted loss, and
decoding predictions into metric detections.

The network output is a (6, S, S) tensor over an S x S grid laid over the
front window (default 8 m, S = 5). Channel order per cell:

    0: confidence Pr(Object)
    1: x offset of the object center from the cell's top-left corner, in (0,1)
    2: y offset, same convention
    3..5: conditional class probabilities, ordered closed/open/corridor

The final probability of a category is the product of its conditional
probability and the cell confidence.
"""

import math
from dataclasses import dataclass

import numpy as np

from gridnav.gridworld import CATEGORIES, Category, FrameLabel

GRID_SIZE = 5
WINDOW_M = 8.0
N_CHANNELS = 6

CONF = 0
OFF_X = 1
OFF_Y = 2
CAT0 = 3


@dataclass
class LossWeights:
    """Weights of the three loss terms: category cross-entropy, coordinate
    squared error, confidence squared error. They must sum to 1."""
    xent: float = 0.61
    coord: float = 0.14
    conf: float = 0.25

    def __post_init__(self):
        if min(self.xent, self.coord, self.conf) < 0:
            raise ValueError("loss weights must be nonnegative")
        if abs(self.xent + self.coord + self.conf - 1.0) > 1e-9:
            raise ValueError(
                f"loss weights must sum to 1, got "
                f"{self.xent + self.coord + self.conf}"
            )


@dataclass
class Detection:
    """A decoded feature hypothesis."""
    category: Category
    position: np.ndarray        # robot frame meters (x right, y forward)
    world: np.ndarray           # world frame meters
    probability: float          # confidence * conditional
    cell: tuple                 # (row, col) in the detection grid
    timestamp: float = 0.0

    def to_dict(self):
        return {"t": self.timestamp, "category": self.category.value,
                "x_m": float(self.world[0]), "y_m": float(self.world[1]),
                "p": self.probability, "cell": list(self.cell)}


def window_norm(x, y, window=WINDOW_M):
    """Robot-frame meters -> normalized window coordinates (u right from the
    left edge, v down from the top edge), each in [0, 1) inside the window."""
    u = (np.asarray(x) + window / 2.0) / window
    v = (window - np.asarray(y)) / window
    return u, v


def window_denorm(u, v, window=WINDOW_M):
    x = np.asarray(u) * window - window / 2.0
    y = window * (1.0 - np.asarray(v))
    return x, y


def window_contains(x, y, window=WINDOW_M):
    u, v = window_norm(x, y, window)
    return (0.0 <= u < 1.0) and (0.0 <= v < 1.0)


def encode_targets(labels, window=WINDOW_M, grid_size=GRID_SIZE):
    """Encode robot-frame labels into the (6, S, S) target tensor.

    Each label claims the cell containing its center; when two labels land in
    one cell the one nearer the cell center wins (ties go to the lower label
    index). Empty cells carry confidence 0, centered offsets, and a uniform
    category vector; all of those are masked out of the loss.
    """
    s = grid_size
    t = np.zeros((N_CHANNELS, s, s), dtype=np.float64)
    t[OFF_X] = 0.5
    t[OFF_Y] = 0.5
    t[CAT0:] = 1.0 / len(CATEGORIES)
    best = {}
    for idx, lab in enumerate(labels):
        u, v = window_norm(lab.position[0], lab.position[1], window)
        if not (0 <= u < 1 and 0 <= v < 1):
            continue
        col = int(math.floor(u * s))
        row = int(math.floor(v * s))
        ox = u * s - col
        oy = v * s - row
        d = (ox - 0.5) ** 2 + (oy - 0.5) ** 2
        key = (row, col)
        if key in best and best[key][0] <= d:
            continue
        best[key] = (d, idx, ox, oy, lab.category)
    for (row, col), (_, _, ox, oy, cat) in best.items():
        t[CONF, row, col] = 1.0
        t[OFF_X, row, col] = ox
        t[OFF_Y, row, col] = oy
        t[CAT0:, row, col] = 0.0
        t[CAT0 + CATEGORIES.index(cat), row, col] = 1.0
    return t


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def head_probs(logits):
    """Map raw head logits to the probability tensor: logistic on confidence
    and offsets, softmax over the category channels. Accepts (6, S, S) or
    (N, 6, S, S)."""
    z = np.asarray(logits)
    single = z.ndim == 3
    if single:
        z = z[None]
    p = np.empty_like(z)
    p[:, CONF] = _sigmoid(z[:, CONF])
    p[:, OFF_X] = _sigmoid(z[:, OFF_X])
    p[:, OFF_Y] = _sigmoid(z[:, OFF_Y])
    zc = z[:, CAT0:]
    zc = zc - zc.max(axis=1, keepdims=True)
    ez = np.exp(zc)
    p[:, CAT0:] = ez / ez.sum(axis=1, keepdims=True)
    return p[0] if single else p


def detection_loss(logits, target, weights=None):
    """Weighted detection loss and its exact gradient w.r.t. the logits.

    L = w.xent * Xent + w.coord * Lp + w.conf * Lc, where Xent is the mean
    category cross-entropy over object cells, Lp the mean squared offset
    error over the (x, y) components of object cells, and Lc the mean squared
    confidence error over all cells. Object cells pool across the batch.
    Accepts (6, S, S) or (N, 6, S, S); returns (loss, dlogits).
    """
    w = weights or LossWeights()
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    single = z.ndim == 3
    if single:
        z = z[None]
        t = t[None]
    if z.shape != t.shape:
        raise ValueError(f"prediction grid {z.shape} != target grid {t.shape}")

    n, _, s1, s2 = z.shape
    obj = t[:, CONF] > 0.5
    n_obj = int(obj.sum())
    n_cells = n * s1 * s2
    grad = np.zeros_like(z)

    # confidence: squared error over every cell
    pc = _sigmoid(z[:, CONF])
    dc = pc - t[:, CONF]
    loss_conf = float(np.sum(dc * dc)) / n_cells
    grad[:, CONF] = w.conf * (2.0 * dc * pc * (1.0 - pc)) / n_cells

    loss_coord = 0.0
    loss_xent = 0.0
    if n_obj > 0:
        # offsets: squared error over the 2 * n_obj object-cell components
        po = _sigmoid(z[:, OFF_X:OFF_Y + 1])
        do = (po - t[:, OFF_X:OFF_Y + 1]) * obj[:, None]
        loss_coord = float(np.sum(do * do)) / (2 * n_obj)
        grad[:, OFF_X:OFF_Y + 1] = (
            w.coord * (2.0 * do * po * (1.0 - po)) / (2 * n_obj)
        )

        # categories: cross-entropy with log-sum-exp for stability
        zc = z[:, CAT0:]
        zmax = zc.max(axis=1, keepdims=True)
        lse = zmax + np.log(np.exp(zc - zmax).sum(axis=1, keepdims=True))
        logp = zc - lse
        tc = t[:, CAT0:]
        loss_xent = float(-np.sum(tc * logp * obj[:, None])) / n_obj
        softmax = np.exp(logp)
        grad[:, CAT0:] = w.xent * ((softmax - tc) * obj[:, None]) / n_obj

    loss = w.xent * loss_xent + w.coord * loss_coord + w.conf * loss_conf
    return loss, (grad[0] if single else grad)


def decode(probs, anchor_pose, threshold=0.5, window=WINDOW_M, timestamp=0.0):
    """Decode a (6, S, S) probability tensor into detections.

    Per cell the final probability of each category is its conditional
    probability times the confidence; the argmax category is emitted when its
    final probability reaches the threshold. Offsets place the detection in
    robot-frame meters, then the anchor pose lifts it to the world frame.
    """
    p = np.asarray(probs)
    s = p.shape[1]
    detections = []
    for row in range(s):
        for col in range(s):
            conf = p[CONF, row, col]
            final = p[CAT0:, row, col] * conf
            k = int(np.argmax(final))
            if final[k] < threshold:
                continue
            u = (col + p[OFF_X, row, col]) / s
            v = (row + p[OFF_Y, row, col]) / s
            x, y = window_denorm(u, v, window)
            pos = np.array([x, y])
            detections.append(Detection(
                category=CATEGORIES[k], position=pos,
                world=anchor_pose.robot_to_world(pos),
                probability=float(final[k]), cell=(row, col),
                timestamp=timestamp))
    return detections


def labels_in_window(pose, labels, window=WINDOW_M):
    """World labels -> robot-frame labels whose centers lie in the window."""
    out = []
    for lab in labels:
        p = pose.world_to_robot(lab.position)
        if window_contains(p[0], p[1], window):
            out.append(FrameLabel(category=lab.category, position=p))
    return out
