"""Point-detection matching and precision/recall/F1 reports.

Matching is category-strict within the match radius and solved as an optimal
assignment (maximum number of within-radius pairs, minimum total distance
among those), which is deterministic and conflict-free: every prediction and
every ground-truth point is used at most once. Plain greedy-by-distance can
drop a feasible pair on crossing configurations, so the assignment is solved
exactly.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from gridnav.augment import Sample
from gridnav.detector import decode, head_probs
from gridnav.evalkit.training import batch_arrays, sample_from_record
from gridnav.gridworld import CATEGORIES, Pose
from gridnav.mapper import network_view


@dataclass
class CategoryCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self):
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self):
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0


@dataclass
class MetricsReport:
    counts: dict = field(default_factory=dict)      # category value -> CategoryCounts
    metrics: dict = field(default_factory=dict)     # category value -> {p, r, f1}
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, counts, meta=None):
        metrics = {c: {"precision": cc.precision, "recall": cc.recall,
                       "f1": cc.f1}
                   for c, cc in counts.items()}
        return cls(counts=counts, metrics=metrics, meta=meta or {})

    def to_dict(self):
        return {
            "counts": {c: {"tp": cc.tp, "fp": cc.fp, "fn": cc.fn}
                       for c, cc in self.counts.items()},
            "metrics": self.metrics,
            "meta": self.meta,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    def table(self, row_name=None):
        """Recall / precision / F1 blocks with one row per run."""
        row_name = row_name or self.meta.get("variant", "model")
        cats = [c.value for c in CATEGORIES]
        head = "{:<12}".format("") + "".join(
            "{:>13}".format(c.replace("_", " ")) for c in cats)
        lines = []
        for metric in ("recall", "precision", "f1"):
            lines.append(metric.capitalize())
            lines.append(head)
            row = "{:<12}".format(row_name)
            for c in cats:
                row += "{:>13.3f}".format(self.metrics.get(c, {}).get(metric, 0.0))
            lines.append(row)
            lines.append("")
        return "\n".join(lines).rstrip()


def match_points(predictions, truths, radius):
    """Optimal category-strict matching of (category, xy) points.

    Returns (pairs, unmatched_pred_idx, unmatched_truth_idx), where pairs is
    a list of (pred_idx, truth_idx). Pairs beyond the radius are infeasible.
    """
    from scipy.optimize import linear_sum_assignment

    used_p = set()
    used_t = set()
    pairs = []
    categories = {c for c, _ in predictions} | {c for c, _ in truths}
    for cat in sorted(categories, key=lambda c: str(c)):
        pi = [i for i, (c, _) in enumerate(predictions) if c == cat]
        ti = [j for j, (c, _) in enumerate(truths) if c == cat]
        if not pi or not ti:
            continue
        big = 1e9
        cost = np.full((len(pi), len(ti)), big)
        for a, i in enumerate(pi):
            for b, j in enumerate(ti):
                d = float(np.hypot(predictions[i][1][0] - truths[j][1][0],
                                   predictions[i][1][1] - truths[j][1][1]))
                if d <= radius:
                    cost[a, b] = d
        rows, cols = linear_sum_assignment(cost)
        for a, b in zip(rows, cols):
            if cost[a, b] < big:
                pairs.append((pi[a], ti[b]))
                used_p.add(pi[a])
                used_t.add(ti[b])
    pairs.sort()
    fp = [i for i in range(len(predictions)) if i not in used_p]
    fn = [j for j in range(len(truths)) if j not in used_t]
    return pairs, fp, fn


def accumulate_matches(counts, predictions, truths, radius):
    pairs, fp, fn = match_points(predictions, truths, radius)
    for i, _ in pairs:
        counts[predictions[i][0].value].tp += 1
    for i in fp:
        counts[predictions[i][0].value].fp += 1
    for j in fn:
        counts[truths[j][0].value].fn += 1
    return pairs, fp, fn


def new_counts():
    return {c.value: CategoryCounts() for c in CATEGORIES}


def eval_frames(net, records, store, variant="combined", threshold=0.5,
                radius=0.5, batch_size=32, meta=None):
    """Per-frame detection metrics: decode each frame and match detections to
    that frame's ground truth in the robot frame."""
    counts = new_counts()
    net_px = net.spec.input_px
    grid_size = net.spec.grid_size
    for i in range(0, len(records), batch_size):
        chunk = records[i:i + batch_size]
        samples = []
        for r in chunk:
            s = sample_from_record(r, store)
            samples.append(Sample(
                laser=network_view(s.laser, net_px, expected_extent=None),
                gmap=network_view(s.gmap, net_px, expected_extent=None),
                labels=s.labels))
        window = samples[0].extent
        laser, gmap, targets = batch_arrays(samples, variant, net_px, window,
                                            grid_size)
        out, _ = net.forward(laser, gmap, train=False)
        probs = head_probs(out.astype(np.float64))
        for k, r in enumerate(chunk):
            dets = decode(probs[k], Pose(*r.pose), threshold=threshold,
                          window=window)
            preds = [(d.category, d.position) for d in dets]
            truths = [(l.category, l.position) for l in r.labels_rf]
            accumulate_matches(counts, preds, truths, radius)
    m = dict(meta or {})
    m.update({"variant": variant, "threshold": threshold, "radius": radius,
              "frames": len(records)})
    return MetricsReport.from_counts(counts, meta=m)


def mean_reports(reports, meta=None):
    """Arithmetic mean of per-repetition precision/recall/F1, per category.

    Counts are summed for reference; the reported metrics are the means of
    the per-repetition metrics, not pooled-count recomputations.
    """
    cats = [c.value for c in CATEGORIES]
    counts = new_counts()
    metrics = {}
    for c in cats:
        metrics[c] = {}
        for m in ("precision", "recall", "f1"):
            metrics[c][m] = float(np.mean(
                [r.metrics[c][m] for r in reports])) if reports else 0.0
        for r in reports:
            counts[c].tp += r.counts[c].tp
            counts[c].fp += r.counts[c].fp
            counts[c].fn += r.counts[c].fn
    m = dict(meta or {})
    m["repetitions"] = len(reports)
    m["per_repetition"] = [r.metrics for r in reports]
    return MetricsReport(counts=counts, metrics=metrics, meta=m)
