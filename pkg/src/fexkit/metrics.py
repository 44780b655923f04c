"""Benchmark metrics: precision/recall/F1, detection AP and landmark error.

Zero denominators give 0 for precision, recall and F1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch
from .geometry import FaceBox, interocular_distance, iou


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")


def precision(c: ConfusionCounts) -> float:
    d = c.tp + c.fp
    return c.tp / d if d else 0.0


def recall(c: ConfusionCounts) -> float:
    d = c.tp + c.fn
    return c.tp / d if d else 0.0


def f1(c: ConfusionCounts) -> float:
    p, r = precision(c), recall(c)
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def confusion(pred, truth, positive) -> ConfusionCounts:
    tp = fp = fn = tn = 0
    for p, t in zip(pred, truth):
        pp, tt = p == positive, t == positive
        if pp and tt:
            tp += 1
        elif pp:
            fp += 1
        elif tt:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def per_label_f1(pred_labels: Sequence, true_labels: Sequence, labels: Sequence) -> tuple[dict, float]:
    """One-vs-rest F1 for every label, plus their unweighted mean."""
    pred_labels, true_labels = list(pred_labels), list(true_labels)
    if len(pred_labels) != len(true_labels):
        raise LengthMismatch(f"{len(pred_labels)} predictions vs {len(true_labels)} truths")
    scores = {lab: f1(confusion(pred_labels, true_labels, lab)) for lab in labels}
    macro = sum(scores.values()) / len(scores) if scores else 0.0
    return scores, macro


def _match(preds, truths, iou_threshold, pred_groups, truth_groups):
    """Greedy matching in descending-score order; returns the TP flag per ranked prediction."""
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    used = [False] * len(truths)
    hits = []
    for i in order:
        best, best_j = -1.0, -1
        for j, t in enumerate(truths):
            if used[j] or pred_groups[i] != truth_groups[j]:
                continue
            v = iou(preds[i], t)
            if v >= iou_threshold and v > best:
                best, best_j = v, j
        if best_j >= 0:
            used[best_j] = True
        hits.append(best_j >= 0)
    return hits


def average_precision(
    preds: Sequence[FaceBox],
    truths: Sequence[FaceBox],
    iou_threshold: float = 0.5,
    pred_groups: Sequence | None = None,
    truth_groups: Sequence | None = None,
) -> float:
    """All-points interpolated area under the precision-recall curve.

    Predictions are ranked by descending score (stable). Each is matched to
    the unmatched truth in the same group (image) with the highest IoU at or
    above the threshold; equal IoUs go to the lowest truth index. With no
    truths, AP is 1.0 if there are also no predictions, else 0.0.
    """
    if not truths:
        return 1.0 if not preds else 0.0
    if not preds:
        return 0.0
    pg = list(pred_groups) if pred_groups is not None else [0] * len(preds)
    tg = list(truth_groups) if truth_groups is not None else [0] * len(truths)
    hits = np.array(_match(preds, truths, iou_threshold, pg, tg), dtype=np.float64)
    tp = np.cumsum(hits)
    prec = tp / np.arange(1, len(hits) + 1)
    rec = tp / len(truths)
    # monotone precision envelope, then sum over recall steps
    env = np.maximum.accumulate(prec[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], rec]))
    return float(np.sum(steps * env))


def landmark_nrmse(pred, truth) -> float:
    """Mean point-to-point distance divided by the truth's interocular distance."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"landmark shapes differ: {pred.shape} vs {truth.shape}")
    iod = interocular_distance(truth)
    return float(np.mean(np.hypot(*(pred - truth).T)) / iod)
