import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fexkit.errors import DegenerateFace, LengthMismatch
from fexkit.geometry import FaceBox, SimilarityTransform
from fexkit.metrics import (
    ConfusionCounts,
    average_precision,
    confusion,
    f1,
    landmark_nrmse,
    per_label_f1,
    precision,
    recall,
)


def test_precision_recall_examples():
    assert precision(ConfusionCounts(tp=3, fp=1)) == 0.75
    assert precision(ConfusionCounts()) == 0.0
    assert precision(ConfusionCounts(tp=5)) == 1.0
    assert recall(ConfusionCounts(tp=3, fn=2)) == 0.6
    assert recall(ConfusionCounts(tp=2)) == 1.0
    assert recall(ConfusionCounts()) == 0.0
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1)


def test_f1_examples():
    assert f1(ConfusionCounts(tp=4)) == 1.0
    assert f1(ConfusionCounts(tp=3, fp=1, fn=2)) == pytest.approx(0.6667, abs=5e-5)
    assert f1(ConfusionCounts(tp=3, fp=1, fn=2)) == pytest.approx(2 * 0.75 * 0.6 / 1.35)
    assert f1(ConfusionCounts(fp=3, fn=1)) == 0.0


@given(tp=st.integers(0, 50), fp=st.integers(0, 50), fn=st.integers(0, 50))
def test_f1_bounds_and_identity(tp, fp, fn):
    c = ConfusionCounts(tp, fp, fn)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    v = f1(c)
    assert 0.0 <= v <= min(1.0, 2 * min(p, r))
    assert v == (2 * p * r / (p + r) if p + r else 0.0)


def test_per_label_examples():
    scores, macro = per_label_f1(["a", "b", "a"], ["a", "b", "a"], ["a", "b"])
    assert scores == {"a": 1.0, "b": 1.0} and macro == 1.0
    scores, macro = per_label_f1(["a"] * 4, ["a", "a", "b", "b"], ["a", "b"])
    assert scores["a"] == pytest.approx(2 / 3) and scores["b"] == 0.0
    assert macro == pytest.approx(1 / 3)
    with pytest.raises(LengthMismatch):
        per_label_f1([1], [1, 2], [1, 2])


def test_per_label_matches_tally_oracle():
    rng = np.random.default_rng(3)
    labels = ["x", "y", "z", "w"]
    for _ in range(1000):
        n = int(rng.integers(1, 15))
        pred = [labels[i] for i in rng.integers(0, 4, n)]
        true = [labels[i] for i in rng.integers(0, 4, n)]
        # confusion-matrix tally
        M = np.zeros((4, 4), dtype=int)
        for p, t in zip(pred, true):
            M[labels.index(t), labels.index(p)] += 1
        scores, macro = per_label_f1(pred, true, labels)
        for k, lab in enumerate(labels):
            tp = M[k, k]
            fp = M[:, k].sum() - tp
            fn = M[k, :].sum() - tp
            expect = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
            assert scores[lab] == pytest.approx(expect, abs=1e-15)
        assert macro == sum(scores.values()) / 4


def test_confusion_counts():
    c = confusion([1, 1, 0, 0, 1], [1, 0, 1, 0, 1], 1)
    assert (c.tp, c.fp, c.fn, c.tn) == (2, 1, 1, 1)


# --- average precision -------------------------------------------------------


def box_iou(a, b):
    ix = max(0.0, min(a.x + a.width, b.x + b.width) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.height, b.y + b.height) - max(a.y, b.y))
    inter = ix * iy
    return inter / (a.width * a.height + b.width * b.height - inter)


def ap_cutoff_oracle(preds, truths, thr=0.5):
    """Recompute precision/recall at every rank cutoff from scratch, then
    integrate the upper precision envelope over recall."""
    ranked = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
    points = []
    for k in range(1, len(ranked) + 1):
        used, tp = set(), 0
        for i in ranked[:k]:
            cands = [(box_iou(preds[i], t), -j) for j, t in enumerate(truths) if j not in used]
            cands = [c for c in cands if c[0] >= thr]
            if cands:
                used.add(-max(cands)[1])
                tp += 1
        points.append((tp / len(truths), tp / k))
    area, prev = 0.0, 0.0
    for r in sorted({r for r, _ in points}):
        if r == 0:
            continue
        area += (r - prev) * max(p for rr, p in points if rr >= r)
        prev = r
    return area


def test_ap_examples():
    t = FaceBox(0, 0, 10, 10)
    assert average_precision([FaceBox(0, 0, 10, 10, 0.9)], [t]) == 1.0
    assert average_precision([], [t]) == 0.0
    assert average_precision([], []) == 1.0
    assert average_precision([FaceBox(0, 0, 1, 1)], []) == 0.0


def test_ap_mixed_case():
    truths = [FaceBox(0, 0, 10, 10), FaceBox(50, 50, 10, 10)]
    preds = [FaceBox(1, 1, 10, 10, 0.9), FaceBox(100, 100, 5, 5, 0.8), FaceBox(50, 51, 10, 10, 0.7)]
    # ranks: hit, miss, hit -> envelope 1.0 up to recall 0.5, 2/3 up to recall 1
    assert average_precision(preds, truths) == pytest.approx(0.5 + 0.5 * 2 / 3)
    assert average_precision(preds, truths) == pytest.approx(ap_cutoff_oracle(preds, truths))


def random_boxes(rng, n, scored):
    out = []
    for _ in range(n):
        x, y = rng.integers(0, 6, 2)
        w, h = rng.integers(1, 5, 2)
        s = float(rng.integers(0, 4)) if scored else 1.0
        out.append(FaceBox(float(x), float(y), float(w), float(h), s))
    return out


@given(seed=st.integers(0, 10**6), npred=st.integers(1, 6), ntruth=st.integers(1, 6))
def test_ap_matches_cutoff_oracle(seed, npred, ntruth):
    rng = np.random.default_rng(seed)
    preds, truths = random_boxes(rng, npred, True), random_boxes(rng, ntruth, False)
    for thr in (0.3, 0.5):
        assert average_precision(preds, truths, thr) == pytest.approx(ap_cutoff_oracle(preds, truths, thr), abs=1e-12)


@given(seed=st.integers(0, 10**6), k=st.floats(0.01, 100))
def test_ap_score_scaling_invariant(seed, k):
    rng = np.random.default_rng(seed)
    preds, truths = random_boxes(rng, 5, True), random_boxes(rng, 3, False)
    scaled = [FaceBox(p.x, p.y, p.width, p.height, p.score * k) for p in preds]
    assert average_precision(scaled, truths) == average_precision(preds, truths)


def test_ap_groups_isolate_images():
    t = [FaceBox(0, 0, 10, 10), FaceBox(0, 0, 10, 10)]
    p = [FaceBox(0, 0, 10, 10, 0.9)]
    assert average_precision(p, t, pred_groups=["b"], truth_groups=["a", "b"]) == 0.5
    assert average_precision(p, t[:1], pred_groups=["b"], truth_groups=["a"]) == 0.0


# --- landmarks ---------------------------------------------------------------


def test_nrmse_examples(template):
    assert landmark_nrmse(template, template) == 0.0
    D = math.dist(template[36], template[45])
    assert landmark_nrmse(template + (3.0, 0.0), template) == pytest.approx(3.0 / D)
    with pytest.raises(DegenerateFace):
        landmark_nrmse(template, np.zeros((68, 2)))


def test_nrmse_loop_oracle(template, rng):
    pred = template + rng.normal(0, 2, (68, 2))
    D = math.dist(template[36], template[45])
    total = sum(math.dist(pred[i], template[i]) for i in range(68))
    assert landmark_nrmse(pred, template) == pytest.approx(total / 68 / D, abs=1e-12)


@given(seed=st.integers(0, 10**6), s=st.floats(0.1, 10), rot=st.floats(-3, 3))
def test_nrmse_similarity_invariant(seed, s, rot):
    from fexkit.geometry import neutral_template

    truth = neutral_template()
    pred = truth + np.random.default_rng(seed).normal(0, 3, (68, 2))
    T = SimilarityTransform(s, rot, (7.0, -4.0))
    assert landmark_nrmse(T.apply(pred), T.apply(truth)) == pytest.approx(landmark_nrmse(pred, truth), abs=1e-9)
