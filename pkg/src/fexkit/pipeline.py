"""End-to-end procedures.

Extraction: landmarks are aligned to a crop-sized neutral template, the image
is pulled through the same similarity into a ``crop x crop`` patch, the
forehead-extended face hull masks the background, and HOG (optionally PCA)
plus the aligned landmarks form the feature vector.

Replication: per-clip mean AU activations, per-AU t-tests between two
conditions, leave-one-clip-out logistic classification and the all-clip
logistic coefficients.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import FexError, ModelConfigMismatch, TooFewSamples
from .features.hog import FeatureVector, HogConfig, as_gray_image, hog
from .features.pca import PcaModel, pca_transform
from .features.temporal import summarize_sessions
from .fexdata import AU_NAMES, FexTable, select
from .geometry import face_hull, face_mask, fit_similarity, flatten_landmarks, neutral_template, as_landmarks
from .learn.cv import leave_one_group_out, predict_proba
from .learn.logistic import train_logistic
from .learn.model import TrainedModel
from .stats import ttest_ind

CROP_MARGIN = 4.0
REPLICATION_L2 = 1e-2


@dataclass(frozen=True)
class ExtractionConfig:
    crop: int = 112
    hog: HogConfig = field(default_factory=HogConfig)
    pca_retain: float = 0.95
    include_landmarks: bool = True

    def __post_init__(self):
        if self.crop % self.hog.cell:
            raise ValueError(f"crop {self.crop} not divisible by HOG cell {self.hog.cell}")

    def to_dict(self):
        d = self.hog.to_dict()
        d.update(crop=self.crop, pca_retain=self.pca_retain, include_landmarks=self.include_landmarks)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            crop=int(d.get("crop", 112)),
            hog=HogConfig.from_dict(d),
            pca_retain=float(d.get("pca_retain", 0.95)),
            include_landmarks=bool(d.get("include_landmarks", True)),
        )


@lru_cache(maxsize=8)
def _crop_template_cached(crop):
    t = neutral_template()
    hull = face_hull(t)
    lo, hi = hull.min(axis=0), hull.max(axis=0)
    s = (crop - 1 - 2 * CROP_MARGIN) / float(np.max(hi - lo))
    out = (t - (lo + hi) / 2.0) * s + (crop - 1) / 2.0
    out.setflags(write=False)
    return out


def crop_template(crop=112) -> np.ndarray:
    """Neutral template scaled and centred so its forehead-extended hull fits the crop."""
    return _crop_template_cached(int(crop)).copy()


def align_face(img, lm, crop=112):
    """Return ``(patch, aligned_landmarks)``: the ``crop x crop`` bilinear warp of
    ``img`` under the similarity taking ``lm`` onto :func:`crop_template`."""
    img = as_gray_image(img)
    lm = as_landmarks(lm)
    T = fit_similarity(lm, crop_template(crop))
    a, b = T.inverse().linear
    tx, ty = T.inverse().translation
    patch = _kernels.warp_similarity(img, a, b, tx, ty, crop, crop)
    return patch, T.apply(lm)


def masked_hog(img, lm, cfg: ExtractionConfig):
    """HOG of the aligned, hull-masked crop plus the aligned landmarks."""
    patch, aligned = align_face(img, lm, cfg.crop)
    mask = face_mask(aligned, cfg.crop, cfg.crop)
    return hog(patch, mask, cfg.hog).values, aligned


def assemble(hog_values, aligned, cfg: ExtractionConfig, pca: PcaModel | None = None) -> FeatureVector:
    """HOG (PCA-projected if given) followed, if configured, by the aligned
    landmark coordinates divided by the crop size."""
    parts = [pca_transform(pca, hog_values) if pca is not None else hog_values]
    if cfg.include_landmarks:
        parts.append(flatten_landmarks(aligned) / cfg.crop)
        provenance = "landmarks+hog"
    else:
        provenance = "hog+pca" if pca is not None else "hog"
    return FeatureVector(np.concatenate(parts), provenance)


def extract_features(img, lm, cfg: ExtractionConfig | None = None, pca: PcaModel | None = None) -> FeatureVector:
    cfg = cfg or ExtractionConfig()
    h, aligned = masked_hog(img, lm, cfg)
    return assemble(h, aligned, cfg, pca)


def _map(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def extract_batch(images, landmarks, cfg: ExtractionConfig | None = None, jobs=1):
    """``(hog_matrix, aligned_landmarks)`` for a batch; order-stable for any ``jobs``."""
    cfg = cfg or ExtractionConfig()
    res = _map(lambda pair: masked_hog(pair[0], pair[1], cfg), list(zip(images, landmarks)), jobs)
    if not res:
        return np.zeros((0, cfg.hog.feature_length(cfg.crop, cfg.crop))), np.zeros((0, 68, 2))
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])


def model_config(model: TrainedModel) -> ExtractionConfig:
    return ExtractionConfig.from_dict(model.hog) if model.hog is not None else ExtractionConfig()


def detect_aus(images, landmarks, models: Mapping[str, TrainedModel], jobs=1) -> FexTable:
    """One row per image with the positive-class probability of every AU that
    has a model (others NaN) and the input landmarks.

    All models must carry the same extraction config; each may bring its own
    PCA.
    """
    images, landmarks = list(images), list(landmarks)
    unknown = set(models) - set(AU_NAMES)
    if unknown:
        raise ModelConfigMismatch(f"models for unknown AUs: {sorted(unknown)}")
    configs = {repr(sorted(model_config(m).to_dict().items())) for m in models.values()}
    if len(configs) > 1:
        raise ModelConfigMismatch("per-AU models were trained with different extraction configs")
    if not images:
        return FexTable.empty()
    cfg = model_config(next(iter(models.values()))) if models else ExtractionConfig()
    H, aligned = extract_batch(images, landmarks, cfg, jobs)
    n = len(images)
    cols = {}
    for name in AU_NAMES:
        m = models.get(name)
        if m is None:
            continue
        # row by row, so each value equals the single-image prediction bit for bit
        cols[name] = np.array([predict_proba(m, assemble(H[i], aligned[i], cfg, m.pca).values)[0, -1] for i in range(n)])
    flat = np.array([flatten_landmarks(as_landmarks(lm)) for lm in landmarks])
    for j, c in enumerate([f"x_{i}" for i in range(68)] + [f"y_{i}" for i in range(68)]):
        cols[c] = flat[:, j]
    return FexTable.from_columns(n, cols)


@dataclass
class Replication:
    report: dict
    classifier: TrainedModel


def replicate_goodnews(
    table: FexTable,
    conditions: Mapping[str, str],
    positive: str | None = None,
    l2: float = REPLICATION_L2,
    features: Sequence[str] = AU_NAMES,
    jobs=1,
) -> Replication:
    """Clip-level comparison of two conditions.

    ``conditions`` maps session label -> condition. The positive condition
    (default: the later of the two in sorted order) is the first t-test group
    and the classifier's positive class. AUs never detected are reported with
    null statistics and enter the classifier as 0.
    """
    summary = summarize_sessions(table, "mean")
    sessions = list(summary.sessions)
    missing = [s for s in sessions if s not in conditions]
    if missing:
        raise TooFewSamples(f"no condition for sessions {missing[:5]}")
    y = [conditions[s] for s in sessions]
    labels = sorted(set(y))
    if len(labels) != 2:
        raise TooFewSamples(f"need exactly two conditions, got {labels}")
    positive = labels[1] if positive is None else positive
    if positive not in labels:
        raise ValueError(f"positive condition {positive!r} not present")
    negative = labels[0] if labels[1] == positive else labels[1]
    counts = {lab: y.count(lab) for lab in labels}
    if min(counts.values()) < 2:
        raise TooFewSamples(f"need at least 2 sessions per condition, got {counts}")

    M = select(summary, "aus")
    col = {name: j for j, name in enumerate(AU_NAMES)}
    feats = list(features)
    X = np.nan_to_num(M[:, [col[f] for f in feats]], nan=0.0)
    is_pos = np.array([v == positive for v in y])

    tests = []
    for f in feats:
        v = M[:, col[f]]
        entry = {"test": "ttest", "feature": f}
        try:
            r = ttest_ind(v[is_pos], v[~is_pos])
            entry.update(
                t=r.t, df=r.df, p=r.p,
                mean_positive=float(np.nanmean(v[is_pos])), mean_negative=float(np.nanmean(v[~is_pos])),
            )
        except FexError as exc:
            entry.update(t=None, df=None, p=None, note=f"{exc.code}: {exc}")
        tests.append(entry)

    order = [negative, positive]
    pred, acc = leave_one_group_out(X, y, sessions, "logistic", {"l2": l2}, labels=order, jobs=jobs)
    clf = train_logistic(X, y, l2=l2, labels=order)
    w = clf.params["weights"][0]
    report = {
        "n_sessions": len(sessions),
        "conditions": {"positive": positive, "negative": negative, "counts": counts},
        "ttests": tests,
        "classification": {
            "scheme": "leave-one-clip-out",
            "model": "logistic",
            "l2": l2,
            "accuracy": acc,
            "predictions": dict(zip(sessions, pred)),
        },
        "coefficients": {f: float(c) for f, c in zip(feats, w)},
        "intercept": float(clf.params["bias"][0]),
    }
    return Replication(report, clf)
