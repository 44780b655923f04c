"""Batch command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or validation error. Errors are
reported on standard error as one line ``error: <code>: <message>``; data
goes only to the files named by flags (or standard output where noted).

Feature matrices are CSV files whose ``f_0 .. f_{d-1}`` columns hold the
features; any other columns (``frame``, ``session``, ``image``, ``label``)
are carried as row identifiers.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .errors import (
    DimensionMismatch,
    DuplicateColumn,
    FexError,
    InvalidTable,
    IoFailure,
    LengthMismatch,
    MalformedNumber,
    MissingColumn,
    ModelConfigMismatch,
    NonFinite,
    TooFewSamples,
)
from .features.hog import HogConfig
from .features.pca import fit_pca, pca_transform
from .features.temporal import bag_of_temporal_filters, baseline_normalize, summarize_sessions
from .fexdata import AU_NAMES, EMOTION_NAMES, VALUE_COLUMNS, FexTable, format_number, read_fex_csv, select, write_fex_csv
from .learn.cv import CvPlan, grid_search_cv, predict_proba, train
from .learn.model import TrainedModel, load_model, load_pca, save_model, save_pca
from .metrics import confusion, f1, landmark_nrmse, per_label_f1, precision, recall, average_precision
from .pipeline import ExtractionConfig, assemble, extract_batch, replicate_goodnews
from .stats import ConstantSeriesWarning, isc, regress, ttest_ind

IMAGE_SUFFIXES = (".png", ".pgm")


class UsageError(Exception):
    """Bad command line; exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- small I/O helpers ------------------------------------------------------


def _progress(msg):
    print(msg, file=sys.stderr)


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def dumps_report(obj) -> str:
    """JSON with NaN as null and infinities as the strings ``"inf"``/``"-inf"``."""
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def _write_json(path, obj):
    _write_text(path, dumps_report(obj))


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidTable(f"{path}: not JSON: {exc}") from exc


def read_csv(path):
    """``(header, rows)`` of a plain CSV file with a unique header."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InvalidTable(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    seen = set()
    for h in header:
        if h in seen:
            raise DuplicateColumn(h)
        seen.add(h)
    body = [r for r in rows[1:] if r]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise InvalidTable(f"{path}: data row {i} has {len(r)} cells, header has {len(header)}")
    return header, body


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _float(text, row, col):
    t = text.strip()
    if t == "":
        return math.nan
    try:
        return float(t)
    except ValueError:
        raise MalformedNumber(row, col, text) from None


def read_features(path):
    """``(X, ids)``: the ``f_*`` matrix and the remaining columns by name."""
    header, body = read_csv(path)
    fcols = [h for h in header if h.startswith("f_")]
    d = len(fcols)
    expected = [f"f_{j}" for j in range(d)]
    if sorted(fcols, key=lambda h: int(h[2:]) if h[2:].isdigit() else -1) != expected:
        raise InvalidTable(f"{path}: feature columns must be f_0..f_{d - 1}")
    pos = [header.index(h) for h in expected]
    X = np.array([[_float(r[p], i, header[p]) for p in pos] for i, r in enumerate(body)], dtype=np.float64)
    X = X.reshape(len(body), d)
    ids = {h: [r[j] for r in body] for j, h in enumerate(header) if not h.startswith("f_")}
    return X, ids


def write_features(path, X, ids=None):
    ids = ids or {}
    X = np.asarray(X, dtype=np.float64)
    header = list(ids) + [f"f_{j}" for j in range(X.shape[1])]
    rows = []
    for i in range(X.shape[0]):
        rows.append([str(ids[k][i]) for k in ids] + [format_number(v) for v in X[i]])
    _write_text(path, _csv_text(header, rows))


def read_image(path) -> np.ndarray:
    """8-bit grayscale PNG/PGM as floats in [0, 1]."""
    from PIL import Image

    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
    except OSError as exc:
        raise IoFailure(f"cannot read image {path}: {exc}") from exc
    return arr / 255.0


def write_image(path, img):
    from PIL import Image

    arr = np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    try:
        Image.fromarray(arr, mode="L").save(path, format="PNG", optimize=False)
    except OSError as exc:
        raise IoFailure(f"cannot write image {path}: {exc}") from exc


def _key_column(path, header, body, name):
    if name not in header:
        raise MissingColumn(name)
    j = header.index(name)
    return [r[j].strip() for r in body]


def read_mapping(path, key="session", value="condition"):
    header, body = read_csv(path)
    keys = _key_column(path, header, body, key)
    vals = _key_column(path, header, body, value)
    out = {}
    for k, v in zip(keys, vals):
        if k in out:
            raise InvalidTable(f"{path}: duplicate {key} {k!r}")
        out[k] = v
    return out


# --- argument parsing helpers -----------------------------------------------


def _parse_hog(text) -> HogConfig:
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"--hog expects ORIENTATIONS,CELL,BLOCK integers, got {text!r}") from None
    if len(parts) != 3:
        raise UsageError(f"--hog expects three integers, got {text!r}")
    return HogConfig(orientations=parts[0], cell=parts[1], block=parts[2])


def _parse_aus(text) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise UsageError(f"--au entries must look like AU12=1.0, got {item!r}")
        name, val = (s.strip() for s in item.split("=", 1))
        if name not in AU_NAMES:
            raise UsageError(f"unknown action unit {name!r}")
        try:
            out[name] = float(val)
        except ValueError:
            raise UsageError(f"bad activation for {name}: {val!r}") from None
    return out


def _parse_features_arg(text):
    if text is None:
        return list(AU_NAMES)
    names = [s.strip() for s in text.split(",") if s.strip()]
    for n in names:
        if n not in VALUE_COLUMNS:
            raise UsageError(f"unknown column {n!r}")
    return names


def _extraction_config(a) -> ExtractionConfig:
    return ExtractionConfig(crop=a.crop, hog=_parse_hog(a.hog), pca_retain=a.pca_retain,
                            include_landmarks=not a.no_landmarks)


# --- extract ------------------------------------------------------------------


def _image_paths(directory, table):
    if "image" in table.extras:
        return [os.path.join(directory, name) for name in table.extras["image"]]
    try:
        names = sorted(n for n in os.listdir(directory) if n.lower().endswith(IMAGE_SUFFIXES))
    except OSError as exc:
        raise IoFailure(f"cannot list {directory}: {exc}") from exc
    if len(names) != len(table):
        raise LengthMismatch(f"{len(names)} images in {directory} but {len(table)} landmark rows")
    return [os.path.join(directory, n) for n in names]


def kept_rows(table: FexTable, skip) -> list[int]:
    """Row indices after keeping every ``skip + 1``-th row of each session."""
    if skip < 0:
        raise UsageError("--skip-frames must be >= 0")
    seen: dict[str, int] = {}
    keep = []
    for i, s in enumerate(table.sessions):
        k = seen.get(s, 0)
        if k % (skip + 1) == 0:
            keep.append(i)
        seen[s] = k + 1
    return keep


def cmd_extract(a):
    cfg = _extraction_config(a)
    table = read_fex_csv(a.landmarks)
    paths = _image_paths(a.images, table)
    rows = kept_rows(table, a.skip_frames)
    lms = []
    for i in rows:
        lm = table.row(i).landmarks
        if lm is None or not np.all(np.isfinite(lm)):
            raise InvalidTable(f"row {i} (frame {int(table.frame[i])}) has no landmarks")
        lms.append(lm)
    images = [read_image(paths[i]) for i in rows]
    _progress(f"extract: {len(rows)} of {len(table)} frames")
    H, aligned = extract_batch(images, lms, cfg, jobs=a.jobs)
    if a.pca == "none":
        pca = None
    elif a.pca == "fit":
        if not a.pca_out:
            raise UsageError("--pca fit needs --pca-out")
        pca = fit_pca(H, a.pca_retain)
        save_pca(pca, a.pca_out, cfg.to_dict())
        _progress(f"extract: PCA keeps {pca.k} components")
    else:
        pca = load_pca(a.pca)
        if pca.n_features != H.shape[1]:
            raise DimensionMismatch(f"PCA expects {pca.n_features} HOG features, got {H.shape[1]}")
    X = np.array([assemble(H[j], aligned[j], cfg, pca).values for j in range(len(rows))])
    if not rows:
        X = np.zeros((0, 0))
    ids = {"frame": [int(table.frame[i]) for i in rows], "session": [table.sessions[i] for i in rows]}
    if "image" in table.extras:
        ids["image"] = [table.extras["image"][i] for i in rows]
    write_features(a.out, X, ids)


# --- train / predict ------------------------------------------------------


def _labels_from(a, ids, n):
    if a.labels:
        header, body = read_csv(a.labels)
        raw = _key_column(a.labels, header, body, a.target)
    elif a.target in ids:
        raw = [s.strip() for s in ids[a.target]]
    else:
        raise UsageError(f"no --labels file and no {a.target!r} column in the features")
    if len(raw) != n:
        raise LengthMismatch(f"{len(raw)} labels for {n} feature rows")
    if a.task == "au":
        y = []
        for i, t in enumerate(raw):
            v = _float(t, i, a.target)
            if not math.isfinite(v):
                raise NonFinite(f"label row {i} is missing")
            y.append(int(v >= 0.5))
        return y
    for t in raw:
        if t not in EMOTION_NAMES:
            raise InvalidTable(f"unknown emotion label {t!r}")
    return raw


def cmd_train(a):
    X, ids = read_features(a.features)
    y = _labels_from(a, ids, X.shape[0])
    if not np.all(np.isfinite(X)):
        raise NonFinite("feature matrix contains missing or non-finite values")
    grid = _read_json(a.grid) if a.grid else None
    if grid is not None and not isinstance(grid, dict):
        raise InvalidTable("grid must be a JSON object of parameter -> list of values")
    plan = CvPlan(folds=a.folds, grid=grid, seed=a.seed)
    # emotions keep schema order so argmax ties resolve the documented way
    labels = [e for e in EMOTION_NAMES if e in set(y)] if a.task == "emotion" else None
    best, cells = grid_search_cv(X, y, a.model, plan, labels=labels, jobs=a.jobs)
    _progress(f"train: best {best}")
    model = train(a.model, X, y, best, seed=a.seed, labels=labels)
    model.hog = _extraction_config(a).to_dict()
    model.pca = load_pca(a.pca) if a.pca else None
    model.meta.update(
        task=a.task,
        target=a.target,
        seed=a.seed,
        folds=a.folds,
        best_params=best,
        grid_results=[{"params": p, "mean_f1": s} for p, s in cells],
    )
    save_model(model, a.out)


def model_inputs(model: TrainedModel, X) -> np.ndarray:
    """Feature matrix in the model's input space, projecting raw HOG through
    the model's PCA when the widths call for it."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if d == model.n_features:
        return X
    pca = model.pca
    if pca is not None:
        rest = model.n_features - pca.k
        if rest >= 0 and d == pca.n_features + rest:
            Z = pca_transform(pca, X[:, : pca.n_features]).reshape(X.shape[0], pca.k)
            return np.hstack([Z, X[:, pca.n_features:]])
    raise DimensionMismatch(f"model expects {model.n_features} features, got {d}")


def cmd_predict(a):
    model = load_model(a.model)
    if model.kind == "pls":
        raise ModelConfigMismatch("predict needs a classifier model, not a PLS regressor")
    X, ids = read_features(a.features)
    if not np.all(np.isfinite(X)):
        raise NonFinite("feature matrix contains missing or non-finite values")
    X = model_inputs(model, X)
    proba = predict_proba(model, X) if X.shape[0] else np.zeros((0, len(model.labels)))
    labels = [model.labels[k] for k in np.argmax(proba, axis=1)] if X.shape[0] else []
    keep = [k for k in ids if k != "label"]
    header = keep + ["label"] + [f"p_{lab}" for lab in model.labels]
    rows = [[ids[k][i] for k in keep] + [str(labels[i])] + [format_number(p) for p in proba[i]]
            for i in range(X.shape[0])]
    _write_text(a.out, _csv_text(header, rows))


# --- benchmark ------------------------------------------------------------


def _row_keys(table, path):
    keys = list(zip(table.sessions, table.frame.tolist()))
    if len(set(keys)) != len(keys):
        raise InvalidTable(f"{path}: duplicate (session, frame) rows")
    return keys


def _matched(pred, truth, a):
    """``[(truth_row, pred_row)]`` joined on (session, frame), plus the count of unmatched truths."""
    index = {k: i for i, k in enumerate(_row_keys(pred, a.pred))}
    pairs, missing = [], 0
    for i, k in enumerate(_row_keys(truth, a.truth)):
        if k in index:
            pairs.append((i, index[k]))
        else:
            missing += 1
    return pairs, missing


def benchmark_au(pred, truth, a):
    pairs, missing = _matched(pred, truth, a)
    P, T = select(pred, "aus"), select(truth, "aus")
    per = {}
    for j, name in enumerate(AU_NAMES):
        rows = [(t, p) for t, p in pairs if math.isfinite(T[t, j]) and math.isfinite(P[p, j])]
        if not rows:
            continue
        pb = [bool(P[p, j] >= a.threshold) for _, p in rows]
        tb = [bool(T[t, j] >= 0.5) for t, _ in rows]
        c = confusion(pb, tb, True)
        per[name] = {"f1": f1(c), "precision": precision(c), "recall": recall(c), "support": c.tp + c.fn, "n": len(rows)}
    macro = sum(v["f1"] for v in per.values()) / len(per) if per else math.nan
    return {"task": "au", "threshold": a.threshold, "n_matched": len(pairs), "missing": missing,
            "labels": per, "macro_f1": macro}


def benchmark_emotion(pred, truth, a):
    pairs, missing = _matched(pred, truth, a)
    P, T = select(pred, "emotions"), select(truth, "emotions")
    rows = [(t, p) for t, p in pairs if np.all(np.isfinite(T[t])) and np.all(np.isfinite(P[p]))]
    pl = [EMOTION_NAMES[int(np.argmax(P[p]))] for _, p in rows]
    tl = [EMOTION_NAMES[int(np.argmax(T[t]))] for t, _ in rows]
    scores, macro = per_label_f1(pl, tl, EMOTION_NAMES)
    acc = sum(x == y for x, y in zip(pl, tl)) / len(rows) if rows else math.nan
    return {"task": "emotion", "n_matched": len(pairs), "n_scored": len(rows), "missing": missing,
            "labels": {k: {"f1": v} for k, v in scores.items()}, "macro_f1": macro, "accuracy": acc}


def _image_groups(table):
    if "image" in table.extras:
        return list(table.extras["image"])
    return [f"{s}\x1f{f}" for s, f in zip(table.sessions, table.frame.tolist())]


def benchmark_facebox(pred, truth, a):
    pg_all, tg_all = _image_groups(pred), _image_groups(truth)
    preds, pg = [], []
    for i in range(len(pred)):
        b = pred.row(i).facebox
        if b is not None:
            preds.append(b)
            pg.append(pg_all[i])
    truths, tg, diff = [], [], []
    tdiff = truth.extras.get("difficulty")
    for i in range(len(truth)):
        b = truth.row(i).facebox
        if b is not None:
            truths.append(b)
            tg.append(tg_all[i])
            diff.append(tdiff[i] if tdiff is not None else None)
    ap = {"all": average_precision(preds, truths, a.iou, pg, tg)}
    if tdiff is not None:
        bucket_of = {}
        for g, d in zip(tg, diff):
            bucket_of.setdefault(g, d)
        for bucket in sorted(set(bucket_of.values())):
            images = {g for g, d in bucket_of.items() if d == bucket}
            bp = [(b, g) for b, g in zip(preds, pg) if g in images]
            bt = [(b, g) for b, g in zip(truths, tg) if g in images]
            ap[bucket] = average_precision([b for b, _ in bp], [b for b, _ in bt], a.iou,
                                           [g for _, g in bp], [g for _, g in bt])
    return {"task": "facebox", "iou_threshold": a.iou, "n_predictions": len(preds), "n_truths": len(truths), "ap": ap}


def benchmark_landmarks(pred, truth, a):
    pairs, missing = _matched(pred, truth, a)
    errs, skipped = [], 0
    for t, p in pairs:
        lt, lp = truth.row(t).landmarks, pred.row(p).landmarks
        if lt is None or lp is None or not (np.all(np.isfinite(lt)) and np.all(np.isfinite(lp))):
            skipped += 1
            continue
        errs.append(landmark_nrmse(lp, lt))
    mean = float(np.mean(errs)) if errs else math.nan
    return {"task": "landmarks", "n": len(errs), "skipped": skipped, "missing": missing,
            "nrmse": mean, "nrmse_percent": mean * 100.0}


BENCHMARKS = {"au": benchmark_au, "emotion": benchmark_emotion, "facebox": benchmark_facebox,
              "landmarks": benchmark_landmarks}


def cmd_benchmark(a):
    pred, truth = read_fex_csv(a.pred), read_fex_csv(a.truth)
    _write_json(a.out, BENCHMARKS[a.task](pred, truth, a))


# --- preprocess -----------------------------------------------------------


def _session_rate(times):
    d = np.diff(times[np.isfinite(times)])
    d = d[d > 0]
    if d.size == 0:
        raise TooFewSamples("cannot infer a sampling rate from time_s")
    return 1.0 / float(np.median(d))


def band_features(table: FexTable, spec: dict):
    """Per-session crossing counts, columns ordered column-major then band then threshold."""
    try:
        bank = [(float(lo), float(hi)) for lo, hi in spec["bands"]]
        thresholds = [float(t) for t in spec.get("thresholds", [0.0])]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidTable(f"bands file needs 'bands': [[low, high], ...]: {exc}") from exc
    columns = spec.get("columns", list(AU_NAMES))
    for c in columns:
        if c not in VALUE_COLUMNS:
            raise MissingColumn(c)
    sessions = table.session_labels()
    rows = []
    for s in sessions:
        idx = [i for i, v in enumerate(table.sessions) if v == s]
        block = table.take(idx)
        rate = float(spec["rate"]) if "rate" in spec else _session_rate(block.column("time_s"))
        feats = []
        for c in columns:
            x = block.column(c)
            if not np.all(np.isfinite(x)):
                raise NonFinite(f"session {s!r} column {c} has missing values")
            feats.append(bag_of_temporal_filters(x, rate, bank, thresholds).values)
        rows.append(np.concatenate(feats))
    return np.array(rows), sessions


def cmd_preprocess(a):
    table = read_fex_csv(a.fex)
    if a.baseline == "median":
        table = baseline_normalize(table, "median")
    elif a.baseline != "none":
        table = baseline_normalize(table, read_fex_csv(a.baseline))
    if a.bands:
        if a.summary != "none":
            raise UsageError("--bands produces per-session features; use --summary none")
        X, sessions = band_features(table, _read_json(a.bands))
        write_features(a.out, X, {"session": sessions})
        return
    if a.summary != "none":
        table = summarize_sessions(table, a.summary)
    write_fex_csv(table, a.out)


# --- analyze --------------------------------------------------------------


def _session_means(table, features):
    summary = summarize_sessions(table, "mean")
    M = np.column_stack([summary.column(f) for f in features]) if features else np.zeros((len(summary), 0))
    return list(summary.sessions), M


def analyze_ttest(table, a, features):
    if not a.design:
        raise UsageError("analyze ttest needs --design SESSION,CONDITION csv")
    cond = read_mapping(a.design, "session", a.condition_column)
    sessions, M = _session_means(table, features)
    missing = [s for s in sessions if s not in cond]
    if missing:
        raise MissingColumn(f"condition for session {missing[0]!r}")
    y = [cond[s] for s in sessions]
    labels = sorted(set(y))
    if len(labels) != 2:
        raise TooFewSamples(f"ttest needs exactly two conditions, got {labels}")
    positive = a.positive or labels[1]
    if positive not in labels:
        raise UsageError(f"--positive {positive!r} is not a condition")
    negative = labels[0] if positive == labels[1] else labels[1]
    is_pos = np.array([v == positive for v in y])
    results = []
    for j, f in enumerate(features):
        entry = {"test": "ttest", "feature": f}
        try:
            r = ttest_ind(M[is_pos, j], M[~is_pos, j], equal_var=not a.welch)
            entry.update(t=r.t, df=r.df, p=r.p, dropped=r.dropped)
        except FexError as exc:
            entry.update(t=None, df=None, p=None, note=f"{exc.code}: {exc}")
        results.append(entry)
    return {"test": "ttest", "positive": positive, "negative": negative, "welch": a.welch,
            "n_sessions": len(sessions), "results": results}


def analyze_regress(table, a, features):
    if not a.design:
        raise UsageError("analyze regress needs --design SESSION,REGRESSOR... csv")
    header, body = read_csv(a.design)
    if "session" not in header:
        raise MissingColumn("session")
    names = [h for h in header if h != "session"]
    design = {}
    for i, r in enumerate(body):
        rec = dict(zip(header, r))
        design[rec["session"].strip()] = [_float(rec[n], i, n) for n in names]
    sessions, M = _session_means(table, features)
    missing = [s for s in sessions if s not in design]
    if missing:
        raise MissingColumn(f"design row for session {missing[0]!r}")
    X = np.array([design[s] for s in sessions], dtype=np.float64).reshape(len(sessions), len(names))
    if not a.no_intercept:
        X = np.hstack([X, np.ones((len(sessions), 1))])
        names = names + ["intercept"]
    if not np.all(np.isfinite(X)):
        raise NonFinite("design matrix has missing values")
    ok = [j for j in range(M.shape[1]) if np.all(np.isfinite(M[:, j]))]
    results = []
    fit = regress(X, M[:, ok]) if ok else None
    for j, f in enumerate(features):
        if j not in ok:
            results.append({"feature": f, "note": "missing values in session means"})
            continue
        c = ok.index(j)
        results.append({
            "feature": f,
            "beta": dict(zip(names, fit.beta[:, c])),
            "se": dict(zip(names, fit.se[:, c])),
            "t": dict(zip(names, fit.t[:, c])),
            "p": dict(zip(names, fit.p[:, c])),
            "degenerate": bool(fit.degenerate[c]),
        })
    return {"test": "regress", "regressors": names, "n_sessions": len(sessions),
            "df": fit.df if fit is not None else None, "results": results}


def analyze_isc(table, a, features):
    sessions = table.session_labels()
    mats = []
    for s in sessions:
        idx = [i for i, v in enumerate(table.sessions) if v == s]
        mats.append(np.column_stack([table.values[idx, VALUE_COLUMNS.index(f)] for f in features]))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConstantSeriesWarning)
        m = isc(mats, a.axis)
    for w in caught:
        _progress(f"warning: {w.message}")
    constant = [sessions[i] for i in range(len(sessions)) if math.isnan(m[i, i])]
    return {"test": "isc", "axis": a.axis, "features": features, "sessions": sessions,
            "constant_sessions": constant, "matrix": m}


ANALYSES = {"ttest": analyze_ttest, "regress": analyze_regress, "isc": analyze_isc}


def cmd_analyze(a):
    table = read_fex_csv(a.fex)
    features = _parse_features_arg(a.features)
    _write_json(a.out, ANALYSES[a.test](table, a, features))


# --- viz ----------------------------------------------------------------


def cmd_viz_aus(a):
    from .render import au_to_landmarks, neutral_face, render_face

    viz = load_model(a.vizmodel)
    lm = au_to_landmarks(viz, _parse_aus(a.au))
    neutral = neutral_face(viz)
    if a.overlay == "vectors":
        svg = render_face(lm, a.size, vectors_from=neutral)
    elif a.overlay == "heat":
        svg = render_face(lm, a.size, heat=np.hypot(*(lm - neutral).T))
    else:
        svg = render_face(lm, a.size)
    _write_text(a.out, svg)


def cmd_viz_detections(a):
    from .render import plot_detections

    table = read_fex_csv(a.fex)
    hits = [i for i in range(len(table)) if table.frame[i] == a.frame
            and (a.session is None or table.sessions[i] == a.session)]
    if not hits:
        raise InvalidTable(f"no row with frame {a.frame}")
    if len(hits) > 1:
        raise UsageError(f"frame {a.frame} occurs in several sessions; pass --session")
    image = read_image(a.image) if a.image else None
    _write_text(a.out, plot_detections(table.row(hits[0]), image))


def cmd_viz_fit(a):
    from .render import fit_visualization_model
    from .synth import viz_training_data

    if a.fex:
        table = read_fex_csv(a.fex)
        A, L = select(table, "aus"), select(table, "landmarks")
        ok = np.all(np.isfinite(A), axis=1) & np.all(np.isfinite(L), axis=1)
        aus = A[ok]
        lms = [np.column_stack([r[:68], r[68:]]) for r in L[ok]]
        source = {"fex": os.path.basename(a.fex), "rows": int(ok.sum())}
    else:
        if a.seed is None:
            raise UsageError("synthetic fitting needs --seed")
        aus, lms = viz_training_data(a.seed, a.samples)
        source = {"synthetic_seed": a.seed, "rows": a.samples}
    model = fit_visualization_model(aus, lms, a.components)
    model.meta["source"] = source
    save_model(model, a.out)


def cmd_viz_coefficients(a):
    from .render import coefficient_faces

    faces = coefficient_faces(load_model(a.model), load_model(a.vizmodel), a.scale)
    _write_text(a.out, faces.chart_svg)
    if a.out_positive:
        _write_text(a.out_positive, faces.positive_svg)
    if a.out_negative:
        _write_text(a.out_negative, faces.negative_svg)


# --- replicate / synth ----------------------------------------------------


def cmd_replicate(a):
    table = read_fex_csv(a.fex)
    cond = read_mapping(a.conditions, "session", a.condition_column)
    rep = replicate_goodnews(table, cond, positive=a.positive, l2=a.l2, jobs=a.jobs)
    report = dict(rep.report, seed=a.seed)
    _write_json(a.out, report)
    if a.model_out:
        save_model(rep.classifier, a.model_out)


def cmd_synth_goodnews(a):
    from .synth import goodnews_table

    table, cond = goodnews_table(a.seed, a.clips, a.frames, null=a.null)
    write_fex_csv(table, a.out)
    if a.conditions_out:
        _write_text(a.conditions_out, _csv_text(["session", "condition"], sorted(cond.items())))


def cmd_synth_faces(a):
    from .synth import au_image_dataset, landmark_table

    images, lms, labels = au_image_dataset(a.seed, a.n, a.target, a.size)
    try:
        os.makedirs(a.images_out, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {a.images_out}: {exc}") from exc
    names = [f"face{i:04d}.png" for i in range(a.n)]
    for name, img in zip(names, images):
        write_image(os.path.join(a.images_out, name), img)
    base = landmark_table(lms)
    write_fex_csv(FexTable(base.frame, base.values, base.sessions, {"image": names}), a.landmarks_out)
    if a.labels_out:
        _write_text(a.labels_out, _csv_text(["frame", "label"], [[i, y] for i, y in enumerate(labels)]))


# --- parser -----------------------------------------------------------------


def _add_extraction_flags(p):
    p.add_argument("--crop", type=int, default=112, help="aligned crop size in pixels (default 112)")
    p.add_argument("--hog", default="8,8,2", help="ORIENTATIONS,CELL,BLOCK (default 8,8,2)")
    p.add_argument("--no-landmarks", action="store_true", help="do not append the aligned landmarks")
    p.add_argument("--pca-retain", type=float, default=0.95, help="variance fraction kept by --pca fit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fexkit", description="Facial-expression feature, model and analysis toolkit.",
                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"fexkit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_, allow_abbrev=False)
        p.set_defaults(func=func)
        return p

    p = command("extract", cmd_extract, "aligned, hull-masked HOG features from images and landmarks")
    p.add_argument("--images", required=True, help="directory of PNG/PGM frames")
    p.add_argument("--landmarks", required=True, help="Fex CSV with landmark columns (optional 'image' column)")
    _add_extraction_flags(p)
    p.add_argument("--pca", default="none", help="PCA.json, 'none' or 'fit'")
    p.add_argument("--pca-out", help="where --pca fit writes the fitted PCA")
    p.add_argument("--skip-frames", type=int, default=0, help="process every (N+1)-th frame per session")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = command("train", cmd_train, "grid-searched classifier on a feature matrix")
    p.add_argument("--task", choices=("au", "emotion"), required=True)
    p.add_argument("--model", choices=("logistic", "svm", "forest"), required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", help="CSV holding the --target column (default: column in the features file)")
    p.add_argument("--target", default="label", help="label column name (default 'label')")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--grid", help="JSON object: parameter -> list of values")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--pca", help="PCA document to attach to the model")
    _add_extraction_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = command("predict", cmd_predict, "apply a trained classifier to a feature matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)

    p = command("benchmark", cmd_benchmark, "score predictions against ground truth")
    p.add_argument("--task", choices=tuple(BENCHMARKS), required=True)
    p.add_argument("--pred", required=True, help="Fex CSV of predictions")
    p.add_argument("--truth", required=True, help="Fex CSV of ground truth")
    p.add_argument("--iou", type=float, default=0.5, help="facebox IoU threshold")
    p.add_argument("--threshold", type=float, default=0.5, help="AU probability threshold")
    p.add_argument("--out", required=True)

    p = command("preprocess", cmd_preprocess, "baseline correction, session summaries or band features")
    p.add_argument("--fex", required=True)
    p.add_argument("--baseline", default="none", help="'median', 'none' or a baseline Fex CSV")
    p.add_argument("--summary", choices=("mean", "max", "min", "none"), default="none")
    p.add_argument("--bands", help="JSON with 'bands', optional 'thresholds', 'columns', 'rate'")
    p.add_argument("--out", required=True)

    p = command("analyze", cmd_analyze, "session-level t-tests, regression or intersubject correlation")
    p.add_argument("test", choices=tuple(ANALYSES))
    p.add_argument("--fex", required=True)
    p.add_argument("--design", help="CSV keyed by 'session'")
    p.add_argument("--condition-column", default="condition")
    p.add_argument("--positive", help="condition tested as the first group")
    p.add_argument("--welch", action="store_true", help="unequal-variance t-test")
    p.add_argument("--no-intercept", action="store_true", help="do not add an intercept to the design")
    p.add_argument("--axis", choices=("time", "features"), default="time")
    p.add_argument("--features", help="comma-separated columns (default: all AUs)")
    p.add_argument("--out", required=True)

    viz = command("viz", None, "SVG figures")
    vsub = viz.add_subparsers(dest="viz_command", metavar="FIGURE", required=True)

    def figure(name, func, help_):
        q = vsub.add_parser(name, help=help_, description=help_, allow_abbrev=False)
        q.set_defaults(func=func)
        return q

    q = figure("aus", cmd_viz_aus, "face generated from AU activations")
    q.add_argument("--au", required=True, help='e.g. "AU12=1.0,AU17=0.5"')
    q.add_argument("--vizmodel", required=True)
    q.add_argument("--overlay", choices=("vectors", "heat"))
    q.add_argument("--size", type=int, default=400)
    q.add_argument("--out", required=True)

    q = figure("detections", cmd_viz_detections, "face box, landmarks and bar charts for one frame")
    q.add_argument("--fex", required=True)
    q.add_argument("--frame", type=int, required=True)
    q.add_argument("--session")
    q.add_argument("--image")
    q.add_argument("--out", required=True)

    q = figure("fit", cmd_viz_fit, "fit the AU-to-landmark PLS model")
    q.add_argument("--fex", help="Fex CSV with AU and landmark columns (default: synthetic data)")
    q.add_argument("--seed", type=int)
    q.add_argument("--samples", type=int, default=2000)
    q.add_argument("--components", type=int, default=20)
    q.add_argument("--out", required=True)

    q = figure("coefficients", cmd_viz_coefficients, "coefficient bar chart and faces of a linear classifier")
    q.add_argument("--model", required=True)
    q.add_argument("--vizmodel", required=True)
    q.add_argument("--scale", type=float, default=1.0)
    q.add_argument("--out", required=True, help="coefficient chart SVG")
    q.add_argument("--out-positive")
    q.add_argument("--out-negative")

    p = command("replicate", cmd_replicate, "two-condition clip analysis: t-tests and leave-one-clip-out")
    p.add_argument("--fex", required=True)
    p.add_argument("--conditions", required=True, help="CSV with session and condition columns")
    p.add_argument("--condition-column", default="condition")
    p.add_argument("--positive")
    p.add_argument("--l2", type=float, default=1e-2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--model-out", help="also save the all-clip classifier")
    p.add_argument("--out", required=True)

    syn = command("synth", None, "write synthetic fixture data")
    ssub = syn.add_subparsers(dest="synth_command", metavar="DATASET", required=True)
    q = ssub.add_parser("goodnews", help="two-condition clip table", allow_abbrev=False)
    q.set_defaults(func=cmd_synth_goodnews)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--clips", type=int, default=10, help="clips per condition")
    q.add_argument("--frames", type=int, default=30)
    q.add_argument("--null", action="store_true", help="draw both conditions from one distribution")
    q.add_argument("--out", required=True)
    q.add_argument("--conditions-out")
    q = ssub.add_parser("faces", help="rendered sketch faces with AU labels", allow_abbrev=False)
    q.set_defaults(func=cmd_synth_faces)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--n", type=int, default=40)
    q.add_argument("--target", default="AU12", choices=AU_NAMES)
    q.add_argument("--size", type=int, default=128)
    q.add_argument("--images-out", required=True)
    q.add_argument("--landmarks-out", required=True)
    q.add_argument("--labels-out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        args.func(args)
        return 0
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else 0
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except FexError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"error: InvalidValue: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
