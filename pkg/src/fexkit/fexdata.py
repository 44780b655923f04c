"""Fex time-series table: schema, CSV round-trip, column groups, sessions.

A :class:`FexTable` holds one row per video frame with the face box, the 68
landmarks, 20 action-unit activations and 7 emotion scores. Missing detections
are NaN (empty cells on disk). Tables are immutable; every operation returns a
new table.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DuplicateColumn, InvalidTable, IoFailure, MalformedNumber, MissingColumn
from .geometry import FaceBox

AU_NAMES = (
    "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU09", "AU10", "AU12", "AU14",
    "AU15", "AU17", "AU18", "AU20", "AU23", "AU24", "AU25", "AU26", "AU28", "AU43",
)
EMOTION_NAMES = ("anger", "disgust", "fear", "happiness", "sadness", "surprise", "neutral")
FACEBOX_COLUMNS = ("FaceRectX", "FaceRectY", "FaceRectWidth", "FaceRectHeight", "FaceScore")
LANDMARK_COLUMNS = tuple(f"x_{i}" for i in range(68)) + tuple(f"y_{i}" for i in range(68))

GROUPS = {
    "facebox": FACEBOX_COLUMNS,
    "landmarks": LANDMARK_COLUMNS,
    "aus": AU_NAMES,
    "emotions": EMOTION_NAMES,
}

# float-valued columns, in schema order (frame and session are stored apart)
VALUE_COLUMNS = ("time_s",) + FACEBOX_COLUMNS + LANDMARK_COLUMNS + AU_NAMES + EMOTION_NAMES
SCHEMA = ("frame", "time_s", "session") + VALUE_COLUMNS[1:]

_VALUE_INDEX = {name: i for i, name in enumerate(VALUE_COLUMNS)}
_LM_SLICE = slice(_VALUE_INDEX["x_0"], _VALUE_INDEX["y_67"] + 1)


def _group_slice(group):
    cols = GROUPS[group]
    return slice(_VALUE_INDEX[cols[0]], _VALUE_INDEX[cols[-1]] + 1)


@dataclass(frozen=True)
class FexRow:
    """One frame. Groups whose cells are all missing are ``None``."""

    frame: int
    time_s: float
    session: str
    facebox: FaceBox | None
    landmarks: np.ndarray | None  # (68, 2)
    aus: np.ndarray | None  # (20,), AU_NAMES order
    emotions: np.ndarray | None  # (7,), EMOTION_NAMES order

    def is_empty(self):
        return self.facebox is None and self.landmarks is None and self.aus is None and self.emotions is None


class FexTable:
    """Immutable per-frame facial-expression table.

    Parameters
    ----------
    frame : array of int, shape (n,)
    values : array of float, shape (n, len(VALUE_COLUMNS))
        ``time_s`` followed by the facebox, landmark, AU and emotion columns.
    sessions : sequence of str, optional
        Per-row session label, defaults to ``""``.
    extras : mapping of column name to per-row strings, optional
        Unknown columns carried verbatim through CSV round-trips.
    """

    __slots__ = ("frame", "values", "sessions", "extras")

    def __init__(self, frame, values, sessions=None, extras=None):
        frame = np.asarray(frame)
        values = np.array(values, dtype=np.float64, copy=True)
        n = frame.shape[0] if frame.ndim else 0
        if values.size == 0 and n == 0:
            values = values.reshape(0, len(VALUE_COLUMNS))
        if values.shape != (n, len(VALUE_COLUMNS)):
            raise InvalidTable(f"values must have shape ({n}, {len(VALUE_COLUMNS)}), got {values.shape}")
        if n and not np.all(np.equal(np.mod(frame, 1), 0)):
            raise InvalidTable("frame indices must be integers")
        frame = frame.astype(np.int64)
        sessions = tuple("" if s is None else str(s) for s in (sessions if sessions is not None else [""] * n))
        if len(sessions) != n:
            raise InvalidTable("sessions length must equal row count")
        extras = {str(k): tuple(str(x) for x in v) for k, v in (extras or {}).items()}
        for name, col in extras.items():
            if name in SCHEMA:
                raise InvalidTable(f"extra column {name!r} collides with schema")
            if len(col) != n:
                raise InvalidTable(f"extra column {name!r} has wrong length")
        _check_rows(frame, values, sessions)
        frame.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sessions", sessions)
        object.__setattr__(self, "extras", extras)

    def __setattr__(self, key, value):
        raise AttributeError("FexTable is immutable")

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, len(VALUE_COLUMNS))))

    @classmethod
    def from_columns(cls, n, columns: Mapping[str, Sequence] | None = None, frame=None, sessions=None, extras=None):
        """Build a table of ``n`` rows; unspecified value columns are NaN.

        ``frame`` defaults to ``0..n-1`` and ``time_s`` to the frame index.
        """
        values = np.full((n, len(VALUE_COLUMNS)), np.nan)
        frame = np.arange(n) if frame is None else np.asarray(frame)
        values[:, 0] = frame
        for name, col in (columns or {}).items():
            if name not in _VALUE_INDEX:
                raise MissingColumn(name)
            values[:, _VALUE_INDEX[name]] = np.asarray(col, dtype=np.float64)
        return cls(frame, values, sessions, extras)

    def __len__(self):
        return self.frame.shape[0]

    @property
    def columns(self):
        return SCHEMA + tuple(self.extras)

    def column(self, name):
        if name == "frame":
            return self.frame
        if name == "session":
            return np.array(self.sessions, dtype=object)
        if name in self.extras:
            return np.array(self.extras[name], dtype=object)
        try:
            return self.values[:, _VALUE_INDEX[name]]
        except KeyError:
            raise MissingColumn(name) from None

    def session_labels(self):
        """Distinct session labels in first-occurrence order."""
        return list(dict.fromkeys(self.sessions))

    def row(self, i) -> FexRow:
        v = self.values[i]
        box = v[_group_slice("facebox")]
        if np.all(np.isfinite(box[:4])):
            facebox = FaceBox(box[0], box[1], box[2], box[3], 1.0 if math.isnan(box[4]) else box[4])
        else:
            facebox = None
        lm = v[_LM_SLICE]
        landmarks = None if np.all(np.isnan(lm)) else np.column_stack([lm[:68], lm[68:]])
        aus = v[_group_slice("aus")]
        emo = v[_group_slice("emotions")]
        return FexRow(
            frame=int(self.frame[i]),
            time_s=float(v[0]),
            session=self.sessions[i],
            facebox=facebox,
            landmarks=landmarks,
            aus=None if np.all(np.isnan(aus)) else aus.copy(),
            emotions=None if np.all(np.isnan(emo)) else emo.copy(),
        )

    def take(self, indices) -> "FexTable":
        idx = np.asarray(indices, dtype=np.int64)
        return FexTable(
            self.frame[idx],
            self.values[idx],
            [self.sessions[i] for i in idx],
            {k: [v[i] for i in idx] for k, v in self.extras.items()},
        )

    def with_values(self, values) -> "FexTable":
        return FexTable(self.frame, values, self.sessions, self.extras)

    def with_group(self, group, matrix) -> "FexTable":
        values = self.values.copy()
        values[:, _group_slice(group)] = matrix
        return self.with_values(values)

    def check_ranges(self):
        """Raise :class:`InvalidTable` if any AU/emotion value lies outside [0, 1]."""
        for group in ("aus", "emotions"):
            m = self.values[:, _group_slice(group)]
            bad = np.isfinite(m) & ((m < 0.0) | (m > 1.0)) | np.isinf(m)
            if bad.any():
                r, c = np.argwhere(bad)[0]
                raise InvalidTable(f"{GROUPS[group][c]} out of [0, 1] at row {r}: {m[r, c]!r}")

    def __eq__(self, other):
        if not isinstance(other, FexTable):
            return NotImplemented
        return (
            np.array_equal(self.frame, other.frame)
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values, equal_nan=True)
            and self.sessions == other.sessions
            and self.extras == other.extras
        )

    def __repr__(self):
        return f"FexTable(rows={len(self)}, sessions={len(self.session_labels())}, extras={list(self.extras)})"


def _check_rows(frame, values, sessions):
    if frame.size and frame.min() < 0:
        raise InvalidTable("frame indices must be non-negative")
    t = values[:, 0]
    if np.any(t < 0) or np.any(np.isinf(t)):
        raise InvalidTable("time_s must be a non-negative number or missing")
    last = {}
    for i, (f, s) in enumerate(zip(frame, sessions)):
        if s in last and f <= last[s]:
            raise InvalidTable(f"frame {f} at row {i} not strictly increasing within session {s!r}")
        last[s] = f
    lm_present = ~np.isnan(values[:, _LM_SLICE])
    partial = lm_present.any(axis=1) & ~lm_present.all(axis=1)
    if partial.any():
        raise InvalidTable(f"row {int(np.argmax(partial))} has a partial landmark set")


def select(table: FexTable, group: str) -> np.ndarray:
    """Return the ``group`` columns as an ``(n, k)`` float matrix in schema order.

    ``group`` is one of ``facebox``, ``landmarks`` (x_0..x_67 then y_0..y_67),
    ``aus`` (AU-number order) or ``emotions``. NaNs are preserved.
    """
    if group not in GROUPS:
        raise ValueError(f"unknown group {group!r}; expected one of {sorted(GROUPS)}")
    return np.array(table.values[:, _group_slice(group)])


def group_by_session(table: FexTable) -> list[tuple[str, FexTable]]:
    """Partition rows by session label, in first-occurrence order."""
    members: dict[str, list[int]] = {}
    for i, s in enumerate(table.sessions):
        members.setdefault(s, []).append(i)
    return [(s, table.take(idx)) for s, idx in members.items()]


def concat(tables: Iterable[FexTable]) -> FexTable:
    tables = list(tables)
    if not tables:
        return FexTable.empty()
    keys = list(tables[0].extras)
    if any(list(t.extras) != keys for t in tables):
        raise InvalidTable("cannot concatenate tables with different extra columns")
    return FexTable(
        np.concatenate([t.frame for t in tables]),
        np.concatenate([t.values for t in tables]),
        [s for t in tables for s in t.sessions],
        {k: [x for t in tables for x in t.extras[k]] for k in keys},
    )


# --- CSV ------------------------------------------------------------------


def format_number(v) -> str:
    """Shortest text that round-trips ``float(v)`` exactly; NaN is the empty string."""
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(v)


def _parse_float(text, row, col):
    s = text.strip()
    if s == "":
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise MalformedNumber(row, col, text) from None


def _parse_frame(text, row):
    s = text.strip()
    try:
        return int(s)
    except ValueError:
        pass
    try:
        v = float(s)
    except ValueError:
        raise MalformedNumber(row, "frame", text) from None
    if not v.is_integer():
        raise MalformedNumber(row, "frame", text)
    return int(v)


def parse_fex_csv(text: str) -> FexTable:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn(SCHEMA[0]) from None
    seen = set()
    for name in header:
        if name in seen:
            raise DuplicateColumn(name)
        seen.add(name)
    for name in SCHEMA:
        if name not in seen:
            raise MissingColumn(name)
    pos = {name: i for i, name in enumerate(header)}
    extra_names = [h for h in header if h not in _SCHEMA_SET]
    value_pos = [pos[c] for c in VALUE_COLUMNS]

    frames, sessions, rows = [], [], []
    extras = {k: [] for k in extra_names}
    r = 0
    for fields in reader:
        if not fields:
            continue
        if len(fields) != len(header):
            raise InvalidTable(f"data row {r} has {len(fields)} fields, header has {len(header)}")
        frames.append(_parse_frame(fields[pos["frame"]], r))
        sessions.append(fields[pos["session"]])
        rows.append([_parse_float(fields[p], r, c) for p, c in zip(value_pos, VALUE_COLUMNS)])
        for k in extra_names:
            extras[k].append(fields[pos[k]])
        r += 1
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(VALUE_COLUMNS))
    return FexTable(np.array(frames, dtype=np.int64), values, sessions, extras)


_SCHEMA_SET = frozenset(SCHEMA)


def read_fex_csv(path) -> FexTable:
    """Read a Fex CSV. Column order is free; empty cells become NaN."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_fex_csv(text)


def dump_fex_csv(table: FexTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    extra_names = list(table.extras)
    writer.writerow(list(SCHEMA) + extra_names)
    for i in range(len(table)):
        v = table.values[i]
        writer.writerow(
            [str(int(table.frame[i])), format_number(v[0]), table.sessions[i]]
            + [format_number(x) for x in v[1:]]
            + [table.extras[k][i] for k in extra_names]
        )
    return buf.getvalue()


def write_fex_csv(table: FexTable, path) -> None:
    """Write ``table`` deterministically: schema columns first, then extras."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(dump_fex_csv(table))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
