"""Time-series preprocessing of Fex tables: baselines, session summaries and
band-limited threshold-crossing features."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from scipy import signal as sps

from ..errors import BadBand, EmptySession, MissingColumn, TooFewSamples
from ..fexdata import AU_NAMES, EMOTION_NAMES, VALUE_COLUMNS, FexTable
from .hog import FeatureVector

EXPRESSION_COLUMNS = AU_NAMES + EMOTION_NAMES
_EXPR_IDX = np.array([VALUE_COLUMNS.index(c) for c in EXPRESSION_COLUMNS])
FILTER_ORDER = 4
MIN_SAMPLES = 8


def lower_median(x) -> float:
    """Median ignoring NaN; even-length samples take the lower middle value."""
    x = np.asarray(x, dtype=np.float64)
    x = np.sort(x[~np.isnan(x)])
    if x.size == 0:
        return np.nan
    return float(x[(x.size - 1) // 2])


def _session_index(table):
    groups: dict[str, list[int]] = {}
    for i, s in enumerate(table.sessions):
        groups.setdefault(s, []).append(i)
    return groups


def _baseline_vector(baseline, session) -> np.ndarray:
    if isinstance(baseline, FexTable):
        if len(baseline) == 0:
            raise EmptySession("baseline table has no rows")
        if len(baseline) == 1:
            row = 0
        else:
            try:
                row = baseline.sessions.index(session)
            except ValueError:
                raise EmptySession(f"no baseline row for session {session!r}") from None
        return baseline.values[row, _EXPR_IDX]
    if isinstance(baseline, Mapping):
        return np.array([baseline.get(c, 0.0) for c in EXPRESSION_COLUMNS], dtype=np.float64)
    vec = np.asarray(baseline, dtype=np.float64)
    if vec.shape != (len(EXPRESSION_COLUMNS),):
        raise ValueError(f"baseline vector must have {len(EXPRESSION_COLUMNS)} entries (AUs then emotions)")
    return vec


def baseline_normalize(table: FexTable, mode="median") -> FexTable:
    """Subtract a per-session baseline from the AU and emotion columns.

    ``mode="median"`` subtracts each session's column medians (NaN ignored,
    lower median for even counts). Otherwise ``mode`` is the baseline itself:
    a one-row FexTable (applied to every session), a FexTable with one row per
    session label, a name->value mapping (missing names count as 0) or a
    vector of the 27 AU+emotion values. NaNs propagate through subtraction.
    """
    if len(table) == 0:
        raise EmptySession("table has no rows")
    values = np.array(table.values)
    for session, idx in _session_index(table).items():
        block = values[np.ix_(idx, _EXPR_IDX)]
        if isinstance(mode, str):
            if mode != "median":
                raise ValueError(f"unknown baseline mode {mode!r}")
            base = np.array([lower_median(block[:, j]) for j in range(block.shape[1])])
        else:
            base = _baseline_vector(mode, session)
        values[np.ix_(idx, _EXPR_IDX)] = block - base
    return table.with_values(values)


def _nan_stat(block, stat):
    if stat == "max":
        return np.fmax.reduce(block, axis=0)
    if stat == "min":
        return np.fmin.reduce(block, axis=0)
    if stat == "mean":
        # sorting first makes the sum independent of row order
        s = np.sort(block, axis=0)
        count = np.sum(~np.isnan(s), axis=0)
        total = np.nansum(s, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(count > 0, total / np.maximum(count, 1), np.nan)
    raise ValueError(f"unknown statistic {stat!r}")


def summarize_sessions(table: FexTable, stat="mean") -> FexTable:
    """One row per session holding the NaN-skipping ``mean``/``max``/``min``
    of every numeric column. ``frame`` is 0 and ``time_s`` the session's
    earliest time; extra columns keep their first value."""
    groups = _session_index(table)
    frames, rows, labels = [], [], []
    extras = {k: [] for k in table.extras}
    for session, idx in groups.items():
        block = table.values[idx]
        summary = _nan_stat(block, stat)
        times = block[:, 0]
        summary[0] = np.nanmin(times) if np.any(~np.isnan(times)) else np.nan
        frames.append(0)
        rows.append(summary)
        labels.append(session)
        for k in extras:
            extras[k].append(table.extras[k][idx[0]])
    values = np.array(rows).reshape(len(rows), len(VALUE_COLUMNS))
    return FexTable(np.array(frames, dtype=np.int64), values, labels, extras)


def _check_band(low, high, rate):
    if not (0.0 < low < high <= rate / 2.0):
        raise BadBand(f"band ({low}, {high}) Hz must satisfy 0 < low < high <= {rate / 2.0}")


def band_filter(x, rate, low, high) -> np.ndarray:
    """Zero-phase 4th-order Butterworth band-pass (high-pass when ``high`` is Nyquist).

    The squared magnitude response is applied circularly in the frequency
    domain, so a circular shift of the input shifts the output identically.
    """
    _check_band(low, high, rate)
    if high >= rate / 2.0:
        sos = sps.butter(FILTER_ORDER, low, btype="highpass", fs=rate, output="sos")
    else:
        sos = sps.butter(FILTER_ORDER // 2, [low, high], btype="bandpass", fs=rate, output="sos")
    x = np.asarray(x, dtype=np.float64)
    freqs = np.fft.rfftfreq(x.size, d=1.0 / rate)
    _, h = sps.sosfreqz(sos, worN=freqs, fs=rate)
    return np.fft.irfft(np.fft.rfft(x) * np.abs(h) ** 2, n=x.size)


def upward_crossings(x, threshold) -> int:
    """Count samples where ``x`` rises from below ``threshold`` to at or above it."""
    x = np.asarray(x)
    return int(np.count_nonzero((x[:-1] < threshold) & (x[1:] >= threshold)))


def wavelet_band_features(x, rate, bands: Sequence[tuple[float, float]], threshold) -> list[tuple[float, int]]:
    """Per band: (mean squared band-passed amplitude, upward crossings of ``threshold``)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples")
    for low, high in bands:
        _check_band(low, high, rate)
    out = []
    for low, high in bands:
        f = band_filter(x, rate, low, high)
        out.append((float(np.mean(f * f)), upward_crossings(f, threshold)))
    return out


def bag_of_temporal_filters(x, rate, bank: Sequence[tuple[float, float]], thresholds: Sequence[float]) -> FeatureVector:
    """Crossing counts over the bank x thresholds grid (band-major)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples")
    for low, high in bank:
        _check_band(low, high, rate)
    counts = []
    for low, high in bank:
        f = band_filter(x, rate, low, high)
        counts.extend(upward_crossings(f, t) for t in thresholds)
    return FeatureVector(np.array(counts, dtype=np.float64), "temporal")


def column_series(table: FexTable, name) -> np.ndarray:
    if name not in VALUE_COLUMNS:
        raise MissingColumn(name)
    return table.column(name)
