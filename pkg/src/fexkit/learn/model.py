"""TrainedModel container and its versioned JSON format.

Layout::

    {"version": 1, "kind": "logistic", "labels": [...], "pca": {...} | null,
     "hog": {...} | null, "params": {...}, "meta": {...}}

Floats are written as decimal strings (``repr``) so they round-trip exactly;
arrays as ``{"dtype": ..., "shape": [...], "data": [...]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import IoFailure, ModelFormatError
from ..features.pca import PcaModel

FORMAT_VERSION = 1
KINDS = ("logistic", "svm", "forest", "pls")


@dataclass
class TrainedModel:
    kind: str
    labels: list
    params: dict[str, Any]
    pca: PcaModel | None = None
    hog: dict | None = None
    meta: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelFormatError(f"unknown model kind {self.kind!r}")

    @property
    def n_features(self) -> int:
        """Input dimensionality expected by :func:`predict_proba`."""
        return int(self.params["n_features"])


def _encode(v):
    if isinstance(v, np.ndarray):
        if v.dtype.kind in "iu":
            data = [int(x) for x in v.ravel()]
            dtype = "int64"
        elif v.dtype.kind == "b":
            data = [bool(x) for x in v.ravel()]
            dtype = "bool"
        else:
            data = [repr(float(x)) for x in v.ravel()]
            dtype = "float64"
        return {"dtype": dtype, "shape": list(v.shape), "data": data}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, dict):
        return {str(k): _encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if v is None or isinstance(v, str):
        return v
    raise ModelFormatError(f"cannot serialise {type(v).__name__}")


def _decode(v):
    if isinstance(v, dict):
        if set(v) == {"dtype", "shape", "data"}:
            dtype = v["dtype"]
            if dtype == "float64":
                arr = np.array([float(x) for x in v["data"]], dtype=np.float64)
            elif dtype == "int64":
                arr = np.array(v["data"], dtype=np.int64)
            elif dtype == "bool":
                arr = np.array(v["data"], dtype=bool)
            else:
                raise ModelFormatError(f"unknown array dtype {dtype!r}")
            return arr.reshape(v["shape"])
        return {k: _decode(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode(x) for x in v]
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    return v


def _label_json(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.str_,)):
        return str(x)
    return x


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "version": model.version,
        "kind": model.kind,
        "labels": [_label_json(x) for x in model.labels],
        "pca": None if model.pca is None else _encode(model.pca.to_dict()),
        "hog": None if model.hog is None else _encode(model.hog),
        "params": _encode(model.params),
        "meta": _encode(model.meta),
    }


def model_from_dict(d: dict) -> TrainedModel:
    try:
        version = int(d["version"])
        kind = d["kind"]
        labels = list(d["labels"])
        params = _decode(d["params"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    pca = None if d.get("pca") is None else PcaModel.from_dict(_decode(d["pca"]))
    hog = None if d.get("hog") is None else _decode(d["hog"])
    return TrainedModel(kind, labels, params, pca, hog, _decode(d.get("meta", {})), version)


def dumps_model(model: TrainedModel) -> str:
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not JSON: {exc}") from exc


def save_model(model: TrainedModel, path) -> None:
    _write_text(path, dumps_model(model))


def load_model(path) -> TrainedModel:
    return model_from_dict(_read_json(path))


def dumps_pca(pca: PcaModel, hog: dict | None = None) -> str:
    """Stand-alone PCA document: ``{"version", "kind": "pca", "pca", "hog"}``."""
    doc = {
        "version": FORMAT_VERSION,
        "kind": "pca",
        "pca": _encode(pca.to_dict()),
        "hog": None if hog is None else _encode(hog),
    }
    return json.dumps(doc, indent=1) + "\n"


def save_pca(pca: PcaModel, path, hog: dict | None = None) -> None:
    _write_text(path, dumps_pca(pca, hog))


def load_pca(path) -> PcaModel:
    """PCA from a stand-alone PCA document or from any model document carrying one."""
    doc = _read_json(path)
    if not isinstance(doc, dict) or doc.get("pca") is None:
        raise ModelFormatError(f"{path}: no PCA model in document")
    try:
        return PcaModel.from_dict(_decode(doc["pca"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed PCA model: {exc}") from exc
