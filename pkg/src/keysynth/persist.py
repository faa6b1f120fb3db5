"""Versioned JSON model files.

Every file is one JSON object ``{"format": ..., "version": 1, "model": ...}``.
numpy arrays are stored as ``{"__ndarray__": base64, "dtype": ..., "shape": ...}``
holding the raw little-endian bytes, so parameters round-trip bit-exactly and
the same model always serializes to the same bytes.
"""
from __future__ import annotations

import base64
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .detectors import DetectorModel
from .errors import CorpusIOError, ModelFormatError
from .gnn import FeatureNet, GnnConfig, GnnModel
from .kde import KdeModel, UniversalModel, UserDependentModel, UserModel

VERSION = 1
FORMATS = ("kde-universal", "kde-userdep", "gnn", "detector")


def _encode(obj):
    if isinstance(obj, np.ndarray):
        arr = np.ascontiguousarray(obj)
        dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        return {
            "__ndarray__": base64.b64encode(arr.astype(dtype).tobytes()).decode("ascii"),
            "dtype": dtype.str,
            "shape": list(arr.shape),
        }
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            raw = base64.b64decode(obj["__ndarray__"])
            return np.frombuffer(raw, dtype=np.dtype(obj["dtype"])).reshape(obj["shape"]).copy()
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def _kde_dict(m: UniversalModel) -> dict:
    return {"features": [{"bandwidth": f.bandwidth, "points": f.points} for f in m.f_models]}


def _kde_models(d: dict) -> tuple[KdeModel, ...]:
    return tuple(KdeModel(f["points"], f["bandwidth"]) for f in d["features"])


def model_to_dict(model) -> dict:
    if isinstance(model, UserModel):
        raise TypeError("save the enclosing UserDependentModel instead of a single UserModel")
    if isinstance(model, UniversalModel):
        fmt, body = "kde-universal", _kde_dict(model)
    elif isinstance(model, UserDependentModel):
        fmt = "kde-userdep"
        body = {"users": [{"user_id": u.user_id, **_kde_dict(u)} for u in model.users]}
    elif isinstance(model, GnnModel):
        fmt = "gnn"
        body = {
            "config": asdict(model.config),
            "nets": [n.to_dict() for n in model.nets],
            "history": model.history,
        }
    elif isinstance(model, DetectorModel):
        fmt, body = "detector", model.to_dict()
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return {"format": fmt, "version": VERSION, "model": _encode(body)}


def model_from_dict(doc: dict):
    fmt, version = doc.get("format"), doc.get("version")
    if fmt not in FORMATS:
        raise ModelFormatError(f"unknown model format {fmt!r}")
    if version != VERSION:
        raise ModelFormatError(f"unsupported {fmt} version {version!r}")
    try:
        return _build(fmt, _decode(doc["model"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed {fmt} model: {exc}") from exc


def _build(fmt: str, body: dict):
    if fmt == "kde-universal":
        return UniversalModel(_kde_models(body))
    if fmt == "kde-userdep":
        return UserDependentModel(tuple(UserModel(_kde_models(u), u["user_id"]) for u in body["users"]))
    if fmt == "gnn":
        cfg = dict(body["config"])
        return GnnModel(
            [FeatureNet.from_dict(n) for n in body["nets"]],
            GnnConfig(**cfg),
            [list(h) for h in body["history"]],
        )
    return DetectorModel.from_dict(body)


def dumps(model) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")) + "\n"


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a model file: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must hold a JSON object")
    return model_from_dict(doc)


def save_model(model, path) -> None:
    try:
        Path(path).write_text(dumps(model), encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"cannot write {path}: {exc}") from exc


def load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"cannot read {path}: {exc}") from exc
    return loads(text)
