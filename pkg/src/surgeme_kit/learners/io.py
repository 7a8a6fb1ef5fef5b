"""Versioned binary model container.

Layout (all integers little-endian, floats IEEE-754 binary64):

    magic "SGKM" | u32 version | u16 kind length + kind bytes |
    u32 meta length + meta JSON (sorted keys) |
    u32 array count | per array:
        u16 name length + name bytes | u8 dtype code | u8 ndim |
        u64 * ndim shape | raw array bytes

dtype codes: 0 = float64, 1 = int32, 2 = int64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import IoError, VersionMismatchError
from .base import ClassifierModel
from .forest import RandomForestModel, _Tree
from .mlp import MlpModel
from .svm import SvmModel

MAGIC = b"SGKM"
FORMAT_VERSION = 1

_DTYPES = {0: "<f8", 1: "<i4", 2: "<i8"}
_DTYPE_CODES = {np.dtype(np.float64): 0, np.dtype(np.int32): 1, np.dtype(np.int64): 2}


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _pack_block(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise IoError("model file truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def read_str(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")


def _array_bytes(name: str, arr: np.ndarray) -> bytes:
    code = _DTYPE_CODES[np.dtype(arr.dtype)]
    head = _pack_str(name) + struct.pack("<BB", code, arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    return head + np.ascontiguousarray(arr).astype(_DTYPES[code]).tobytes()


def _model_state(model: ClassifierModel) -> tuple[dict, dict[str, np.ndarray]]:
    meta = {
        "kind": model.kind,
        "dim": model.dim,
        "n_classes": model.n_classes,
        "params": _jsonable(model.params),
    }
    arrays: dict[str, np.ndarray] = {}
    if isinstance(model, RandomForestModel):
        meta["n_trees"] = len(model.trees)
        for t, tree in enumerate(model.trees):
            arrays[f"t{t}_feature"] = tree.feature
            arrays[f"t{t}_threshold"] = tree.threshold
            arrays[f"t{t}_left"] = tree.left
            arrays[f"t{t}_right"] = tree.right
            arrays[f"t{t}_proba"] = tree.proba
    elif isinstance(model, SvmModel):
        meta["gamma"] = model.gamma
        meta["machines"] = [c for c, m in enumerate(model.machines) if m is not None]
        for c, machine in enumerate(model.machines):
            if machine is None:
                continue
            sv, alpha_y, b = machine
            arrays[f"m{c}_sv"] = sv
            arrays[f"m{c}_alpha_y"] = alpha_y
            arrays[f"m{c}_b"] = np.asarray([b])
    elif isinstance(model, MlpModel):
        meta["n_layers"] = len(model.weights)
        for i, (W, b) in enumerate(model.weights):
            arrays[f"l{i}_W"] = W
            arrays[f"l{i}_b"] = b
    else:
        raise ValueError(f"cannot serialize model kind {model.kind!r}")
    return meta, arrays


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (tuple, list)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def save_model(model: ClassifierModel, path: str | Path) -> None:
    meta, arrays = _model_state(model)
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    out += _pack_str(model.kind)
    out += _pack_block(json.dumps(meta, sort_keys=True).encode("utf-8"))
    out += struct.pack("<I", len(arrays))
    for name in sorted(arrays):
        out += _array_bytes(name, arrays[name])
    Path(path).write_bytes(bytes(out))


def _rebuild(meta: dict, arrays: dict[str, np.ndarray]) -> ClassifierModel:
    kind = meta["kind"]
    params = meta["params"]
    dim, n_classes = int(meta["dim"]), int(meta["n_classes"])
    if kind == "rf":
        trees = []
        for t in range(int(meta["n_trees"])):
            trees.append(_Tree(
                arrays[f"t{t}_feature"].astype(np.int32),
                arrays[f"t{t}_threshold"],
                arrays[f"t{t}_left"].astype(np.int32),
                arrays[f"t{t}_right"].astype(np.int32),
                arrays[f"t{t}_proba"],
            ))
        return RandomForestModel(dim, n_classes, params, trees)
    if kind == "svm":
        machines: list = [None] * n_classes
        for c in meta["machines"]:
            machines[int(c)] = (arrays[f"m{c}_sv"], arrays[f"m{c}_alpha_y"],
                                float(arrays[f"m{c}_b"][0]))
        return SvmModel(dim, n_classes, params, machines, float(meta["gamma"]))
    if kind == "mlp":
        weights = [(arrays[f"l{i}_W"], arrays[f"l{i}_b"])
                   for i in range(int(meta["n_layers"]))]
        return MlpModel(dim, n_classes, params, weights)
    raise VersionMismatchError(f"unknown model kind {kind!r}")


def load_model(path: str | Path) -> ClassifierModel:
    blob = Path(path).read_bytes()
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise VersionMismatchError(f"{path}: not a surgeme-kit model file")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})")
    r.read_str()  # kind tag, repeated inside meta
    try:
        meta = json.loads(r.take(r.unpack("<I")[0]).decode("utf-8"))
        (n_arrays,) = r.unpack("<I")
        arrays: dict[str, np.ndarray] = {}
        for _ in range(n_arrays):
            name = r.read_str()
            code, ndim = r.unpack("<BB")
            if code not in _DTYPES:
                raise IoError(f"{path}: unknown dtype code {code}")
            shape = r.unpack(f"<{ndim}Q") if ndim else ()
            count = int(np.prod(shape)) if shape else 1
            itemsize = np.dtype(_DTYPES[code]).itemsize
            raw = r.take(count * itemsize)
            arrays[name] = np.frombuffer(raw, dtype=_DTYPES[code]).reshape(shape).copy()
    except (json.JSONDecodeError, struct.error, ValueError) as exc:
        raise IoError(f"{path}: corrupt model container: {exc}") from None
    return _rebuild(meta, arrays)
