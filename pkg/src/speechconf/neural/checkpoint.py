"""Versioned binary checkpoints.

Layout: magic `CSNN`, u16 format version, u32 metadata length, JSON metadata
(layer specs, seed, state keys/shapes, normalizer statistics, free-form
extras), then the state arrays as little-endian float64 blobs in the order
the metadata lists them.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from speechconf.errors import CorruptHeader
from speechconf.neural.model import MlpModel

MAGIC = b"CSNN"
VERSION = 1


def save_state(path: str | Path, meta: dict, state: dict[str, np.ndarray]) -> None:
    keys = sorted(state)
    doc = dict(meta)
    doc["state"] = [{"key": k, "shape": list(state[k].shape)} for k in keys]
    meta_bytes = json.dumps(doc, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(meta_bytes)))
        fh.write(meta_bytes)
        for k in keys:
            fh.write(state[k].astype("<f8").tobytes())


def load_state(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CorruptHeader(f"{path}: not a CSNN checkpoint")
    version, meta_len = struct.unpack_from("<HI", raw, 4)
    if version != VERSION:
        raise CorruptHeader(f"{path}: unsupported checkpoint version {version}")
    meta = json.loads(raw[10:10 + meta_len].decode("utf-8"))
    pos = 10 + meta_len
    state: dict[str, np.ndarray] = {}
    for item in meta["state"]:
        shape = tuple(item["shape"])
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(shape)
        state[item["key"]] = arr.copy()
        pos += 8 * n
    return meta, state


def save_model(model: MlpModel, path: str | Path, extra: dict | None = None) -> None:
    meta = {
        "kind": "mlp",
        "layer_specs": model.layer_specs,
        "seed": model.seed,
        "extra": extra or {},
    }
    save_state(path, meta, model.get_state())


def load_model(path: str | Path) -> tuple[MlpModel, dict]:
    """Rebuild an MLP checkpoint; returns (model, extra metadata)."""
    meta, state = load_state(path)
    if meta.get("kind") != "mlp":
        raise CorruptHeader(f"{path}: checkpoint is not a plain MLP")
    model = MlpModel(meta["layer_specs"], seed=meta["seed"])
    model.set_state(state)
    model.eval()
    return model, meta["extra"]
