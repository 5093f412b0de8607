"""Flat binary checkpoints: magic bytes, JSON header, raw float64 payload.

Layout::

    b"BSTCKPT1\\n"
    <UTF-8 JSON header, one line, ending with \\n>
    <concatenated little-endian float64 tensor payloads, C order>

The header lists every tensor's name, shape, and byte offset into the payload
plus a free-form ``meta`` object. Headers are serialised with sorted keys and
no whitespace, so identical contents produce byte-identical files, and a
save/load round trip reproduces every array bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .params import ParamStore

__all__ = ["MAGIC", "CheckpointError", "save_arrays", "load_arrays", "save_store", "load_into_store"]

MAGIC = b"BSTCKPT1\n"


class CheckpointError(ValueError):
    """The file is not a well-formed checkpoint."""


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        # asarray with order="C" keeps 0-d shapes (ascontiguousarray would not)
        a = np.asarray(arr, dtype="<f8", order="C")
        raw = a.tobytes()
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    header = {"tensors": entries, "meta": meta or {}}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(blob)
        fh.write(b"\n")
        for raw in chunks:
            fh.write(raw)


def load_arrays(path):
    """Read a checkpoint; returns (name -> float64 array, meta dict)."""
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    nl = data.find(b"\n", len(MAGIC))
    if nl < 0:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[len(MAGIC):nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed header: {exc}") from exc
    payload = data[nl + 1:]
    arrays = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 8
        if end > len(payload):
            raise CheckpointError(f"{path}: payload shorter than header claims for {entry['name']!r}")
        arr = np.frombuffer(payload[start:end], dtype="<f8").reshape(shape).astype(np.float64)
        arrays[entry["name"]] = arr
    return arrays, header.get("meta", {})


def save_store(path, store: ParamStore, meta: dict | None = None) -> None:
    save_arrays(path, store.state_arrays(), meta)


def load_into_store(path, store: ParamStore) -> dict:
    """Fill an already-shaped store from a checkpoint; returns its meta."""
    arrays, meta = load_arrays(path)
    store.load_arrays(arrays)
    return meta
