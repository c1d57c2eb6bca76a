"""Versioned binary container for model and policy weights.

Layout (all integers little-endian)::

    b"BSPK"            magic
    uint16             format version (FORMAT_VERSION)
    uint32             header length in bytes
    header             UTF-8 JSON, sorted keys: {"kind", "meta", "arrays": [
                         {"name", "dtype", "shape", "offset", "nbytes"}, ...]}
    payload            raw C-order array bytes, concatenated in header order

Arrays are stored in little-endian byte order, so a load returns bit-exact
copies.  No timestamps are written: identical inputs give identical files.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"BSPK"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def dumps(kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = arr.tobytes()
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"kind": kind, "meta": meta, "arrays": entries},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<HI", FORMAT_VERSION, len(header)) + header + b"".join(blobs)


def loads(data: bytes) -> tuple[str, dict, dict[str, np.ndarray]]:
    if data[:4] != MAGIC:
        raise FormatError("not a budgetsp weight file (bad magic)")
    if len(data) < 10:
        raise FormatError("truncated weight file header")
    version, hlen = struct.unpack("<HI", data[4:10])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    try:
        header = json.loads(data[10:10 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt weight file header: {exc}") from None
    base = 10 + hlen
    arrays = {}
    for e in header["arrays"]:
        start = base + e["offset"]
        buf = data[start:start + e["nbytes"]]
        if len(buf) != e["nbytes"]:
            raise FormatError(f"array {e['name']!r} is truncated")
        arrays[e["name"]] = np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return header["kind"], header["meta"], arrays


def save(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(kind, meta, arrays))


def load(path) -> tuple[str, dict, dict[str, np.ndarray]]:
    return loads(Path(path).read_bytes())
