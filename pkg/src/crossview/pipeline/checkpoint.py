"""Checkpoint container: length-prefixed JSON header plus raw tensor blob.

Layout: 8-byte little-endian unsigned header length, the UTF-8 JSON
header, then every tensor's raw little-endian bytes at the offsets the
header declares. Serialization is canonical (sorted keys, no whitespace),
so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..encoders import ParamSet

FORMAT_VERSION = 1

_DTYPES = {"f32": "<f4", "f64": "<f8"}
_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}


class CheckpointError(ValueError):
    pass


def save_checkpoint(paramsets: dict, path, config: dict | None = None):
    """Write named parameter sets; shared sets serialize exactly once."""
    tensors = {}
    chunks = []
    offset = 0
    seen: dict[int, str] = {}
    # canonical order: blob offsets follow sorted tensor names, so a
    # loaded-and-resaved checkpoint reproduces the file byte for byte
    entries = sorted(
        (f"{set_name}/{name}", arr) for set_name, ps in paramsets.items() for name, arr in ps.items()
    )
    for full, arr in entries:
        if id(arr) in seen:
            raise CheckpointError(f"tensor {full} aliases {seen[id(arr)]}; parameter sets must be disjoint")
        seen[id(arr)] = full
        dt = _DTYPE_NAMES[np.dtype(arr.dtype)]
        raw = np.ascontiguousarray(arr.data.astype(_DTYPES[dt], copy=False)).tobytes()
        tensors[full] = {"shape": list(arr.shape), "dtype": dt, "offset": offset}
        chunks.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "config": config or {},
        "blob_bytes": offset,
        "tensors": tensors,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(Path(path), "wb") as f:
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for c in chunks:
            f.write(c)


def load_checkpoint(path):
    """Read back (paramsets, config); validates version, sizes and shapes."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise CheckpointError(f"{path}: file too short for a header length")
    (hlen,) = struct.unpack("<Q", data[:8])
    if len(data) < 8 + hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header.get('format_version')} unsupported (expected {FORMAT_VERSION})"
        )
    blob = data[8 + hlen :]
    if len(blob) != header["blob_bytes"]:
        raise CheckpointError(f"{path}: truncated blob ({len(blob)} bytes, header declares {header['blob_bytes']})")

    paramsets: dict[str, ParamSet] = {}
    for full, meta in header["tensors"].items():
        set_name, name = full.split("/", 1)
        shape = tuple(meta["shape"])
        dt = _DTYPES.get(meta["dtype"])
        if dt is None:
            raise CheckpointError(f"{path}: tensor {full} has unknown dtype {meta['dtype']!r}")
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * np.dtype(dt).itemsize
        start = meta["offset"]
        if start + nbytes > len(blob):
            raise CheckpointError(f"{path}: tensor {full} extends past the blob end")
        flat = np.frombuffer(blob, dtype=dt, count=count, offset=start)
        if flat.size != count:
            raise CheckpointError(f"{path}: tensor {full} shape {shape} does not match stored bytes")
        ps = paramsets.setdefault(set_name, ParamSet())
        ps.add(name, flat.reshape(shape).astype(np.dtype(dt).newbyteorder("=")))
    return paramsets, header.get("config", {})
