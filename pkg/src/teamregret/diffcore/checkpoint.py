"""Binary checkpoint codec.

Layout: magic bytes ``MRGR1\\0``, a little-endian uint64 header length, a
UTF-8 JSON header (array names and shapes, flags, arbitrary metadata), then
one little-endian float32 array per header entry, in header order.

The header additionally carries a base64 float64 copy of the same arrays so
that save/load round-trips and training resumption are bit-exact; readers
that only understand the float32 sections can ignore it.
"""

from __future__ import annotations

import base64
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MRGR1\x00"
_LEN = struct.Struct("<Q")


class CheckpointError(ValueError):
    pass


def write_checkpoint(path, arrays: list[tuple[str, np.ndarray]], meta: dict) -> None:
    names = [n for n, _ in arrays]
    if len(set(names)) != len(names):
        raise CheckpointError(f"duplicate array names in checkpoint: {names}")
    exact = np.concatenate([np.asarray(a, dtype="<f8").reshape(-1) for _, a in arrays]) \
        if arrays else np.zeros(0, dtype="<f8")
    header = {
        "format": 1,
        "arrays": [{"name": n, "shape": list(np.asarray(a).shape)} for n, a in arrays],
        "meta": meta,
        "exact_float64": base64.b64encode(exact.tobytes()).decode("ascii"),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_LEN.pack(len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.asarray(a, dtype="<f4").tobytes())


def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (arrays as float64 in header order, metadata dict)."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + _LEN.size:
        raise CheckpointError(f"{path}: file too short to be a checkpoint")
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes {raw[:6]!r}, expected {MAGIC!r}")
    offset = len(MAGIC)
    (header_len,) = _LEN.unpack_from(raw, offset)
    offset += _LEN.size
    if len(raw) < offset + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable header: {e}") from e
    offset += header_len

    entries = header.get("arrays", [])
    shapes = [tuple(e["shape"]) for e in entries]
    sizes = [int(np.prod(s)) if s else 1 for s in shapes]
    f32_bytes = sum(4 * s for s in sizes)
    if len(raw) < offset + f32_bytes:
        raise CheckpointError(
            f"{path}: truncated arrays section (need {f32_bytes} bytes, have {len(raw) - offset})"
        )

    exact_b64 = header.get("exact_float64")
    values: list[np.ndarray]
    if exact_b64 is not None:
        flat = np.frombuffer(base64.b64decode(exact_b64), dtype="<f8")
        if flat.size != sum(sizes):
            raise CheckpointError(f"{path}: exact payload length {flat.size} != {sum(sizes)}")
        values, pos = [], 0
        for shape, size in zip(shapes, sizes):
            values.append(flat[pos : pos + size].reshape(shape).astype(np.float64))
            pos += size
    else:
        values, pos = [], offset
        for shape, size in zip(shapes, sizes):
            arr = np.frombuffer(raw, dtype="<f4", count=size, offset=pos).reshape(shape)
            values.append(arr.astype(np.float64))
            pos += 4 * size

    arrays = {e["name"]: v for e, v in zip(entries, values)}
    return arrays, header.get("meta", {})
