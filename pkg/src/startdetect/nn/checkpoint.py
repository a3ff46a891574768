"""Versioned binary checkpoint container.

Layout: magic ``VSTR`` | u32 format version | u64 seed | u32 JSON length |
architecture JSON (UTF-8) | raw little-endian float64 arrays in the order
listed in the JSON array manifest. Round-trips bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"VSTR"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dump_bytes(arch: dict, arrays: list[tuple[str, np.ndarray]],
               seed: int) -> bytes:
    """Serialize architecture metadata plus named float64 arrays."""
    manifest = [{"name": name, "shape": list(arr.shape)}
                for name, arr in arrays]
    doc = dict(arch)
    doc["arrays"] = manifest
    payload = json.dumps(doc, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<IQI", VERSION, seed, len(payload)), payload]
    for _name, arr in arrays:
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def load_bytes(blob: bytes) -> tuple[dict, dict[str, np.ndarray], int]:
    """Inverse of dump_bytes: (arch dict, arrays by name, seed)."""
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, seed, json_len = struct.unpack("<IQI", blob[4:20])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    doc = json.loads(blob[20:20 + json_len].decode("utf-8"))
    offset = 20 + json_len
    arrays: dict[str, np.ndarray] = {}
    for entry in doc["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count,
                            offset=offset).reshape(shape).copy()
        arrays[entry["name"]] = arr
        offset += count * 8
    if offset != len(blob):
        raise CheckpointError(
            f"trailing bytes: read {offset} of {len(blob)}")
    arch = {k: v for k, v in doc.items() if k != "arrays"}
    return arch, arrays, seed


def save(path: str | Path, arch: dict,
         arrays: list[tuple[str, np.ndarray]], seed: int) -> None:
    Path(path).write_bytes(dump_bytes(arch, arrays, seed))


def load(path: str | Path) -> tuple[dict, dict[str, np.ndarray], int]:
    return load_bytes(Path(path).read_bytes())
