"""File formats: JSON-lines vector maps, AMAP float32 grids, checkpoint containers."""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .geometry import Polyline, VectorMap

AMAP_MAGIC = b"AMAP"
CKPT_MAGIC = b"BVCK"
_HEADER = struct.Struct("<4sIII")  # magic, H, W, C


def array_to_bytes(arr: np.ndarray) -> bytes:
    """Serialize an (H, W, C) float32 array with the 16-byte AMAP header."""
    a = np.ascontiguousarray(arr, dtype="<f4")
    if a.ndim != 3:
        raise ValueError("AMAP arrays are (H, W, C)")
    h, w, c = a.shape
    return _HEADER.pack(AMAP_MAGIC, h, w, c) + a.tobytes()


def array_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one AMAP block; returns (array, next offset)."""
    magic, h, w, c = _HEADER.unpack_from(buf, offset)
    if magic != AMAP_MAGIC:
        raise ValueError("bad AMAP magic")
    start = offset + _HEADER.size
    n = h * w * c * 4
    arr = np.frombuffer(buf[start : start + n], dtype="<f4").reshape(h, w, c).copy()
    return arr, start + n


def write_array(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(array_to_bytes(arr))


def read_array(path) -> np.ndarray:
    arr, _ = array_from_bytes(Path(path).read_bytes())
    return arr


def scene_record(scene_id: str, vmap: VectorMap) -> dict:
    return {
        "scene_id": scene_id,
        "polylines": [
            {"cls": p.cls, "closed": p.closed, "points": p.points.tolist()} for p in vmap
        ],
    }


def scene_from_record(rec: dict) -> tuple[str, VectorMap]:
    polys = [
        Polyline(d["cls"], np.asarray(d["points"], dtype=np.float64), bool(d["closed"]))
        for d in rec["polylines"]
    ]
    return rec["scene_id"], VectorMap(polys)


def write_vector_maps(path, entries) -> None:
    """Write (scene_id, VectorMap) pairs as JSON-lines, one scene per line."""
    with open(path, "w") as f:
        for scene_id, vmap in entries:
            f.write(json.dumps(scene_record(scene_id, vmap), sort_keys=True))
            f.write("\n")


def read_vector_maps(path) -> list[tuple[str, VectorMap]]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(scene_from_record(json.loads(line)))
    return out


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_checkpoint(path, config: dict, arrays: dict, version: str = "1") -> None:
    """Single-file container: JSON header + one AMAP block per named array.

    Arrays of any rank are stored flattened as (numel, 1, 1) blocks; true
    shapes live in the header so the round trip is bit-exact.
    """
    header = {
        "version": version,
        "config": config,
        "params": [{"name": k, "shape": list(np.asarray(v).shape)} for k, v in arrays.items()],
    }
    hb = canonical_json(header).encode()
    parts = [CKPT_MAGIC, struct.pack("<I", len(hb)), hb]
    for k in arrays:
        a = np.asarray(arrays[k], dtype=np.float32)
        parts.append(array_to_bytes(a.reshape(max(a.size, 1), 1, 1) if a.size else a.reshape(0, 1, 1)))
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> tuple[dict, dict]:
    """Returns (header, arrays) with arrays restored to their original shapes."""
    buf = Path(path).read_bytes()
    if buf[:4] != CKPT_MAGIC:
        raise ValueError("not a checkpoint file")
    (hlen,) = struct.unpack_from("<I", buf, 4)
    header = json.loads(buf[8 : 8 + hlen].decode())
    offset = 8 + hlen
    arrays = {}
    for entry in header["params"]:
        arr, offset = array_from_bytes(buf, offset)
        arrays[entry["name"]] = arr.reshape(entry["shape"])
    return header, arrays
