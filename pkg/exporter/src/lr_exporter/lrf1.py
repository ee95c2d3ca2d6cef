"""Writers for the engine's on-disk contract.

Implemented here independently (the file format is the interface between
the exporter and the ranking engine; the exporter does not import it).

LRF1, little-endian: magic b"LRF1", uint32 version = 1, uint32 dimension,
uint64 row count, then row_count * dimension float32 values row-major.
The manifest is UTF-8 JSON lines with keys in fixed order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

_HEADER = struct.Struct("<4sIIQ")


def write_features(path, rows: np.ndarray) -> None:
    rows = np.ascontiguousarray(rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
        raise ValueError(f"feature rows must be a non-empty 2-D matrix, got {rows.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"LRF1", 1, rows.shape[1], rows.shape[0]))
        fh.write(rows.astype("<f4", copy=False).tobytes())


def write_manifest(path, records) -> None:
    """records: iterable of (track_id, vehicle_id, camera_id, row_start, row_count)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for track_id, vehicle_id, camera_id, row_start, row_count in records:
            obj = {
                "track_id": track_id,
                "vehicle_id": vehicle_id,
                "camera_id": camera_id,
                "row_start": int(row_start),
                "row_count": int(row_count),
            }
            fh.write(json.dumps(obj, separators=(", ", ": ")) + "\n")
