"""On-disk feature format (LRF1), track manifests and synthetic galleries.

LRF1 layout, little-endian:

    bytes 0..3    magic  b"LRF1"
    bytes 4..7    version, uint32 (currently 1)
    bytes 8..11   latent dimension f, uint32
    bytes 12..19  row count, uint64
    payload       row_count * f float32 values, row-major (one row per image)

The manifest is UTF-8 JSON-lines, one record per track, keys in fixed
order so that read -> write round-trips are byte-identical:

    {"track_id": ..., "vehicle_id": ..., "camera_id": ..., "row_start": ..., "row_count": ...}

Features are float32 on disk and promoted to float64 once loaded; all
distance and solver arithmetic runs in float64.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FeatureFormatError, ManifestError
from .tracks import Gallery, TrackFeatures, validate_gallery

MAGIC = b"LRF1"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")

_MANIFEST_KEYS = ("track_id", "vehicle_id", "camera_id", "row_start", "row_count")


@dataclass(frozen=True)
class ManifestRecord:
    """One track's row range inside the feature file, plus its labels."""

    track_id: str
    vehicle_id: str
    camera_id: str
    row_start: int
    row_count: int


def write_features(path, rows: np.ndarray) -> None:
    """Write an (n_rows, f) matrix as an LRF1 file (one image vector per row)."""
    rows = np.ascontiguousarray(rows, dtype=np.float32)
    if rows.ndim != 2:
        raise FeatureFormatError(f"expected a 2-D row matrix, got shape {rows.shape}")
    n_rows, dim = rows.shape
    if dim == 0:
        raise FeatureFormatError("feature dimension must be >= 1")
    if n_rows == 0:
        raise FeatureFormatError("row count must be >= 1")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, n_rows))
        fh.write(rows.astype("<f4", copy=False).tobytes())


def read_features(path) -> np.ndarray:
    """Read an LRF1 file back into an (n_rows, f) float32 matrix."""
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise FeatureFormatError(f"cannot open feature file: {exc}") from None
    with fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FeatureFormatError(f"{path}: truncated header ({len(header)} bytes)")
        magic, version, dim, n_rows = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FeatureFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise FeatureFormatError(f"{path}: unsupported version {version}")
        if dim == 0:
            raise FeatureFormatError(f"{path}: feature dimension 0")
        if n_rows == 0:
            raise FeatureFormatError(f"{path}: empty feature file (row_count 0)")
        expected = n_rows * dim * 4
        payload = fh.read()
    if len(payload) != expected:
        raise FeatureFormatError(
            f"{path}: payload is {len(payload)} bytes, expected exactly {expected} "
            f"({n_rows} rows x {dim} x 4)"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(n_rows, dim).astype(np.float32, copy=False)


def write_manifest(path, records) -> None:
    """Write manifest records as canonical JSON-lines (fixed key order)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            obj = {
                "track_id": rec.track_id,
                "vehicle_id": rec.vehicle_id,
                "camera_id": rec.camera_id,
                "row_start": int(rec.row_start),
                "row_count": int(rec.row_count),
            }
            fh.write(json.dumps(obj, separators=(", ", ": ")) + "\n")


def read_manifest(path) -> list[ManifestRecord]:
    records = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot open manifest: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            missing = [k for k in _MANIFEST_KEYS if k not in obj]
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing keys {missing}")
            rec = ManifestRecord(
                track_id=str(obj["track_id"]),
                vehicle_id=str(obj["vehicle_id"]),
                camera_id=str(obj["camera_id"]),
                row_start=int(obj["row_start"]),
                row_count=int(obj["row_count"]),
            )
            if rec.row_count < 1:
                raise ManifestError(f"{path}:{lineno}: row_count must be >= 1")
            if rec.row_start < 0:
                raise ManifestError(f"{path}:{lineno}: row_start must be >= 0")
            records.append(rec)
    if not records:
        raise ManifestError(f"{path}: manifest contains no records")
    return records


def write_query_manifest(path, selections: dict) -> None:
    """Write a query-image manifest: one {"track_id", "image_index"} per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for track_id, image_index in selections.items():
            fh.write(
                json.dumps(
                    {"track_id": str(track_id), "image_index": int(image_index)},
                    separators=(", ", ": "),
                )
                + "\n"
            )


def read_query_manifest(path) -> dict:
    """Read a query-image manifest back into a track_id -> image index dict."""
    selections: dict = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot open query manifest: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            if "track_id" not in obj or "image_index" not in obj:
                raise ManifestError(f"{path}:{lineno}: expected track_id and image_index")
            selections[str(obj["track_id"])] = int(obj["image_index"])
    if not selections:
        raise ManifestError(f"{path}: query manifest contains no records")
    return selections


def load_gallery(feature_path, manifest_path, *, allow_negative: bool = False) -> Gallery:
    """Materialize a gallery from a feature file and its manifest.

    Rejects overlapping or out-of-bounds row ranges and duplicate track ids;
    rows referenced by no track are reported as a warning. Negative feature
    values are rejected unless ``allow_negative`` (non-ReLU backbones).
    """
    rows = read_features(feature_path).astype(np.float64)
    records = read_manifest(manifest_path)

    seen: set[str] = set()
    for rec in records:
        if rec.track_id in seen:
            raise ManifestError(f"duplicate track_id {rec.track_id!r} in manifest")
        seen.add(rec.track_id)
        if rec.row_start + rec.row_count > rows.shape[0]:
            raise ManifestError(
                f"track {rec.track_id!r} references rows "
                f"[{rec.row_start}, {rec.row_start + rec.row_count}) "
                f"but the file has {rows.shape[0]} rows"
            )
    by_start = sorted(records, key=lambda r: r.row_start)
    for prev, cur in zip(by_start, by_start[1:]):
        if prev.row_start + prev.row_count > cur.row_start:
            raise ManifestError(
                f"tracks {prev.track_id!r} and {cur.track_id!r} have overlapping row ranges"
            )
    covered = sum(r.row_count for r in records)
    if covered < rows.shape[0]:
        warnings.warn(
            f"{rows.shape[0] - covered} feature rows are referenced by no track",
            stacklevel=2,
        )

    tracks = [
        TrackFeatures(
            track_id=rec.track_id,
            vehicle_id=rec.vehicle_id,
            camera_id=rec.camera_id,
            matrix=rows[rec.row_start : rec.row_start + rec.row_count].T,
        )
        for rec in records
    ]
    gallery = Gallery.from_tracks(tracks)
    violations = validate_gallery(gallery, allow_negative=allow_negative)
    if violations:
        summary = "; ".join(str(v) for v in violations[:5])
        raise DataError(f"loaded gallery violates invariants: {summary}")
    return gallery


def save_gallery(gallery: Gallery, feature_path, manifest_path) -> list[ManifestRecord]:
    """Write a gallery in canonical layout: rows contiguous, in track order."""
    rows = np.concatenate([t.matrix.T for t in gallery.tracks], axis=0)
    write_features(feature_path, rows.astype(np.float32))
    records = []
    start = 0
    for t in gallery.tracks:
        records.append(
            ManifestRecord(
                track_id=t.track_id,
                vehicle_id=t.vehicle_id,
                camera_id=t.camera_id,
                row_start=start,
                row_count=t.image_count,
            )
        )
        start += t.image_count
    write_manifest(manifest_path, records)
    return records


def generate_synthetic(
    n_vehicles: int,
    n_cameras: int,
    images_per_track_range: tuple[int, int],
    f: int,
    cluster_separation: float,
    noise_sigma: float,
    seed: int,
) -> Gallery:
    """Deterministic synthetic gallery with per-vehicle feature clusters.

    Each vehicle gets a non-negative cluster center with pairwise center
    distance >= ``cluster_separation`` (rejection sampling). Each
    (vehicle, camera) pair yields one track whose image vectors are
    center + half-normal noise, clipped at zero. Values are quantized
    through float32 so an in-memory gallery is bit-identical to one
    saved and reloaded. The same seed always produces the same gallery.
    """
    lo, hi = images_per_track_range
    if n_vehicles < 1 or n_cameras < 1 or f < 1:
        raise DataError("n_vehicles, n_cameras and f must all be >= 1")
    if lo < 1 or hi < lo:
        raise DataError(f"invalid images_per_track_range {images_per_track_range}")
    if cluster_separation < 0 or noise_sigma < 0:
        raise DataError("cluster_separation and noise_sigma must be >= 0")

    rng = np.random.default_rng(seed)

    box = max(2.0, float(n_vehicles) ** (1.0 / f)) * max(cluster_separation, 1e-12)
    centers = np.empty((n_vehicles, f))
    count, rejections = 0, 0
    while count < n_vehicles:
        cand = rng.uniform(0.0, box, size=f)
        if count == 0 or np.min(
            np.linalg.norm(centers[:count] - cand, axis=1)
        ) >= cluster_separation:
            centers[count] = cand
            count += 1
            rejections = 0
        else:
            rejections += 1
            if rejections > 200:  # box too crowded; widen and keep sampling
                box *= 1.5
                rejections = 0

    tracks = []
    k = 0
    for v in range(n_vehicles):
        for c in range(n_cameras):
            n_img = int(rng.integers(lo, hi + 1))
            if noise_sigma > 0:
                noise = np.abs(rng.normal(0.0, noise_sigma, size=(f, n_img)))
            else:
                noise = np.zeros((f, n_img))
            mat = np.clip(centers[v][:, None] + noise, 0.0, None)
            mat = mat.astype(np.float32).astype(np.float64)
            tracks.append(
                TrackFeatures(
                    track_id=f"t{k:05d}",
                    vehicle_id=f"v{v:04d}",
                    camera_id=f"c{c:02d}",
                    matrix=mat,
                )
            )
            k += 1
    return Gallery.from_tracks(tracks)
