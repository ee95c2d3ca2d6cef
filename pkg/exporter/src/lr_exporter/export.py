"""Walk a track-structured image tree and export LRF1 features.

Folder convention (documented contract):

    <root>/<vehicle_id>/<camera_id>/<track_id>/*.jpg|*.png|...

One feature row per image, rows grouped per track, tracks ordered by
sorted (vehicle_id, camera_id, track_id) and images by sorted filename.
Track ids must be unique across the whole tree. Unreadable images are
skipped with a warning; a track with no readable image is an error.

Preprocessing is fixed so that repeated exports are bitwise identical:
RGB convert, bilinear resize to 224x224, scale to [0, 1], normalize by
the ImageNet channel statistics (mean 0.485/0.456/0.406, std
0.229/0.224/0.225). Inference runs single-threaded on CPU.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbones import BACKBONE_DIMENSIONS, build_feature_extractor
from .lrf1 import write_features, write_manifest

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".webp"}
INPUT_SIZE = 224
_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class ExportError(Exception):
    """Unusable image tree or extraction contract violation."""


@dataclass(frozen=True)
class TrackFolder:
    track_id: str
    vehicle_id: str
    camera_id: str
    images: tuple


def scan_tree(root) -> list[TrackFolder]:
    root = Path(root)
    if not root.is_dir():
        raise ExportError(f"image root {root} is not a directory")
    tracks = []
    seen = set()
    for vehicle_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for camera_dir in sorted(p for p in vehicle_dir.iterdir() if p.is_dir()):
            for track_dir in sorted(p for p in camera_dir.iterdir() if p.is_dir()):
                images = tuple(
                    sorted(
                        p for p in track_dir.iterdir()
                        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
                    )
                )
                if not images:
                    raise ExportError(f"track folder {track_dir} contains no images")
                if track_dir.name in seen:
                    raise ExportError(f"duplicate track_id {track_dir.name!r} in the tree")
                seen.add(track_dir.name)
                tracks.append(
                    TrackFolder(
                        track_id=track_dir.name,
                        vehicle_id=vehicle_dir.name,
                        camera_id=camera_dir.name,
                        images=images,
                    )
                )
    if not tracks:
        raise ExportError(f"no track folders found under {root}")
    return tracks


def _load_image(path) -> np.ndarray | None:
    try:
        with Image.open(path) as img:
            img = img.convert("RGB").resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except Exception as exc:
        warnings.warn(f"skipping unreadable image {path}: {exc}", stacklevel=2)
        return None
    arr = (arr - _MEAN) / _STD
    return arr.transpose(2, 0, 1)


def export(
    image_root,
    backbone: str,
    out_features,
    out_manifest,
    weights: str = "pretrained",
    seed: int = 0,
    batch_size: int = 16,
) -> dict:
    """Export one image tree; returns a summary dict."""
    expected_dim = BACKBONE_DIMENSIONS.get(backbone)
    if expected_dim is None:
        raise ExportError(f"unknown backbone {backbone!r}; expected one of {sorted(BACKBONE_DIMENSIONS)}")
    tracks = scan_tree(image_root)
    model = build_feature_extractor(backbone, weights=weights, seed=seed)
    torch.set_num_threads(1)  # fixed reduction order keeps exports bitwise repeatable

    rows = []
    records = []
    row_start = 0
    for track in tracks:
        arrays = [a for a in (_load_image(p) for p in track.images) if a is not None]
        if not arrays:
            raise ExportError(f"track {track.track_id!r} has no readable images")
        feats = []
        with torch.no_grad():
            for i in range(0, len(arrays), batch_size):
                batch = torch.from_numpy(np.stack(arrays[i : i + batch_size]))
                feats.append(model(batch).numpy().astype(np.float32))
        mat = np.concatenate(feats, axis=0)
        if mat.shape[1] != expected_dim:
            raise ExportError(
                f"{backbone} emitted dimension {mat.shape[1]}, expected {expected_dim}"
            )
        if mat.min() < 0.0:
            raise ExportError(
                f"track {track.track_id!r}: negative activations from a ReLU backbone "
                f"(min {mat.min():.3g})"
            )
        rows.append(mat)
        records.append(
            (track.track_id, track.vehicle_id, track.camera_id, row_start, mat.shape[0])
        )
        row_start += mat.shape[0]

    all_rows = np.concatenate(rows, axis=0)
    write_features(out_features, all_rows)
    write_manifest(out_manifest, records)
    return {
        "backbone": backbone,
        "dimension": expected_dim,
        "n_tracks": len(records),
        "n_images": int(all_rows.shape[0]),
    }
