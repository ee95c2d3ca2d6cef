"""Domain model: latent vectors, tracks, galleries, queries and rankings.

A latent vector is a plain 1-D ``float64`` ndarray of length ``f`` (the
latent-space dimension). A track stacks the vectors of its images as the
columns of an ``f x N`` matrix. Galleries are immutable: every matrix is
stored read-only and all query/evaluation operations are pure reads, so a
gallery can be shared freely across worker threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DataError, ZeroNormError

FAMILIES = ("med", "mcd", "rscr", "krbf", "kcos")
AGGREGATIONS = ("min", "mean", "median", "mean50", "med50")
# families whose track-to-track distance is intrinsic (no aggregation step)
SET_LEVEL_FAMILIES = ("rscr", "krbf", "kcos")

SINGLE_IMAGE = "single_image"
FULL_TRACK = "full_track"

_AGG_ALIASES = {"med": "median", "not_applicable": None}


def _frozen_matrix(values, *, name: str = "matrix") -> np.ndarray:
    """Coerce to a read-only float64 2-D array with f >= 1 rows, N >= 1 columns."""
    arr = np.array(values, dtype=np.float64, order="C")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TrackFeatures:
    """One camera's track: the f x N column-stacked latent vectors plus labels."""

    track_id: str
    vehicle_id: str
    camera_id: str
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen_matrix(self.matrix, name=f"track {self.track_id!r}"))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def image_count(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class Gallery:
    """Immutable ordered collection of tracks sharing one latent dimension.

    Use :meth:`from_tracks` to build a checked gallery. Batch helpers
    (stacked columns, per-track offsets, label arrays) are computed lazily
    and cached; they never mutate the underlying feature data.
    """

    tracks: tuple[TrackFeatures, ...]
    dimension: int

    @classmethod
    def from_tracks(cls, tracks) -> "Gallery":
        tracks = tuple(tracks)
        if not tracks:
            raise DataError("gallery must contain at least one track")
        dim = tracks[0].dimension
        seen = set()
        for t in tracks:
            if t.dimension != dim:
                raise DataError(
                    f"track {t.track_id!r} has dimension {t.dimension}, expected {dim}"
                )
            if t.track_id in seen:
                raise DataError(f"duplicate track_id {t.track_id!r}")
            seen.add(t.track_id)
        return cls(tracks=tracks, dimension=dim)

    def __len__(self) -> int:
        return len(self.tracks)

    @cached_property
    def track_ids(self) -> tuple[str, ...]:
        return tuple(t.track_id for t in self.tracks)

    @cached_property
    def vehicle_ids(self) -> np.ndarray:
        return np.array([t.vehicle_id for t in self.tracks])

    @cached_property
    def camera_ids(self) -> np.ndarray:
        return np.array([t.camera_id for t in self.tracks])

    @cached_property
    def _index(self) -> dict:
        return {t.track_id: i for i, t in enumerate(self.tracks)}

    def position(self, track_id: str) -> int:
        try:
            return self._index[track_id]
        except KeyError:
            raise DataError(f"unknown track_id {track_id!r}") from None

    def by_id(self, track_id: str) -> TrackFeatures:
        return self.tracks[self.position(track_id)]

    @cached_property
    def columns(self) -> np.ndarray:
        """All image vectors concatenated column-wise, shape (f, total_images)."""
        cols = np.concatenate([t.matrix for t in self.tracks], axis=1)
        cols.setflags(write=False)
        return cols

    @cached_property
    def column_offsets(self) -> np.ndarray:
        """Start index of each track's column block; length n_tracks + 1."""
        counts = np.array([t.image_count for t in self.tracks], dtype=np.intp)
        return np.concatenate([[0], np.cumsum(counts)])

    @cached_property
    def column_sqnorms(self) -> np.ndarray:
        out = np.einsum("ij,ij->j", self.columns, self.columns)
        out.setflags(write=False)
        return out

    @cached_property
    def unit_columns(self) -> np.ndarray:
        """Columns scaled to unit L2 norm; raises if any image vector has zero norm."""
        norms = np.sqrt(self.column_sqnorms)
        if np.any(norms == 0.0):
            bad = int(np.argmax(norms == 0.0))
            track = int(np.searchsorted(self.column_offsets, bad, side="right") - 1)
            raise ZeroNormError(
                f"track {self.tracks[track].track_id!r} contains a zero-norm image vector"
            )
        out = self.columns / norms
        out.setflags(write=False)
        return out

    def feature_digest(self) -> str:
        """SHA-256 over all feature bytes; used to assert read-only behaviour."""
        h = hashlib.sha256()
        for t in self.tracks:
            h.update(np.ascontiguousarray(t.matrix).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Query:
    """A probe: either one image (f x 1) or a whole track (f x N_q)."""

    kind: str
    features: np.ndarray
    vehicle_id: str | None = None
    camera_id: str | None = None
    source_track_id: str | None = None

    def __post_init__(self):
        if self.kind not in (SINGLE_IMAGE, FULL_TRACK):
            raise DataError(f"unknown query kind {self.kind!r}")
        object.__setattr__(self, "features", _frozen_matrix(self.features, name="query"))
        if self.kind == SINGLE_IMAGE and self.features.shape[1] != 1:
            raise DataError(
                f"single-image query must have exactly one column, got {self.features.shape[1]}"
            )

    @property
    def dimension(self) -> int:
        return self.features.shape[0]

    @property
    def image_count(self) -> int:
        return self.features.shape[1]

    @classmethod
    def single_image(cls, vector, **labels) -> "Query":
        return cls(kind=SINGLE_IMAGE, features=np.asarray(vector, dtype=np.float64).reshape(-1, 1), **labels)

    @classmethod
    def full_track(cls, matrix, **labels) -> "Query":
        return cls(kind=FULL_TRACK, features=matrix, **labels)

    @classmethod
    def from_track(cls, track: TrackFeatures, image_index: int | None = None) -> "Query":
        """Turn a gallery track into a probe; pick one image for I2TP use."""
        labels = dict(
            vehicle_id=track.vehicle_id,
            camera_id=track.camera_id,
            source_track_id=track.track_id,
        )
        if image_index is None:
            return cls.full_track(track.matrix, **labels)
        if not 0 <= image_index < track.image_count:
            raise DataError(
                f"image index {image_index} out of range for track {track.track_id!r} "
                f"({track.image_count} images)"
            )
        return cls.single_image(track.matrix[:, image_index], **labels)


def normalize_aggregation(aggregation: str | None) -> str | None:
    if aggregation is None:
        return None
    agg = _AGG_ALIASES.get(aggregation, aggregation)
    if agg is not None and agg not in AGGREGATIONS:
        raise DataError(f"unknown aggregation {aggregation!r}; expected one of {AGGREGATIONS}")
    return agg


@dataclass(frozen=True)
class DistanceSpec:
    """A fully-resolved metric choice: family, aggregation and hyperparameters.

    ``aggregation`` only applies to med/mcd on track queries; rscr and the
    kernel distances are intrinsically track-level. ``gamma=None`` means the
    RBF default spread 1/f, resolved against the gallery dimension at use.
    """

    family: str
    aggregation: str | None = None
    alpha: float = 1.0
    gamma: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown metric family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "aggregation", normalize_aggregation(self.aggregation))
        if self.family in SET_LEVEL_FAMILIES and self.aggregation is not None:
            raise DataError(f"{self.family} is track-level; aggregation does not apply")
        if not 0.0 <= self.alpha <= 1.0:
            raise DataError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.gamma is not None and not self.gamma > 0.0:
            raise DataError(f"gamma must be positive, got {self.gamma}")

    def resolved_gamma(self, dimension: int) -> float:
        return self.gamma if self.gamma is not None else 1.0 / float(dimension)

    @property
    def label(self) -> str:
        """Row label in the usual notation, e.g. mean50MCD, minMED, RSCR."""
        if self.family in SET_LEVEL_FAMILIES or self.aggregation is None:
            return self.family.upper()
        short = "med" if self.aggregation == "median" else self.aggregation
        return f"{short}{self.family.upper()}"


@dataclass(frozen=True)
class RankedList:
    """Gallery tracks ordered nearest-first: (track_id, distance) pairs.

    Ties on distance are broken by ascending track_id so rankings are
    deterministic regardless of gallery order or thread count.
    """

    entries: tuple[tuple[str, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def track_ids(self) -> tuple[str, ...]:
        return tuple(tid for tid, _ in self.entries)

    def distances(self) -> np.ndarray:
        return np.array([d for _, d in self.entries], dtype=np.float64)

    def top(self, k: int) -> tuple[tuple[str, float], ...]:
        return self.entries[:k]


@dataclass(frozen=True)
class Violation:
    """One broken gallery invariant, naming the offending track and rule."""

    track_id: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        msg = f"[{self.rule}] track {self.track_id!r}"
        return f"{msg}: {self.detail}" if self.detail else msg


def validate_gallery(gallery: Gallery, *, allow_negative: bool = False) -> list[Violation]:
    """Diagnose a gallery against the model invariants.

    Returns an empty list iff the gallery is well-formed: uniform dimension,
    unique track ids, finite values and (unless ``allow_negative``)
    non-negative activations. Purely diagnostic; never raises.
    """
    violations: list[Violation] = []
    seen: set[str] = set()
    for t in gallery.tracks:
        if t.track_id in seen:
            violations.append(Violation(t.track_id, "duplicate-track-id"))
        seen.add(t.track_id)
        if t.dimension != gallery.dimension:
            violations.append(
                Violation(
                    t.track_id,
                    "dimension-mismatch",
                    f"dimension {t.dimension} != gallery dimension {gallery.dimension}",
                )
            )
        if t.image_count < 1:
            violations.append(Violation(t.track_id, "empty-track"))
        if not np.all(np.isfinite(t.matrix)):
            violations.append(Violation(t.track_id, "non-finite", "matrix contains NaN or Inf"))
        elif not allow_negative and np.any(t.matrix < 0.0):
            violations.append(
                Violation(t.track_id, "negative-values", f"min value {t.matrix.min():.6g}")
            )
    return violations
