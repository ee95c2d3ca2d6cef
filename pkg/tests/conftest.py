import sys
from pathlib import Path

import numpy as np
import pytest

from trackreid import Gallery, TrackFeatures

sys.path.insert(0, str(Path(__file__).parent))  # make `reference` importable


def random_track(rng, track_id, vehicle_id, camera_id, f, n_images):
    return TrackFeatures(
        track_id=track_id,
        vehicle_id=vehicle_id,
        camera_id=camera_id,
        matrix=rng.random((f, n_images)) + 0.05,
    )


def random_gallery(rng, n_tracks=5, f=6, max_images=4, n_vehicles=None):
    if n_vehicles is None:
        n_vehicles = max(2, n_tracks // 2)
    tracks = []
    for i in range(n_tracks):
        tracks.append(
            random_track(
                rng,
                track_id=f"t{i:03d}",
                vehicle_id=f"v{i % n_vehicles:03d}",
                camera_id=f"c{i % 3:02d}",
                f=f,
                n_images=int(rng.integers(1, max_images + 1)),
            )
        )
    return Gallery.from_tracks(tracks)


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)
