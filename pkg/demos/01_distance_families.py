"""Tour of the distance families on a tiny hand-built gallery.

Builds three gallery tracks with controlled geometry and walks through
what each metric family sees: the minimum Euclidean distance reacts to
activation scale, the minimum cosine distance only to direction, the
sparse reconstruction residual to how well a track's images span the
query, and the kernel distances to the whole image sets at once.
"""

import numpy as np

from trackreid import (
    DistanceSpec,
    Gallery,
    Query,
    TrackFeatures,
    mcd_i2t,
    med_i2t,
    rscr_i2t,
    track_distance,
)

rng = np.random.default_rng(7)

f = 16
direction = rng.random(f) + 0.2

# track A: same direction as the query at half the activation scale
# track B: the query's direction plus a strong orthogonal component
# track C: an unrelated direction
ortho = rng.random(f)
ortho -= (ortho @ direction) / (direction @ direction) * direction
tracks = Gallery.from_tracks(
    [
        TrackFeatures("A", "v0", "c0", np.column_stack([0.5 * direction, 0.48 * direction])),
        TrackFeatures("B", "v1", "c0", np.column_stack([direction + 2.0 * ortho])),
        TrackFeatures("C", "v2", "c0", rng.random((f, 3)) * 0.1 + 1.0),
    ]
)
query = direction.copy()

print("image-to-track distances for a query pointing along track A's direction")
print(f"{'track':<6} {'MED':>10} {'MCD':>10} {'RSCR':>10}")
for t in tracks.tracks:
    print(
        f"{t.track_id:<6} {med_i2t(query, t):>10.4f} "
        f"{mcd_i2t(query, t):>10.4f} {rscr_i2t(query, t, alpha=1.0):>10.4f}"
    )
print()
print("the query points exactly along track A's direction, yet MED stays well")
print("above zero because of the activation-scale gap; MCD and RSCR land at")
print("their direction-match floors (0 and the alpha=1 soft-threshold residue).")
print()

# scaling the query changes MED but neither MCD nor RSCR
for c in (1.0, 10.0):
    scaled = c * query
    print(
        f"query x{c:>4.1f}:  MED(A) = {med_i2t(scaled, tracks.by_id('A')):8.4f}   "
        f"MCD(A) = {mcd_i2t(scaled, tracks.by_id('A')):8.4f}   "
        f"RSCR(A) = {rscr_i2t(scaled, tracks.by_id('A')):8.4f}"
    )
print()

# track-to-track: a multi-image query against each track, one line per family
Q = Query.full_track(np.column_stack([query, query * 0.9 + 0.05 * ortho, query * 1.1]))
print("track-to-track distances (3-image query)")
specs = [
    DistanceSpec("med", "min"),
    DistanceSpec("med", "mean50"),
    DistanceSpec("mcd", "min"),
    DistanceSpec("mcd", "mean50"),
    DistanceSpec("rscr"),
    DistanceSpec("krbf"),
    DistanceSpec("kcos"),
]
header = " ".join(f"{s.label:>10}" for s in specs)
print(f"{'track':<6} {header}")
for t in tracks.tracks:
    row = " ".join(f"{track_distance(Q, t, s):>10.4f}" for s in specs)
    print(f"{t.track_id:<6} {row}")
print()
print("the kernel distances compare whole image sets: with only one image,")
print("track B pays a size penalty against the 3-image query even where its")
print("single image is close.")
