"""The on-disk contract: LRF1 feature files and JSON-lines manifests.

Writes a gallery to disk, inspects the binary header, shows the manifest
records, and demonstrates that load -> save round-trips are byte
identical (the property any independent exporter has to hit).
"""

import struct
import tempfile
from pathlib import Path

from trackreid import (
    generate_synthetic,
    load_gallery,
    read_manifest,
    save_gallery,
)

gallery = generate_synthetic(3, 2, (2, 4), 8, 1.0, 0.05, seed=99)
workdir = Path(tempfile.mkdtemp(prefix="trackreid-demo-"))
fpath, mpath = workdir / "gallery.lrf1", workdir / "gallery.jsonl"
save_gallery(gallery, fpath, mpath)

raw = fpath.read_bytes()
magic, version, dim, rows = struct.unpack("<4sIIQ", raw[:20])
print(f"feature file: {fpath}")
print(f"  magic={magic!r} version={version} dimension={dim} rows={rows}")
print(f"  payload bytes={len(raw) - 20} (= rows x dim x 4 = {rows * dim * 4})")
print()

print("manifest records (one JSON line per track):")
for rec in read_manifest(mpath):
    print(
        f"  {rec.track_id}: vehicle={rec.vehicle_id} camera={rec.camera_id} "
        f"rows [{rec.row_start}, {rec.row_start + rec.row_count})"
    )
print()

loaded = load_gallery(fpath, mpath)
print(f"loaded {len(loaded)} tracks; feature digest {loaded.feature_digest()[:16]}...")
f2, m2 = workdir / "again.lrf1", workdir / "again.jsonl"
save_gallery(loaded, f2, m2)
print(f"load -> save byte-identical: features={f2.read_bytes() == raw} "
      f"manifest={m2.read_bytes() == mpath.read_bytes()}")
