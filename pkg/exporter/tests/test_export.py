import numpy as np
import pytest
import torch
from PIL import Image

from lr_exporter import BACKBONE_DIMENSIONS, ExportError, build_feature_extractor, export
from lr_exporter.cli import main


@pytest.fixture(scope="module")
def image_tree(tmp_path_factory):
    """2 vehicles x 2 cameras x 1 track, 2-3 noise images per track."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(5)
    layout = {
        ("veh01", "cam01", "trk0001"): 3,
        ("veh01", "cam02", "trk0002"): 2,
        ("veh02", "cam01", "trk0003"): 2,
        ("veh02", "cam02", "trk0004"): 3,
    }
    for (vehicle, camera, track), n in layout.items():
        d = root / vehicle / camera / track
        d.mkdir(parents=True)
        for i in range(n):
            arr = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
            Image.fromarray(arr).save(d / f"img{i:03d}.png")
    return root


def _export(image_tree, tmp_path, backbone="resnet18", **kw):
    fpath, mpath = tmp_path / "f.lrf1", tmp_path / "m.jsonl"
    summary = export(
        image_tree, backbone=backbone, out_features=fpath, out_manifest=mpath,
        weights="random", seed=1, **kw,
    )
    return fpath, mpath, summary


class TestBackbones:
    @pytest.mark.parametrize("name,dim", sorted(BACKBONE_DIMENSIONS.items()))
    def test_emitted_dimension_and_nonnegativity(self, name, dim):
        model = build_feature_extractor(name, weights="random", seed=0)
        with torch.no_grad():
            y = model(torch.rand(1, 3, 224, 224))
        assert tuple(y.shape) == (1, dim)
        assert float(y.min()) >= 0.0  # extraction point sits behind a ReLU

    def test_unknown_backbone(self):
        with pytest.raises(ValueError, match="unknown backbone"):
            build_feature_extractor("resnet50", weights="random")

    def test_seeded_random_weights_are_reproducible(self):
        a = build_feature_extractor("resnet18", weights="random", seed=7)
        b = build_feature_extractor("resnet18", weights="random", seed=7)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)


class TestExport:
    def test_header_and_manifest_shape(self, image_tree, tmp_path):
        fpath, mpath, summary = _export(image_tree, tmp_path)
        assert summary == {
            "backbone": "resnet18", "dimension": 512, "n_tracks": 4, "n_images": 10,
        }
        head = fpath.read_bytes()[:20]
        assert head[:4] == b"LRF1"
        assert int.from_bytes(head[8:12], "little") == 512
        assert int.from_bytes(head[12:20], "little") == 10
        lines = mpath.read_text().strip().splitlines()
        assert len(lines) == 4
        assert '"track_id": "trk0001"' in lines[0]

    def test_repeated_export_is_bitwise_identical(self, image_tree, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        f1, m1, _ = _export(image_tree, tmp_path / "a")
        f2, m2, _ = _export(image_tree, tmp_path / "b")
        assert f1.read_bytes() == f2.read_bytes()
        assert m1.read_bytes() == m2.read_bytes()

    def test_densenet201_emits_1920_and_parses_cleanly(self, image_tree, tmp_path):
        fpath, mpath, summary = _export(image_tree, tmp_path, backbone="densenet201")
        assert summary["dimension"] == 1920
        trackreid = pytest.importorskip("trackreid")
        gallery = trackreid.load_gallery(fpath, mpath)
        assert trackreid.validate_gallery(gallery) == []
        assert gallery.dimension == 1920
        assert gallery.track_ids == ("trk0001", "trk0002", "trk0003", "trk0004")
        assert [t.vehicle_id for t in gallery.tracks] == ["veh01", "veh01", "veh02", "veh02"]

    def test_engine_evaluates_exported_features(self, image_tree, tmp_path):
        fpath, mpath, _ = _export(image_tree, tmp_path)
        trackreid = pytest.importorskip("trackreid")
        gallery = trackreid.load_gallery(fpath, mpath)
        report = trackreid.evaluate(
            gallery,
            trackreid.queries_from_gallery(gallery, "t2tp"),
            trackreid.DistanceSpec("mcd", "min"),
        )
        assert report.n_queries + len(report.skipped_queries) == 4

    def test_unreadable_image_skipped_with_warning(self, image_tree, tmp_path):
        bad = image_tree / "veh01" / "cam01" / "trk0001" / "imgzzz.png"
        bad.write_bytes(b"not an image at all")
        try:
            with pytest.warns(UserWarning, match="unreadable"):
                _, _, summary = _export(image_tree, tmp_path)
            assert summary["n_images"] == 10  # the broken file contributed nothing
        finally:
            bad.unlink()

    def test_empty_track_is_an_error(self, image_tree, tmp_path):
        empty = image_tree / "veh02" / "cam02" / "trk_empty"
        empty.mkdir()
        try:
            with pytest.raises(ExportError, match="no images"):
                _export(image_tree, tmp_path)
        finally:
            empty.rmdir()

    def test_missing_root_is_an_error(self, tmp_path):
        with pytest.raises(ExportError, match="not a directory"):
            export(tmp_path / "nope", backbone="resnet18",
                   out_features=tmp_path / "f", out_manifest=tmp_path / "m",
                   weights="random")


class TestCli:
    def test_cli_roundtrip(self, image_tree, tmp_path, capsys):
        code = main(
            [
                "--images", str(image_tree),
                "--backbone", "resnet18",
                "--weights", "random",
                "--seed", "1",
                "--out-features", str(tmp_path / "f.lrf1"),
                "--out-manifest", str(tmp_path / "m.jsonl"),
            ]
        )
        assert code == 0
        assert "exported 10 images in 4 tracks (f=512" in capsys.readouterr().out

    def test_cli_export_error_exit_code(self, tmp_path):
        code = main(
            [
                "--images", str(tmp_path / "missing"),
                "--weights", "random",
                "--out-features", str(tmp_path / "f"),
                "--out-manifest", str(tmp_path / "m"),
            ]
        )
        assert code == 3
