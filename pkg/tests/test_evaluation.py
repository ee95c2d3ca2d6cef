import numpy as np
import pytest
from hypothesis import given, strategies as st

from trackreid import (
    DataError,
    DistanceSpec,
    ExclusionPolicy,
    Gallery,
    Query,
    RankedList,
    TrackFeatures,
    average_precision,
    cmc,
    evaluate,
    generate_synthetic,
    queries_from_gallery,
    rank_from_distances,
    rank_gallery,
)
from conftest import random_gallery
import reference


def _gallery_of_vectors(pairs, f=2):
    """pairs: list of (vehicle_id, vector); one single-image track each."""
    tracks = [
        TrackFeatures(
            track_id=f"t{i:02d}",
            vehicle_id=vid,
            camera_id=f"c{i:02d}",
            matrix=np.array(vec, dtype=float).reshape(f, -1),
        )
        for i, (vid, vec) in enumerate(pairs)
    ]
    return Gallery.from_tracks(tracks)


class TestRankGallery:
    def test_exact_duplicate_ranks_first_with_zero_distance(self, rng):
        m = rng.random((4, 3))
        g = Gallery.from_tracks(
            [
                TrackFeatures("a", "v1", "c0", rng.random((4, 2))),
                TrackFeatures("b", "v2", "c1", m),
                TrackFeatures("c", "v3", "c2", rng.random((4, 2)) + 2.0),
            ]
        )
        q = Query.full_track(m)  # external query, no self to exclude
        ranked = rank_gallery(q, g, DistanceSpec("med", "min"))
        assert ranked.entries[0] == ("b", 0.0)

    def test_self_track_excluded(self, rng):
        g = random_gallery(rng, n_tracks=4)
        q = Query.from_track(g.tracks[2])
        ranked = rank_gallery(q, g, DistanceSpec("med", "min"))
        assert "t002" not in ranked.track_ids()
        assert len(ranked) == 3

    def test_gallery_query_requires_self_exclusion(self, rng):
        g = random_gallery(rng, n_tracks=3)
        q = Query.from_track(g.tracks[0])
        policy = ExclusionPolicy(exclude_self_track=False)
        with pytest.raises(DataError, match="exclude_self_track"):
            rank_gallery(q, g, DistanceSpec("med", "min"), policy)

    def test_external_query_may_keep_everything(self, rng):
        g = random_gallery(rng, n_tracks=3)
        q = Query.full_track(rng.random((g.dimension, 2)))
        policy = ExclusionPolicy(exclude_self_track=False, exclude_same_camera_same_vehicle=False)
        assert len(rank_gallery(q, g, DistanceSpec("med", "min"), policy)) == 3

    def test_empty_admitted_set_is_an_error(self):
        g = _gallery_of_vectors([("v0", [1.0, 0.0])])
        q = Query.from_track(g.tracks[0])
        with pytest.raises(DataError, match="admitted"):
            rank_gallery(q, g, DistanceSpec("med", "min"))

    @pytest.mark.parametrize(
        "spec",
        [
            DistanceSpec("med", "mean50"),
            DistanceSpec("mcd", "min"),
            DistanceSpec("rscr"),
            DistanceSpec("krbf"),
            DistanceSpec("kcos"),
        ],
    )
    def test_order_matches_naive_recomputation(self, rng, spec):
        g = random_gallery(rng, n_tracks=5, f=6, max_images=4)
        q = Query.from_track(g.tracks[0])
        ranked = rank_gallery(q, g, spec, ExclusionPolicy(True, False))
        naive = reference.naive_rank(
            q.features,
            "full_track",
            [(t.track_id, t.matrix) for t in g.tracks if t.track_id != "t000"],
            spec.family,
            aggregation=spec.aggregation,
            alpha=spec.alpha,
        )
        assert ranked.track_ids() == tuple(tid for tid, _ in naive)

    def test_ties_break_by_ascending_track_id(self):
        ranked = rank_from_distances(["z", "m", "a"], [0.5, 0.5, 0.5])
        assert ranked.track_ids() == ("a", "m", "z")

    def test_monotone_transform_leaves_ranking_unchanged(self, rng):
        ids = [f"t{i}" for i in range(8)]
        d = rng.random(8)
        base = rank_from_distances(ids, d).track_ids()
        for transform in (lambda x: 2.0 * x + 1.0, np.sqrt, lambda x: x**3):
            assert rank_from_distances(ids, transform(d)).track_ids() == base


class TestAveragePrecision:
    def _ranked(self, n):
        return RankedList(entries=tuple((f"t{i:02d}", float(i)) for i in range(n)))

    def _gallery(self, relevant_positions, n, vehicle="v"):
        pairs = []
        for i in range(n):
            vid = vehicle if (i + 1) in relevant_positions else f"other{i}"
            pairs.append((vid, [float(i), 1.0]))
        return _gallery_of_vectors(pairs)

    def test_perfect_ranking_gives_one(self):
        g = self._gallery({1, 2}, 5)
        assert average_precision(self._ranked(5), "v", g) == 1.0

    def test_positions_one_and_three(self):
        g = self._gallery({1, 3}, 6)
        assert average_precision(self._ranked(6), "v", g) == pytest.approx(5.0 / 6.0, abs=1e-12)

    def test_single_relevant_closed_form(self):
        for r in range(1, 7):
            g = self._gallery({r}, 8)
            assert average_precision(self._ranked(8), "v", g) == pytest.approx(1.0 / r, abs=1e-12)

    def test_no_relevant_raises(self):
        g = self._gallery(set(), 4)
        with pytest.raises(DataError):
            average_precision(self._ranked(4), "v", g)

    @given(st.lists(st.booleans(), min_size=1, max_size=20).filter(any))
    def test_in_unit_interval_and_matches_reference(self, flags):
        g = self._gallery({i + 1 for i, f in enumerate(flags) if f}, len(flags))
        ap = average_precision(self._ranked(len(flags)), "v", g)
        assert 0.0 < ap <= 1.0
        assert ap == pytest.approx(reference.naive_average_precision(flags), abs=1e-12)
        n_gt = sum(flags)
        assert (ap == 1.0) == all(flags[:n_gt])


class TestCmc:
    def _setup(self, first_ranks, n):
        """Build ranked lists whose first relevant track sits at the given rank."""
        g = _gallery_of_vectors([(f"v{i}", [float(i), 1.0]) for i in range(n)])
        lists, truths = [], []
        for r in first_ranks:
            entries = tuple((f"t{i:02d}", float(i)) for i in range(n))
            lists.append(RankedList(entries=entries))
            truths.append(f"v{r - 1}" if r is not None else "nothing")
        return lists, truths, g

    def test_all_first_gives_all_ones(self):
        lists, truths, g = self._setup([1, 1, 1], 4)
        np.testing.assert_array_equal(cmc(lists, truths, g, 4), np.ones(4))

    def test_handworked_two_queries(self):
        lists, truths, g = self._setup([1, 3], 6)
        np.testing.assert_allclose(cmc(lists, truths, g, 5), [0.5, 0.5, 1.0, 1.0, 1.0])

    def test_saturates_beyond_list_length(self):
        lists, truths, g = self._setup([2], 3)
        curve = cmc(lists, truths, g, 10)
        np.testing.assert_array_equal(curve[2:], np.ones(8))

    @given(st.lists(st.integers(min_value=1, max_value=30), min_size=1, max_size=15))
    def test_monotone_nondecreasing(self, ranks):
        curve = np.array(reference.naive_cmc(ranks, 30, len(ranks)))
        assert np.all(np.diff(curve) >= 0.0)
        lists, truths, g = self._setup(ranks, 31)
        np.testing.assert_allclose(cmc(lists, truths, g, 30), curve)


class TestEvaluate:
    def test_separable_synthetic_is_perfect(self):
        g = generate_synthetic(6, 2, (2, 4), 16, 1.0, 0.005, seed=1)
        for spec in (DistanceSpec("med", "min"), DistanceSpec("mcd", "mean50")):
            report = evaluate(g, queries_from_gallery(g, "t2tp"), spec)
            assert report.map == 1.0
            assert report.rank_k[1] == 1.0

    def test_single_query_relevant_at_position_two(self):
        # ranked gallery for the external query (1,0): t00 at 0.1 (wrong),
        # t01 at 0.2 (right), then two far wrong tracks
        g = _gallery_of_vectors(
            [("w1", [0.9, 0.0]), ("mine", [0.8, 0.0]), ("w2", [3.0, 0.0]), ("w3", [4.0, 0.0])]
        )
        q = Query.single_image([1.0, 0.0], vehicle_id="mine")
        report = evaluate(g, [q], DistanceSpec("med", "min"))
        assert report.map == pytest.approx(0.5, abs=1e-12)
        assert report.rank_k[1] == 0.0
        assert report.rank_k[5] == 1.0

    def test_queries_without_relevant_tracks_are_skipped(self, rng):
        g = random_gallery(rng, n_tracks=4, n_vehicles=4)  # each vehicle unique
        queries = queries_from_gallery(g, "t2tp")
        queries = [q for q in queries[:2]] + [
            Query.full_track(rng.random((g.dimension, 2)), vehicle_id="v001", source_track_id=None)
        ]
        report = evaluate(g, queries, DistanceSpec("med", "min"))
        assert set(report.skipped_queries) == {"t000", "t001"}
        assert report.n_queries == 1

    def test_requires_ground_truth(self, rng):
        g = random_gallery(rng, n_tracks=3)
        q = Query.full_track(rng.random((g.dimension, 1)))
        with pytest.raises(DataError, match="vehicle_id"):
            evaluate(g, [q], DistanceSpec("med", "min"))

    def test_permutation_invariance(self, rng):
        g = generate_synthetic(4, 2, (1, 3), 8, 1.0, 0.2, seed=3)
        spec = DistanceSpec("mcd", "min")
        r1 = evaluate(g, queries_from_gallery(g, "t2tp"), spec)
        perm = list(rng.permutation(len(g)))
        g2 = Gallery.from_tracks([g.tracks[i] for i in perm])
        r2 = evaluate(g2, queries_from_gallery(g2, "t2tp"), spec)
        assert r1.map == r2.map
        assert dict(r1.per_query_ap) == dict(r2.per_query_ap)
        assert r1.cmc_curve == r2.cmc_curve

    def test_thread_count_does_not_change_report(self):
        g = generate_synthetic(5, 2, (2, 4), 12, 1.0, 0.3, seed=9)
        queries = queries_from_gallery(g, "t2tp")
        spec = DistanceSpec("mcd", "mean50")
        a = evaluate(g, queries, spec, threads=1)
        b = evaluate(g, queries, spec, threads=4)
        assert a.to_json() == b.to_json()

    def test_evaluation_never_mutates_features(self):
        g = generate_synthetic(4, 2, (2, 3), 8, 1.0, 0.1, seed=5)
        before = g.feature_digest()
        for family, agg in (("med", "min"), ("mcd", "mean50"), ("rscr", None), ("krbf", None)):
            evaluate(g, queries_from_gallery(g, "t2tp"), DistanceSpec(family, agg))
        assert g.feature_digest() == before

    def test_report_invariants(self, rng):
        g = generate_synthetic(5, 2, (1, 4), 8, 1.0, 0.6, seed=8)
        report = evaluate(g, queries_from_gallery(g, "i2tp"), DistanceSpec("mcd", "min"))
        curve = np.array(report.cmc_curve)
        assert np.all(np.diff(curve) >= 0.0)
        assert report.rank_k[1] <= report.rank_k[5]
        aps = [ap for _, ap in report.per_query_ap]
        assert report.map == pytest.approx(float(np.mean(aps)), abs=1e-12)
        d = report.to_dict()
        assert set(d) == {
            "map", "rank_1", "rank_5", "cmc", "per_query_ap", "skipped_queries", "n_queries",
        }

    def test_i2tp_query_selection_modes(self, rng):
        g = random_gallery(rng, n_tracks=4, max_images=4)
        first = queries_from_gallery(g, "i2tp", image_selection="first")
        assert all(q.image_count == 1 for q in first)
        np.testing.assert_array_equal(first[0].features[:, 0], g.tracks[0].matrix[:, 0])
        r1 = queries_from_gallery(g, "i2tp", image_selection="random", seed=4)
        r2 = queries_from_gallery(g, "i2tp", image_selection="random", seed=4)
        for a, b in zip(r1, r2):
            np.testing.assert_array_equal(a.features, b.features)
        manifest = {t.track_id: t.image_count - 1 for t in g.tracks}
        qs = queries_from_gallery(g, "i2tp", image_selection="manifest", image_manifest=manifest)
        np.testing.assert_array_equal(qs[1].features[:, 0], g.tracks[1].matrix[:, -1])
        with pytest.raises(DataError):
            queries_from_gallery(g, "i2tp", image_selection="manifest", image_manifest={})

    def test_full_pipeline_matches_bruteforce_small_gallery(self, rng):
        g = random_gallery(rng, n_tracks=8, f=5, max_images=3, n_vehicles=3)
        queries = queries_from_gallery(g, "t2tp")
        for spec in (DistanceSpec("med", "median"), DistanceSpec("mcd", "mean"), DistanceSpec("rscr")):
            report = evaluate(g, queries, spec, ExclusionPolicy(True, False))
            aps = {}
            ranks = {}
            for q in queries:
                tracks = [
                    (t.track_id, t.matrix) for t in g.tracks if t.track_id != q.source_track_id
                ]
                naive = reference.naive_rank(
                    q.features, "full_track", tracks, spec.family,
                    aggregation=spec.aggregation, alpha=spec.alpha,
                )
                flags = [g.by_id(tid).vehicle_id == q.vehicle_id for tid, _ in naive]
                if not any(flags):
                    continue
                aps[q.source_track_id] = reference.naive_average_precision(flags)
                ranks[q.source_track_id] = flags.index(True) + 1
            got = dict(report.per_query_ap)
            assert set(got) == set(aps)
            for qid in aps:
                assert got[qid] == pytest.approx(aps[qid], abs=1e-12)
            want_cmc = reference.naive_cmc(list(ranks.values()), 50, len(ranks))
            np.testing.assert_allclose(report.cmc_curve, want_cmc, atol=1e-15)
