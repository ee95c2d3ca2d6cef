"""Re-identification protocol: per-query ranking, AP/mAP and CMC.

For every query the gallery tracks admitted by the exclusion policy are
ranked nearest-first (ties broken by ascending track_id). Average
precision for one query is

    AP = (1/N_gt) * sum over ranks k of rel(k) * precision@k

with N_gt the number of relevant (same-vehicle) tracks in the admitted
list; mAP is the mean AP over all queries that have at least one
relevant track. Queries with none are skipped and reported, never
counted as AP = 0. The CMC curve's entry k is the fraction of queries
whose first relevant track appears within the top k.

Per-query work is independent and may run on a thread pool; results are
assembled in query order, so reports are bitwise identical for any
thread count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .metrics import GalleryScorer
from .tracks import DistanceSpec, Gallery, Query, RankedList

FULL_CURVE_DEFAULT = 50


@dataclass(frozen=True)
class ExclusionPolicy:
    """Which gallery tracks are removed from a query's ranking.

    Self-track exclusion is mandatory whenever the query originates from a
    gallery track (rank-1 would be trivially perfect otherwise); excluding
    same-camera sightings of the same vehicle restricts scoring to
    cross-camera matches, the usual re-identification convention.
    """

    exclude_self_track: bool = True
    exclude_same_camera_same_vehicle: bool = True


@dataclass(frozen=True)
class EvalReport:
    """Evaluation outcome: mAP, CMC curve, per-query APs and skipped queries."""

    map: float
    rank_k: dict
    per_query_ap: tuple
    cmc_curve: tuple
    n_queries: int
    skipped_queries: tuple

    def to_dict(self) -> dict:
        k_max = len(self.cmc_curve)
        return {
            "map": self.map,
            "rank_1": self.cmc_curve[0] if k_max else 0.0,
            "rank_5": self.cmc_curve[min(5, k_max) - 1] if k_max else 0.0,
            "cmc": list(self.cmc_curve),
            "per_query_ap": [[qid, ap] for qid, ap in self.per_query_ap],
            "skipped_queries": list(self.skipped_queries),
            "n_queries": self.n_queries,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        d = self.to_dict()
        lines = [
            f"map: {d['map']:.6f}",
            f"rank_1: {d['rank_1']:.6f}",
            f"rank_5: {d['rank_5']:.6f}",
            f"n_queries: {d['n_queries']}",
            f"n_skipped: {len(d['skipped_queries'])}",
        ]
        return "\n".join(lines) + "\n"


def _require_self_exclusion(query: Query, gallery: Gallery, policy: ExclusionPolicy) -> None:
    if (
        query.source_track_id is not None
        and not policy.exclude_self_track
        and query.source_track_id in gallery._index
    ):
        raise DataError(
            "queries drawn from the gallery require exclude_self_track "
            "(their own track would trivially rank first)"
        )


def admitted_mask(query: Query, gallery: Gallery, policy: ExclusionPolicy) -> np.ndarray:
    """Boolean mask over gallery tracks admitted for this query's ranking."""
    mask = np.ones(len(gallery), dtype=bool)
    if policy.exclude_self_track and query.source_track_id is not None:
        pos = gallery._index.get(query.source_track_id)
        if pos is not None:
            mask[pos] = False
    if (
        policy.exclude_same_camera_same_vehicle
        and query.vehicle_id is not None
        and query.camera_id is not None
    ):
        mask &= ~(
            (gallery.vehicle_ids == query.vehicle_id)
            & (gallery.camera_ids == query.camera_id)
        )
    return mask


def rank_from_distances(track_ids, distances) -> RankedList:
    """Order tracks ascending by distance, ties by ascending track_id."""
    ids = np.asarray(track_ids)
    d = np.asarray(distances, dtype=np.float64)
    order = np.lexsort((ids, d))
    return RankedList(entries=tuple((str(ids[i]), float(d[i])) for i in order))


def rank_gallery(
    query: Query,
    gallery: Gallery,
    spec: DistanceSpec,
    policy: ExclusionPolicy = ExclusionPolicy(),
    scorer: GalleryScorer | None = None,
) -> RankedList:
    """Rank every admitted gallery track for one query, nearest first."""
    _require_self_exclusion(query, gallery, policy)
    if scorer is None:
        scorer = GalleryScorer(gallery, spec)
    dist = scorer.distances(query)
    mask = admitted_mask(query, gallery, policy)
    if not np.any(mask):
        raise DataError("no gallery tracks admitted after exclusion")
    ids = np.array(gallery.track_ids)
    return rank_from_distances(ids[mask], dist[mask])


def average_precision(ranked: RankedList, ground_truth_vehicle: str, gallery: Gallery) -> float:
    """Average precision of one ranked list against a ground-truth vehicle id."""
    rel = np.array(
        [gallery.by_id(tid).vehicle_id == ground_truth_vehicle for tid, _ in ranked.entries],
        dtype=bool,
    )
    n_gt = int(rel.sum())
    if n_gt == 0:
        raise DataError(
            f"no relevant track for vehicle {ground_truth_vehicle!r} in the ranked list"
        )
    return _ap_from_relevance(rel, n_gt)


def _ap_from_relevance(rel: np.ndarray, n_gt: int) -> float:
    positions = np.arange(1, rel.size + 1, dtype=np.float64)
    precision_at = np.cumsum(rel) / positions
    return float(precision_at[rel].sum() / n_gt)


def first_match_rank(rel: np.ndarray) -> int | None:
    hits = np.flatnonzero(rel)
    return int(hits[0]) + 1 if hits.size else None


def cmc(ranked_lists, ground_truth_vehicles, gallery: Gallery, max_rank: int) -> np.ndarray:
    """Cumulative matching characteristic curve over a set of ranked lists.

    Entry k-1 is the fraction of queries whose first relevant track sits at
    position <= k. Queries with no relevant track contribute zero at every
    rank.
    """
    if max_rank < 1:
        raise DataError(f"max_rank must be >= 1, got {max_rank}")
    ranks = []
    for ranked, truth in zip(ranked_lists, ground_truth_vehicles):
        rel = np.array(
            [gallery.by_id(tid).vehicle_id == truth for tid, _ in ranked.entries], dtype=bool
        )
        ranks.append(first_match_rank(rel))
    return _cmc_from_ranks(ranks, max_rank, len(ranks))


def _cmc_from_ranks(first_ranks, max_rank: int, n_queries: int) -> np.ndarray:
    if n_queries == 0:
        raise DataError("cannot compute a CMC curve over zero queries")
    counts = np.zeros(max_rank)
    for r in first_ranks:
        if r is not None and r <= max_rank:
            counts[r - 1] += 1
        # a first match beyond max_rank (or none at all) adds nothing
    return np.cumsum(counts) / n_queries


def queries_from_gallery(
    gallery: Gallery,
    mode: str,
    image_selection: str = "first",
    seed: int = 0,
    image_manifest: dict | None = None,
) -> list[Query]:
    """Build the query set for the protocol: every gallery track probes the rest.

    t2tp uses each whole track; i2tp picks one image per track, chosen by
    the first-image rule, a seeded random draw, or an explicit manifest
    mapping track_id -> image index.
    """
    if mode not in ("i2tp", "t2tp"):
        raise DataError(f"unknown mode {mode!r}; expected 'i2tp' or 't2tp'")
    if mode == "t2tp":
        return [Query.from_track(t) for t in gallery.tracks]
    if image_selection == "first":
        return [Query.from_track(t, image_index=0) for t in gallery.tracks]
    if image_selection == "random":
        rng = np.random.default_rng(seed)
        return [
            Query.from_track(t, image_index=int(rng.integers(t.image_count)))
            for t in gallery.tracks
        ]
    if image_selection == "manifest":
        if image_manifest is None:
            raise DataError("image_selection='manifest' requires an image manifest")
        queries = []
        for t in gallery.tracks:
            if t.track_id not in image_manifest:
                raise DataError(f"query manifest is missing track {t.track_id!r}")
            queries.append(Query.from_track(t, image_index=int(image_manifest[t.track_id])))
        return queries
    raise DataError(
        f"unknown image_selection {image_selection!r}; expected first, random or manifest"
    )


def evaluate(
    gallery: Gallery,
    queries,
    spec: DistanceSpec,
    policy: ExclusionPolicy = ExclusionPolicy(),
    max_rank: int = FULL_CURVE_DEFAULT,
    threads: int = 1,
) -> EvalReport:
    """Run the full protocol: rank every query, assemble mAP, CMC and AP lists."""
    queries = list(queries)
    if not queries:
        raise DataError("evaluate requires at least one query")
    for i, q in enumerate(queries):
        if q.vehicle_id is None:
            raise DataError(f"query {i} carries no ground-truth vehicle_id")
        _require_self_exclusion(q, gallery, policy)

    scorer = GalleryScorer(gallery, spec)
    vehicle_ids = gallery.vehicle_ids
    id_array = np.array(gallery.track_ids)

    def one(args):
        i, q = args
        dist = scorer.distances(q)
        mask = admitted_mask(q, gallery, policy)
        if not np.any(mask):
            raise DataError(f"query {i}: no gallery tracks admitted after exclusion")
        idx = np.flatnonzero(mask)
        order = np.lexsort((id_array[idx], dist[idx]))
        rel = (vehicle_ids[idx][order] == q.vehicle_id)
        n_gt = int(rel.sum())
        if n_gt == 0:
            return None, None
        return _ap_from_relevance(rel, n_gt), first_match_rank(rel)

    items = list(enumerate(queries))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]

    per_query = []
    ranks = []
    skipped = []
    for (i, q), (ap, rank) in zip(items, results):
        qid = q.source_track_id if q.source_track_id is not None else f"query{i:05d}"
        if ap is None:
            skipped.append(qid)
        else:
            per_query.append((qid, ap))
            ranks.append(rank)
    if not per_query:
        raise DataError("every query was skipped: no relevant gallery tracks at all")

    curve = _cmc_from_ranks(ranks, max_rank, len(per_query))
    return EvalReport(
        map=float(np.mean([ap for _, ap in per_query])),
        rank_k={k: float(curve[k - 1]) for k in range(1, max_rank + 1)},
        per_query_ap=tuple(per_query),
        cmc_curve=tuple(float(x) for x in curve),
        n_queries=len(per_query),
        skipped_queries=tuple(skipped),
    )
