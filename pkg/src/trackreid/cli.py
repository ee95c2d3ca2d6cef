"""Command-line interface: synth, evaluate, rank and bench subcommands.

Exit codes: 0 success, 2 usage errors (argparse), 3 data errors
(malformed files, inconsistent manifests, invalid galleries), 4 numerical
errors (zero-norm vectors, solver failures), 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time

import numpy as np

from . import featureio
from .errors import DataError, NumericalError
from .evaluation import ExclusionPolicy, evaluate, queries_from_gallery, rank_gallery
from .metrics import GalleryScorer
from .tracks import DistanceSpec, Query

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

_METRICS = ("med", "mcd", "rscr", "krbf", "kcos")
_AGGS = ("min", "mean", "med", "mean50", "med50")


def _add_gallery_args(p):
    p.add_argument("--features", required=True, help="LRF1 feature file")
    p.add_argument("--manifest", required=True, help="JSON-lines track manifest")
    p.add_argument(
        "--allow-negative",
        action="store_true",
        help="admit negative feature values (non-ReLU backbones); the [0,1] "
        "bound on cosine distances no longer holds",
    )


def _add_metric_args(p):
    p.add_argument("--metric", choices=_METRICS, default="mcd")
    p.add_argument(
        "--agg",
        choices=_AGGS,
        default=None,
        help="aggregation for med/mcd on track queries (ignored by rscr/krbf/kcos)",
    )
    p.add_argument("--alpha", type=float, default=1.0, help="L1 weight for rscr")
    p.add_argument("--gamma", type=float, default=None, help="RBF spread for krbf (default 1/f)")


def _add_query_args(p):
    p.add_argument("--mode", choices=("i2tp", "t2tp"), default="t2tp")
    p.add_argument(
        "--query-select",
        choices=("first", "random", "manifest"),
        default="first",
        help="which image of each track becomes the i2tp query",
    )
    p.add_argument("--query-manifest", default=None, help="JSON-lines track_id/image_index file")
    p.add_argument("--seed", type=int, default=0)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("REID_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DataError(f"REID_THREADS must be an integer, got {env!r}") from None
    return 1


def _spec(args, mode: str) -> DistanceSpec:
    agg = args.agg
    if args.metric in ("med", "mcd"):
        if agg is None:
            agg = "min" if mode == "t2tp" else None
    else:
        agg = None
    return DistanceSpec(family=args.metric, aggregation=agg, alpha=args.alpha, gamma=args.gamma)


def _load_queries(gallery, args):
    manifest = None
    if args.query_select == "manifest":
        if args.query_manifest is None:
            raise DataError("--query-select manifest requires --query-manifest")
        manifest = featureio.read_query_manifest(args.query_manifest)
    return queries_from_gallery(
        gallery,
        mode=args.mode,
        image_selection=args.query_select,
        seed=args.seed,
        image_manifest=manifest,
    )


def cmd_synth(args) -> int:
    gallery = featureio.generate_synthetic(
        n_vehicles=args.vehicles,
        n_cameras=args.cameras,
        images_per_track_range=(args.images[0], args.images[1]),
        f=args.dim,
        cluster_separation=args.separation,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    featureio.save_gallery(gallery, args.out_features, args.out_manifest)
    total = sum(t.image_count for t in gallery.tracks)
    print(
        f"wrote {len(gallery)} tracks ({total} images, f={gallery.dimension}) "
        f"to {args.out_features}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gallery = featureio.load_gallery(
        args.features, args.manifest, allow_negative=args.allow_negative
    )
    queries = _load_queries(gallery, args)
    spec = _spec(args, args.mode)
    policy = ExclusionPolicy(
        exclude_self_track=not args.include_self,
        exclude_same_camera_same_vehicle=not args.include_same_camera,
    )
    report = evaluate(
        gallery,
        queries,
        spec,
        policy=policy,
        max_rank=args.max_rank,
        threads=_threads(args),
    )
    if args.report_json:
        with open(args.report_json, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_json())
    if args.report_txt:
        with open(args.report_txt, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_text())
    if args.cmc_csv:
        with open(args.cmc_csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("k, precision\n")
            for k, p in enumerate(report.cmc_curve, start=1):
                fh.write(f"{k}, {p:.10f}\n")
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_rank(args) -> int:
    gallery = featureio.load_gallery(
        args.features, args.manifest, allow_negative=args.allow_negative
    )
    track = gallery.by_id(args.query_track)
    if args.mode == "i2tp":
        query = Query.from_track(track, image_index=args.query_image)
    else:
        query = Query.from_track(track)
    spec = _spec(args, args.mode)
    policy = ExclusionPolicy(
        exclude_self_track=not args.include_self,
        exclude_same_camera_same_vehicle=not args.include_same_camera,
    )
    ranked = rank_gallery(query, gallery, spec, policy)
    for pos, (tid, dist) in enumerate(ranked.top(args.top), start=1):
        print(f"{pos}\t{tid}\t{gallery.by_id(tid).vehicle_id}\t{dist:.10f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    gallery = featureio.generate_synthetic(
        n_vehicles=args.vehicles,
        n_cameras=args.cameras,
        images_per_track_range=(args.images[0], args.images[1]),
        f=args.dim,
        cluster_separation=1.0,
        noise_sigma=0.02,
        seed=args.seed,
    )
    queries = queries_from_gallery(gallery, mode=args.mode)[: args.queries]
    threads = _threads(args)
    total = sum(t.image_count for t in gallery.tracks)
    print(
        f"gallery: {len(gallery)} tracks, {total} images, f={gallery.dimension}; "
        f"{len(queries)} sample queries, mode={args.mode}, threads={threads}"
    )
    print("metric\tlabel\tper_query_ms\ttotal_s\tdigest")
    for family in _METRICS:
        agg = "mean50" if family in ("med", "mcd") and args.mode == "t2tp" else None
        spec = DistanceSpec(family=family, aggregation=agg, gamma=args.gamma)
        scorer = GalleryScorer(gallery, spec)
        digest = hashlib.sha256()
        start = time.perf_counter()
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                all_d = list(pool.map(scorer.distances, queries))
        else:
            all_d = [scorer.distances(q) for q in queries]
        elapsed = time.perf_counter() - start
        for d in all_d:
            digest.update(d.tobytes())
        print(
            f"{family}\t{spec.label}\t{1000.0 * elapsed / len(queries):.2f}\t{elapsed:.3f}\t"
            f"{digest.hexdigest()[:16]}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackreid",
        description="Vehicle re-identification over latent representations: "
        "synthesize galleries, rank queries and run the evaluation protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic feature gallery")
    p.add_argument("--out-features", required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--vehicles", type=int, default=50)
    p.add_argument("--cameras", type=int, default=4)
    p.add_argument("--images", type=int, nargs=2, default=(3, 14), metavar=("MIN", "MAX"))
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="run the full re-identification evaluation")
    _add_gallery_args(p)
    _add_metric_args(p)
    _add_query_args(p)
    p.add_argument("--threads", type=int, default=None, help="worker threads (env REID_THREADS)")
    p.add_argument("--max-rank", type=int, default=50)
    p.add_argument("--report-json", default=None)
    p.add_argument("--report-txt", default=None)
    p.add_argument("--cmc-csv", default=None)
    p.add_argument("--include-self", action="store_true", help="keep the query's own track")
    p.add_argument(
        "--include-same-camera",
        action="store_true",
        help="count same-camera sightings of the query vehicle as regular gallery tracks",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="rank the gallery for one query track")
    _add_gallery_args(p)
    _add_metric_args(p)
    p.add_argument("--mode", choices=("i2tp", "t2tp"), default="t2tp")
    p.add_argument("--query-track", required=True)
    p.add_argument("--query-image", type=int, default=0, help="image index for i2tp queries")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--include-self", action="store_true")
    p.add_argument("--include-same-camera", action="store_true")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("bench", help="time each metric family on a synthetic gallery")
    p.add_argument("--vehicles", type=int, default=559)
    p.add_argument("--cameras", type=int, default=3)
    p.add_argument("--images", type=int, nargs=2, default=(4, 8), metavar=("MIN", "MAX"))
    p.add_argument("--dim", type=int, default=1920)
    p.add_argument("--queries", type=int, default=8, help="number of sampled queries to time")
    p.add_argument("--mode", choices=("i2tp", "t2tp"), default="t2tp")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
