"""Command line for the exporter: one `export` pass per invocation."""

from __future__ import annotations

import argparse
import sys

from .backbones import BACKBONE_DIMENSIONS
from .export import ExportError, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lr-export",
        description="Extract latent representations from a track-structured image tree "
        "(<root>/<vehicle>/<camera>/<track>/*.jpg) into an LRF1 feature file "
        "and JSON-lines manifest.",
    )
    parser.add_argument("--images", required=True, help="image tree root")
    parser.add_argument("--backbone", choices=sorted(BACKBONE_DIMENSIONS), default="densenet201")
    parser.add_argument("--out-features", required=True)
    parser.add_argument("--out-manifest", required=True)
    parser.add_argument(
        "--weights",
        choices=("pretrained", "random"),
        default="pretrained",
        help="'random' builds the architecture with a seeded init (no downloads)",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for --weights random")
    parser.add_argument("--batch-size", type=int, default=16)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = export(
            args.images,
            backbone=args.backbone,
            out_features=args.out_features,
            out_manifest=args.out_manifest,
            weights=args.weights,
            seed=args.seed,
            batch_size=args.batch_size,
        )
    except ExportError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(
        f"exported {summary['n_images']} images in {summary['n_tracks']} tracks "
        f"(f={summary['dimension']}, {summary['backbone']}) to {args.out_features}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
