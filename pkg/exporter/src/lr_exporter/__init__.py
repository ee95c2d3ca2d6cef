"""Latent-representation exporter: image folders -> LRF1 feature files.

Runs a torchvision backbone in inference mode over a track-structured
image tree and writes the engine's bit-exact file formats (LRF1 binary
features plus a JSON-lines track manifest).
"""

from .backbones import BACKBONE_DIMENSIONS, build_feature_extractor
from .export import ExportError, export
from .lrf1 import write_features, write_manifest

__all__ = [
    "BACKBONE_DIMENSIONS",
    "ExportError",
    "build_feature_extractor",
    "export",
    "write_features",
    "write_manifest",
]
