"""Backbone construction: truncate a torchvision classifier at the
second-to-last layer so the forward pass emits the latent representation.

Every supported backbone ends in ReLU activations at the extraction
point, so the emitted features are non-negative.
"""

from __future__ import annotations

import torch
from torch import nn
from torchvision import models

BACKBONE_DIMENSIONS = {
    "resnet18": 512,
    "alexnet": 4096,
    "vgg16": 4096,
    "inception_v3": 2048,
    "densenet201": 1920,
}


def _strip_head(name: str, model: nn.Module) -> nn.Module:
    if name in ("resnet18", "inception_v3"):
        model.fc = nn.Identity()
    elif name in ("alexnet", "vgg16"):
        model.classifier[6] = nn.Identity()
    else:  # densenet201
        model.classifier = nn.Identity()
    return model


def build_feature_extractor(name: str, weights: str = "pretrained", seed: int = 0) -> nn.Module:
    """Build an eval-mode feature extractor for one backbone.

    ``weights="pretrained"`` loads the ImageNet checkpoint (needs either a
    local torch hub cache or network access); ``weights="random"`` builds
    the same architecture with a seeded random initialization, which keeps
    every architectural property (dimension, non-negativity, determinism)
    without downloads.
    """
    if name not in BACKBONE_DIMENSIONS:
        raise ValueError(
            f"unknown backbone {name!r}; expected one of {sorted(BACKBONE_DIMENSIONS)}"
        )
    if weights not in ("pretrained", "random"):
        raise ValueError(f"weights must be 'pretrained' or 'random', got {weights!r}")

    ctor = getattr(models, name)
    if weights == "random":
        torch.manual_seed(seed)
        if name == "inception_v3":
            model = ctor(weights=None, aux_logits=False, init_weights=True)
        else:
            model = ctor(weights=None)
    else:
        try:
            model = ctor(weights="IMAGENET1K_V1")
        except Exception as exc:
            raise RuntimeError(
                f"could not load pretrained weights for {name} (no cache and no "
                f"network?); use weights='random' for an architecture-only export: {exc}"
            ) from exc
    model = _strip_head(name, model)
    model.eval()
    return model
