"""Patch-based satellite-image forgery detection and localization.

An autoencoder trained on pristine 64x64 patches (optionally fine-tuned
adversarially against a patch discriminator) provides bottleneck features;
a one-class SVM over those features scores patches, and the scores are
assembled into per-pixel soft masks for detection and localization.
"""

__version__ = "0.1.0"

from .architectures import ArchitectureSpec, build_spec, describe, param_count
from .networks import Autoencoder, Discriminator, ModelWeights, init_weights
from .ocsvm import SvmConfig, SvmModel, decision, fit, rbf_kernel
from .pipeline import (
    PatchGrid,
    SoftMask,
    compute_soft_mask,
    detection_score,
    extract_patches,
    threshold_mask,
)
from .train import TrainConfig, TrainHistory, train_autoencoder, train_gan

__all__ = [
    "ArchitectureSpec",
    "Autoencoder",
    "Discriminator",
    "ModelWeights",
    "PatchGrid",
    "SoftMask",
    "SvmConfig",
    "SvmModel",
    "TrainConfig",
    "TrainHistory",
    "build_spec",
    "compute_soft_mask",
    "decision",
    "describe",
    "detection_score",
    "extract_patches",
    "fit",
    "init_weights",
    "param_count",
    "rbf_kernel",
    "threshold_mask",
    "train_autoencoder",
    "train_gan",
]
