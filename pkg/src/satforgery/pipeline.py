"""End-to-end inference: patches -> features -> SVM scores -> masks.

Pixel values enter as 8-bit RGB and are normalized to [-1, 1] at the patch
extraction boundary. Overlapping patch scores are averaged per pixel;
pixels never covered by a patch (the right/bottom remainder when the stride
does not divide dim - size) are filled from the nearest covered pixel and
flagged in the coverage map so evaluation can exclude them.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import ocsvm
from .layers import ShapeError

PATCH_SIZE = 64
PATCH_STRIDE = 32
SCORE_BATCH = 256


def normalize_pixels(pixels):
    """Map 8-bit pixel values to [-1, 1] float32."""
    return (np.asarray(pixels, dtype=np.float32) / 127.5) - 1.0


@dataclass
class PatchGrid:
    patches: np.ndarray      # (K, size, size, 3) float32 in [-1, 1]
    coords: np.ndarray       # (K, 2) top-left (row, col)
    size: int
    stride: int
    image_shape: tuple


def patch_counts(dim, size, stride):
    return (dim - size) // stride + 1


def extract_patches(image, size=PATCH_SIZE, stride=PATCH_STRIDE):
    """Row-major regular patch grid, normalized to [-1, 1]."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"expected an (H, W, 3) image, got {image.shape}")
    h, w = image.shape[:2]
    if size > min(h, w):
        raise ShapeError(f"patch size {size} exceeds image {(h, w)}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rows = np.arange(patch_counts(h, size, stride)) * stride
    cols = np.arange(patch_counts(w, size, stride)) * stride
    norm = normalize_pixels(image)
    patches = np.empty((len(rows) * len(cols), size, size, 3), dtype=np.float32)
    coords = np.empty((len(rows) * len(cols), 2), dtype=np.int64)
    k = 0
    for r in rows:
        for c in cols:
            patches[k] = norm[r:r + size, c:c + size]
            coords[k] = (r, c)
            k += 1
    return PatchGrid(patches, coords, size, stride, (h, w))


@dataclass
class SoftMask:
    scores: np.ndarray        # (H, W) float64, per-pixel pristine score
    coverage: np.ndarray      # (H, W) int32, number of covering patches
    patch_scores: np.ndarray  # (K,) per-patch SVM outputs
    coords: np.ndarray        # (K, 2)
    size: int


def score_patches(grid, autoencoder, weights, svm_model, batch=SCORE_BATCH):
    """SVM decision value per patch, via the eval-mode encoder."""
    scores = np.empty(len(grid.patches), dtype=np.float64)
    for start in range(0, len(grid.patches), batch):
        chunk = grid.patches[start:start + batch]
        h = autoencoder.encode(weights, chunk)
        scores[start:start + batch] = ocsvm.decision(svm_model, h)
    return scores


def assemble_soft_mask(grid, patch_scores, aggregate="mean"):
    """Per-pixel aggregation of patch scores into a full-size map."""
    if aggregate not in ("mean", "min"):
        raise ValueError(f"unknown aggregation {aggregate!r}")
    h, w = grid.image_shape
    count = np.zeros((h, w), dtype=np.int32)
    if aggregate == "mean":
        acc = np.zeros((h, w), dtype=np.float64)
        for (r, c), s in zip(grid.coords, patch_scores):
            acc[r:r + grid.size, c:c + grid.size] += s
            count[r:r + grid.size, c:c + grid.size] += 1
        covered = count > 0
        scores = np.zeros((h, w), dtype=np.float64)
        scores[covered] = acc[covered] / count[covered]
    else:
        scores = np.full((h, w), np.inf)
        for (r, c), s in zip(grid.coords, patch_scores):
            region = scores[r:r + grid.size, c:c + grid.size]
            np.minimum(region, s, out=region)
            count[r:r + grid.size, c:c + grid.size] += 1
        covered = count > 0
        scores[~covered] = 0.0
    if not covered.all():
        # nearest covered value for the uncovered border band
        _, (ir, ic) = ndimage.distance_transform_edt(~covered, return_indices=True)
        scores = scores[ir, ic]
    return SoftMask(scores, count, np.asarray(patch_scores, dtype=np.float64),
                    grid.coords.copy(), grid.size)


def compute_soft_mask(image, autoencoder, weights, svm_model,
                      size=PATCH_SIZE, stride=PATCH_STRIDE, aggregate="mean"):
    if autoencoder.spec.feature_dim != svm_model.support_vectors.shape[1]:
        raise ShapeError("encoder feature dimension does not match the SVM model")
    grid = extract_patches(image, size, stride)
    scores = score_patches(grid, autoencoder, weights, svm_model)
    return assemble_soft_mask(grid, scores, aggregate)


def threshold_mask(soft, t):
    """Binary integrity mask: 1 = pristine (score >= t), 0 = forged."""
    return (soft.scores >= t).astype(np.uint8)


def detection_score(soft):
    """Image-level pristine confidence: the minimum patch-level score."""
    if soft.patch_scores.size == 0:
        raise ValueError("soft mask contains no scored patches")
    return float(soft.patch_scores.min())
