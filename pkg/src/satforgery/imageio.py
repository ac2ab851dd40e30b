"""PNG and raw-array file handling for images, masks and soft masks."""

import numpy as np
from PIL import Image

from .layers import ShapeError


def load_image(path):
    """8-bit RGB image as an (H, W, 3) uint8 array; refuses other modes."""
    with Image.open(path) as img:
        if img.mode != "RGB":
            raise ShapeError(f"{path}: expected an RGB image, got mode {img.mode}")
        return np.asarray(img, dtype=np.uint8)


def save_image(image, path):
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ShapeError(f"expected (H, W, 3) uint8, got {image.shape} {image.dtype}")
    Image.fromarray(image, mode="RGB").save(path)


def save_binary_mask(mask, path):
    """Integrity mask as 8-bit grayscale PNG: 255 = pristine, 0 = forged."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeError(f"expected an (H, W) mask, got {mask.shape}")
    Image.fromarray((mask > 0).astype(np.uint8) * 255, mode="L").save(path)


def load_binary_mask(path):
    """Integrity mask as {0, 1} uint8; any nonzero pixel counts as pristine."""
    with Image.open(path) as img:
        if img.mode != "L":
            raise ShapeError(f"{path}: expected a grayscale mask, got mode {img.mode}")
        return (np.asarray(img) > 0).astype(np.uint8)


def save_soft_mask(scores, path_png, path_raw, path_sidecar):
    """Soft mask as affine-scaled 16-bit PNG plus an exact float64 dump.

    The sidecar records the min/max used for scaling so the PNG can be
    mapped back approximately; the raw dump is authoritative.
    """
    scores = np.asarray(scores, dtype=np.float64)
    lo, hi = float(scores.min()), float(scores.max())
    span = hi - lo if hi > lo else 1.0
    scaled = np.round((scores - lo) / span * 65535.0).astype(np.uint16)
    Image.fromarray(scaled, mode="I;16").save(path_png)
    with open(path_raw, "wb") as fh:
        fh.write(np.array(scores.shape, dtype="<i8").tobytes())
        fh.write(scores.astype("<f8").tobytes())
    with open(path_sidecar, "w") as fh:
        fh.write(f"min = {lo!r}\nmax = {hi!r}\n"
                 f"height = {scores.shape[0]}\nwidth = {scores.shape[1]}\n")


def load_soft_mask_raw(path_raw):
    with open(path_raw, "rb") as fh:
        h, w = np.frombuffer(fh.read(16), dtype="<i8")
        return np.frombuffer(fh.read(8 * h * w), dtype="<f8").reshape(h, w).copy()
