"""Synthetic data construction: base textures, splice forgeries, splits.

Real overhead imagery is not bundled, so base images are multi-octave
value-noise terrain textures with correlated color channels and a few
linear ridge features. Splice objects (ellipses, airplane-like polygons,
cloud blobs) are filled with statistics deliberately unlike the terrain and
composited hard (no blending), with exact ground-truth masks.

All randomness is derived from one root seed via named streams, so
generation is deterministic under any scheduling.
"""

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from . import imageio

SIZE_CLASSES = {"small": 32, "medium": 64, "large": 128}
SIZE_TOLERANCE = 0.25
OBJECT_KINDS = ("ellipse", "airplane", "cloud")
POOL_FRACTION = 0.23
VAL_FRACTION = 0.2
MANIFEST_VERSION = 1


def derive_rng(seed, *labels):
    """Independent generator for (root seed, component, purpose...)."""
    words = [seed & 0xFFFFFFFF] + [zlib.crc32(str(l).encode()) for l in labels]
    return np.random.default_rng(words)


# ---------------------------------------------------------------------------
# base images

def _value_noise(rng, dims, grid):
    coarse = rng.normal(size=(grid, grid)).astype(np.float32)
    img = Image.fromarray(coarse, mode="F").resize((dims[1], dims[0]),
                                                   Image.BICUBIC)
    return np.asarray(img, dtype=np.float32)


def _ridges(rng, dims, count=4):
    """Thin bright/dark linear features (roads, rivers)."""
    h, w = dims
    canvas = np.zeros((h, w), dtype=np.float32)
    for _ in range(count):
        r0, c0 = rng.uniform(0, h), rng.uniform(0, w)
        angle = rng.uniform(0, np.pi)
        length = rng.uniform(0.5, 1.5) * max(h, w)
        t = np.linspace(-length / 2, length / 2, int(2 * length))
        rr = np.clip(r0 + t * np.sin(angle), 0, h - 1).astype(int)
        cc = np.clip(c0 + t * np.cos(angle), 0, w - 1).astype(int)
        canvas[rr, cc] += rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0)
    return ndimage.gaussian_filter(canvas, 1.2)


def generate_base_image(dims, rng):
    """One (H, W, 3) uint8 terrain texture."""
    h, w = dims
    terrain = np.zeros((h, w), dtype=np.float32)
    for grid, weight in ((5, 1.0), (9, 0.6), (17, 0.35), (33, 0.2), (65, 0.1)):
        terrain += weight * _value_noise(rng, dims, grid)
    terrain += _ridges(rng, dims)
    terrain -= terrain.min()
    terrain /= max(terrain.max(), 1e-6)
    # muted earth palette: one shared luminance, small correlated tints
    base = np.array([rng.uniform(70, 110), rng.uniform(80, 120),
                     rng.uniform(60, 100)], dtype=np.float32)
    gain = np.array([rng.uniform(70, 110), rng.uniform(70, 110),
                     rng.uniform(50, 90)], dtype=np.float32)
    img = base + terrain[..., None] * gain
    img += rng.normal(scale=2.0, size=img.shape).astype(np.float32)
    return np.clip(img, 0, 255).astype(np.uint8)


def generate_base_images(count, dims=(650, 650), seed=0):
    if min(dims) < 64:
        raise ValueError(f"dims {dims} too small")
    return [generate_base_image(dims, derive_rng(seed, "base", i))
            for i in range(count)]


# ---------------------------------------------------------------------------
# splice forgeries

@dataclass
class ForgerySpec:
    size_class: str            # "small", "medium" or "large"
    object_kind: str = ""      # empty = pick at random
    seed: int = 0

    def __post_init__(self):
        if self.size_class not in SIZE_CLASSES:
            raise ValueError(f"unknown size class {self.size_class!r}")
        if self.object_kind and self.object_kind not in OBJECT_KINDS:
            raise ValueError(f"unknown object kind {self.object_kind!r}")


@dataclass
class SpliceRecord:
    base_id: str
    object_kind: str
    size_class: str
    position: tuple            # top-left (row, col) of the object bbox
    side: int                  # bbox side in pixels


def _ellipse_footprint(side, rng):
    a = side / 2 * rng.uniform(0.75, 1.0)
    b = side / 2 * rng.uniform(0.55, 1.0)
    yy, xx = np.mgrid[:side, :side] - (side - 1) / 2
    return (yy / max(a, 1)) ** 2 + (xx / max(b, 1)) ** 2 <= 1.0


def _airplane_footprint(side, rng):
    fp = np.zeros((side, side), dtype=bool)
    mid = side // 2
    body = max(side // 8, 1)
    fp[side // 8: side - side // 8, mid - body // 2: mid + body // 2 + 1] = True
    wing = max(side // 10, 1)
    wr = side // 2
    fp[wr - wing // 2: wr + wing // 2 + 1, side // 12: side - side // 12] = True
    tr = side - side // 6
    fp[tr - wing // 2: tr + wing // 2 + 1, side // 4: side - side // 4] = True
    return fp


def _cloud_footprint(side, rng):
    canvas = np.zeros((side, side), dtype=np.float32)
    for _ in range(rng.integers(4, 8)):
        r, c = rng.uniform(side * 0.2, side * 0.8, size=2)
        rad = rng.uniform(side * 0.15, side * 0.35)
        yy, xx = np.mgrid[:side, :side]
        canvas += np.exp(-(((yy - r) ** 2 + (xx - c) ** 2) / (2 * rad ** 2)))
    return canvas > 0.6


def _object_fill(kind, side, rng):
    """Pixel content statistically unlike the muted terrain palette."""
    if kind == "cloud":
        color = np.array([240, 240, 245], dtype=np.float32)
        noise_scale = 6.0
    elif kind == "airplane":
        color = rng.choice(np.array([[225, 225, 230], [40, 40, 50],
                                     [200, 30, 30]], dtype=np.float32))
        noise_scale = 5.0
    else:
        color = rng.uniform(0, 255, size=3).astype(np.float32)
        color[rng.integers(0, 3)] = rng.choice([10.0, 245.0])  # saturate one band
        noise_scale = 8.0
    fill = color + rng.normal(scale=noise_scale, size=(side, side, 3))
    return np.clip(fill, 0, 255).astype(np.uint8)


_FOOTPRINTS = {
    "ellipse": _ellipse_footprint,
    "airplane": _airplane_footprint,
    "cloud": _cloud_footprint,
}


def splice(base, spec, base_id="img"):
    """Paste one object into a copy of `base`.

    Returns (forged image, integrity mask with 0 on replaced pixels,
    SpliceRecord). The object bounding box always lies fully inside the
    image; its side is the class nominal within +/-25%.
    """
    base = np.asarray(base)
    h, w = base.shape[:2]
    rng = derive_rng(spec.seed, "splice", base_id, spec.size_class)
    nominal = SIZE_CLASSES[spec.size_class]
    side = int(round(nominal * rng.uniform(1 - SIZE_TOLERANCE,
                                           1 + SIZE_TOLERANCE)))
    if side > min(h, w):
        raise ValueError(f"object side {side} exceeds image {(h, w)}")
    kind = spec.object_kind or str(rng.choice(OBJECT_KINDS))
    footprint = _FOOTPRINTS[kind](side, rng)
    if not footprint.any():
        raise ValueError("degenerate object footprint")
    r = int(rng.integers(0, h - side + 1))
    c = int(rng.integers(0, w - side + 1))
    fill = _object_fill(kind, side, rng)
    forged = base.copy()
    region = forged[r:r + side, c:c + side]
    region[footprint] = fill[footprint]
    mask = np.ones((h, w), dtype=np.uint8)
    mask[r:r + side, c:c + side][footprint] = 0
    return forged, mask, SpliceRecord(base_id, kind, spec.size_class, (r, c), side)


# ---------------------------------------------------------------------------
# splits

@dataclass
class ImageEntry:
    image_id: str
    split: str                     # "pool", "test-pristine" or "test-forged"
    base_id: str = ""
    size_class: str = ""
    object_kind: str = ""
    position: tuple = ()
    side: int = 0


@dataclass
class SplitManifest:
    seed: int
    dims: tuple
    patch_size: int
    stride: int
    entries: list = field(default_factory=list)

    def ids(self, split):
        return [e.image_id for e in self.entries if e.split == split]

    @property
    def pool_ids(self):
        return self.ids("pool")

    @property
    def test_pristine_ids(self):
        return self.ids("test-pristine")

    def forged_entries(self, size_class=None):
        return [e for e in self.entries if e.split == "test-forged"
                and (size_class is None or e.size_class == size_class)]


def build_splits(image_ids, seed, dims=(650, 650), patch_size=64, stride=32):
    """Mirror the reference proportions at any scale: ~23% of images feed
    the patch pool, the rest are test; half of test gets one forgery per
    size class."""
    ids = list(image_ids)
    if len(ids) < 3:
        raise ValueError("need at least 3 images to build splits")
    order = list(derive_rng(seed, "splits").permutation(len(ids)))
    shuffled = [ids[i] for i in order]
    n_pool = max(1, round(POOL_FRACTION * len(ids)))
    pool, test = shuffled[:n_pool], shuffled[n_pool:]
    n_forged = len(test) // 2
    forged_src, pristine = test[:n_forged], test[n_forged:]
    entries = [ImageEntry(i, "pool") for i in sorted(pool)]
    entries += [ImageEntry(i, "test-pristine") for i in sorted(pristine)]
    for base_id in sorted(forged_src):
        for size_class in SIZE_CLASSES:
            entries.append(ImageEntry(f"{base_id}_{size_class}", "test-forged",
                                      base_id=base_id, size_class=size_class))
    return SplitManifest(seed, tuple(dims), patch_size, stride, entries)


def split_patches(total, seed):
    """80/20 patch-index split; |val| = round(0.2 * total)."""
    perm = derive_rng(seed, "patch-split").permutation(total)
    n_val = round(VAL_FRACTION * total)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


# ---------------------------------------------------------------------------
# on-disk dataset

def save_manifest(manifest, path):
    lines = [f"version={MANIFEST_VERSION} seed={manifest.seed} "
             f"height={manifest.dims[0]} width={manifest.dims[1]} "
             f"patch_size={manifest.patch_size} stride={manifest.stride}"]
    for e in manifest.entries:
        parts = [f"id={e.image_id}", f"split={e.split}"]
        if e.split == "test-forged":
            parts += [f"base={e.base_id}", f"size_class={e.size_class}",
                      f"object={e.object_kind}",
                      f"pos={e.position[0]},{e.position[1]}", f"side={e.side}"]
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path):
    lines = Path(path).read_text().splitlines()
    header = dict(kv.split("=") for kv in lines[0].split())
    if int(header["version"]) != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {header['version']}")
    manifest = SplitManifest(int(header["seed"]),
                             (int(header["height"]), int(header["width"])),
                             int(header["patch_size"]), int(header["stride"]))
    for line in lines[1:]:
        if not line.strip():
            continue
        kv = dict(p.split("=") for p in line.split())
        entry = ImageEntry(kv["id"], kv["split"])
        if entry.split == "test-forged":
            entry.base_id = kv["base"]
            entry.size_class = kv["size_class"]
            entry.object_kind = kv["object"]
            entry.position = tuple(int(v) for v in kv["pos"].split(","))
            entry.side = int(kv["side"])
        manifest.entries.append(entry)
    return manifest


def generate_dataset(out_dir, count, dims=(650, 650), seed=0,
                     patch_size=64, stride=32):
    """Write base images, forged images and masks plus the manifest."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    ids = [f"img{i:03d}" for i in range(count)]
    manifest = build_splits(ids, seed, dims, patch_size, stride)
    bases = {}
    for i, image_id in enumerate(ids):
        bases[image_id] = generate_base_image(dims, derive_rng(seed, "base", i))
    for image_id in manifest.pool_ids + manifest.test_pristine_ids:
        imageio.save_image(bases[image_id], out / "images" / f"{image_id}.png")
    for entry in manifest.forged_entries():
        spec = ForgerySpec(entry.size_class, seed=seed)
        forged, mask, record = splice(bases[entry.base_id], spec, entry.base_id)
        entry.object_kind = record.object_kind
        entry.position = record.position
        entry.side = record.side
        imageio.save_image(forged, out / "images" / f"{entry.image_id}.png")
        imageio.save_binary_mask(mask, out / "masks" / f"{entry.image_id}.png")
    save_manifest(manifest, out / "manifest.txt")
    return manifest
