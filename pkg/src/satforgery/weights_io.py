"""Binary weight-file container.

Layout (all little-endian): magic ``SFWT``, format version (u32), arch id
and stage as length-prefixed UTF-8, seed (i64, -1 when unset), record count
(u32), then per array: name (u16 length + UTF-8), ndim (u8), dims (u32
each), float32 values.
"""

import struct

import numpy as np

from .networks import ModelWeights

MAGIC = b"SFWT"
VERSION = 1


class WeightFormatError(ValueError):
    pass


def _write_str(fh, s):
    raw = s.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def _read_str(fh):
    (n,) = struct.unpack("<H", fh.read(2))
    return fh.read(n).decode("utf-8")


def save_weights(weights, path):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        _write_str(fh, weights.arch_id)
        _write_str(fh, weights.stage)
        fh.write(struct.pack("<q", -1 if weights.seed is None else weights.seed))
        fh.write(struct.pack("<I", len(weights.arrays)))
        for name in sorted(weights.arrays):
            arr = np.asarray(weights.arrays[name], dtype=np.float32)
            _write_str(fh, name)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f4").tobytes())


def load_weights(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise WeightFormatError(f"{path}: not a weight file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise WeightFormatError(f"{path}: unsupported version {version}")
        arch_id = _read_str(fh)
        stage = _read_str(fh)
        (seed,) = struct.unpack("<q", fh.read(8))
        (count,) = struct.unpack("<I", fh.read(4))
        arrays = {}
        for _ in range(count):
            name = _read_str(fh)
            (ndim,) = struct.unpack("<B", fh.read(1))
            dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n = int(np.prod(dims)) if ndim else 1
            data = np.frombuffer(fh.read(4 * n), dtype="<f4").reshape(dims)
            arrays[name] = np.ascontiguousarray(data, dtype=np.float32)
    return ModelWeights(arch_id, arrays,
                        seed=None if seed == -1 else seed, stage=stage)
