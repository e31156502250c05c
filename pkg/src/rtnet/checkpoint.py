"""Versioned binary checkpoints.

Layout (all integers little-endian unsigned 32-bit):

  magic   4 bytes  b"RTNC"
  version u32      currently 1
  config  u32 length + that many bytes of UTF-8 JSON (full run config,
                   including the vocabulary and the training seed)
  count   u32      number of tensors
  tensors repeated: name (u32 length + UTF-8 bytes), ndim u32,
                   dims u32 × ndim, values float32 little-endian

Writing the same parameters and config twice produces byte-identical
files, which is how end-to-end determinism is asserted.
"""
from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"RTNC"
VERSION = 1


def save_checkpoint(path, params, config: dict) -> None:
    """params: iterable of objects with .name and .data (numpy array)."""
    params = list(params)
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ValueError("duplicate parameter names in checkpoint")
    config_bytes = json.dumps(config, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(config_bytes)))
        f.write(config_bytes)
        f.write(struct.pack("<I", len(params)))
        for p in params:
            name_bytes = p.name.encode("utf-8")
            f.write(struct.pack("<I", len(name_bytes)))
            f.write(name_bytes)
            data = np.ascontiguousarray(p.data, dtype="<f4")
            f.write(struct.pack("<I", data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.tobytes())


def load_checkpoint(path) -> tuple:
    """Returns (config dict, ordered dict name -> float32 array)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (clen,) = struct.unpack("<I", f.read(4))
        config = json.loads(f.read(clen).decode("utf-8"))
        (count,) = struct.unpack("<I", f.read(4))
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(shape)
            tensors[name] = data.copy()
    return config, tensors
