"""Binary tensor containers shared by dataset records and checkpoints.

Layout (all integers little-endian):

    magic: 4 bytes            "PACX" (dataset example) or "PACR" (checkpoint)
    version: u32
    spec_hash: u64            checkpoints only
    count: u32
    per tensor:
        name_len: u16, name: UTF-8 bytes
        rank: u8, dims: u32 * rank
        data: f32 little-endian, row-major
"""

from __future__ import annotations

import struct
from typing import Dict, Optional, Tuple

import numpy as np

DATASET_MAGIC = b"PACX"
CHECKPOINT_MAGIC = b"PACR"
FORMAT_VERSION = 1


def write_tensor_file(
    path,
    magic: bytes,
    tensors: Dict[str, np.ndarray],
    version: int = FORMAT_VERSION,
    spec_hash: Optional[int] = None,
) -> None:
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", version))
        if magic == CHECKPOINT_MAGIC:
            if spec_hash is None:
                raise ValueError("checkpoints require a spec hash")
            f.write(struct.pack("<Q", spec_hash))
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(arr.tobytes())


def read_tensor_file(path, magic: bytes) -> Tuple[int, Optional[int], Dict[str, np.ndarray]]:
    """Returns (version, spec_hash or None, tensors). Raises on corruption."""
    with open(path, "rb") as f:
        raw = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(raw):
            raise ValueError(f"truncated file {path}")
        chunk = raw[off : off + n]
        off += n
        return chunk

    got = take(4)
    if got != magic:
        raise ValueError(f"bad magic {got!r} in {path}, expected {magic!r}")
    (version,) = struct.unpack("<I", take(4))
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version} in {path}")
    spec_hash = None
    if magic == CHECKPOINT_MAGIC:
        (spec_hash,) = struct.unpack("<Q", take(8))
    (count,) = struct.unpack("<I", take(4))
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(take(4 * n), dtype="<f4").reshape(dims)
        tensors[name] = np.array(data, dtype=np.float32)
    if off != len(raw):
        raise ValueError(f"trailing bytes in {path}")
    return version, spec_hash, tensors
