"""Self-contained NFT1 codec (the format fits in a few dozen lines).

Layout: magic b"NFT1", version uint16 LE, ndim uint8 (1..3), ndim uint64 LE
dims, then row-major float64 LE data.  This module deliberately does not
depend on the analysis toolkit; the byte layout alone is the contract
between the two packages.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"NFT1"
VERSION = 1
_HEADER = struct.Struct("<4sHB")


class Nft1Error(ValueError):
    pass


def write(path: Path | str, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype="<f8")
    if not 1 <= arr.ndim <= 3:
        raise Nft1Error(f"ndim must be 1..3, got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        idx = int(np.flatnonzero(~np.isfinite(arr.ravel()))[0])
        raise Nft1Error(f"non-finite value at flat index {idx}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes())


def read(path: Path | str) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise Nft1Error(f"{path}: too short")
    magic, version, ndim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise Nft1Error(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise Nft1Error(f"{path}: unsupported version {version}")
    if not 1 <= ndim <= 3:
        raise Nft1Error(f"{path}: bad ndim {ndim}")
    end = _HEADER.size + 8 * ndim
    dims = struct.unpack(f"<{ndim}Q", blob[_HEADER.size:end])
    expected = 8 * int(np.prod(dims))
    if len(blob) - end != expected:
        raise Nft1Error(
            f"{path}: expected {expected} data bytes, got {len(blob) - end}"
        )
    return np.frombuffer(blob[end:], dtype="<f8").reshape(dims).copy()
