"""Small shared helpers: seeded substreams, hashing, finite checks."""

from __future__ import annotations

import hashlib
import zlib
from pathlib import Path

import numpy as np

from .errors import NonFiniteError


def substream(seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Deterministic random substream keyed by (seed, tag, indices).

    Tags are hashed with crc32 so streams for different purposes never
    collide even when their numeric indices do.  Identical keys give
    bitwise-identical streams, which keeps parallel generation equal to
    sequential generation.
    """
    key = (int(seed), zlib.crc32(tag.encode("utf-8")), *[int(i) for i in indices])
    return np.random.default_rng(key)


def require_finite(values: np.ndarray, what: str) -> None:
    """Raise NonFiniteError naming the first non-finite flat index."""
    flat = np.asarray(values).ravel()
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        idx = int(bad[0])
        raise NonFiniteError(f"{what}: non-finite value at flat index {idx}", idx)


def sha256_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    return repr(float(x))
