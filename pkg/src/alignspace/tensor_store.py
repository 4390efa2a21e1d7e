"""Bit-exact tensor interchange, atlas tables, and run manifests.

The NFT1 container is deliberately minimal so that an independent reader
fits in ~20 lines in any language:

    magic   4 bytes  ASCII "NFT1"
    version uint16   little-endian, currently 1
    ndim    uint8    value in 1..3
    dims    ndim x uint64 little-endian
    data    row-major float64 little-endian, 8 * prod(dims) bytes

Readers reject NaN/Inf by default; ``allow_nonfinite=True`` instead marks
the loaded tensor as quarantined.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import require_finite
from .errors import NonFiniteError, TensorFormatError, ValidationError

MAGIC = b"NFT1"
VERSION = 1
MAX_NDIM = 3

MODALITIES = ("vision", "audio", "language")

YEO7_NETWORKS = (
    "Visual",
    "Somatomotor",
    "Dorsal Attention",
    "Ventral Attention",
    "Limbic",
    "Control",
    "Default",
)

HEMISPHERES = ("L", "R")

_HEADER = struct.Struct("<4sHB")


@dataclass(frozen=True)
class TensorFile:
    """A loaded NFT1 tensor: dims plus flat row-major float64 values."""

    dims: tuple[int, ...]
    values: np.ndarray
    quarantined: bool = False

    def reshape(self) -> np.ndarray:
        return self.values.reshape(self.dims)


def write_tensor(path: Path | str, dims, values) -> None:
    """Write a float64 tensor in the NFT1 byte layout.

    Rewriting identical input yields byte-identical files.  Raises
    NonFiniteError (with the flat index) on NaN/Inf, ValidationError when
    ``prod(dims) != len(values)`` or dims are out of range.
    """
    dims = tuple(int(d) for d in dims)
    if not 1 <= len(dims) <= MAX_NDIM:
        raise ValidationError(f"ndim must be in 1..{MAX_NDIM}, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ValidationError(f"dims must be positive, got {dims}")
    flat = np.ascontiguousarray(values, dtype="<f8").ravel()
    expected = int(np.prod(dims))
    if flat.size != expected:
        raise ValidationError(
            f"dims {dims} imply {expected} values, got {flat.size}"
        )
    require_finite(flat, "tensor data")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(dims)))
        fh.write(struct.pack(f"<{len(dims)}Q", *dims))
        fh.write(flat.tobytes())


def load_tensor(path: Path | str, allow_nonfinite: bool = False) -> TensorFile:
    """Read and validate an NFT1 file; exact inverse of write_tensor."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise TensorFormatError(f"{path}: file too short for an NFT1 header")
    magic, version, ndim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise TensorFormatError(f"{path}: not an NFT1 file (magic {magic!r})")
    if version != VERSION:
        raise TensorFormatError(
            f"{path}: unsupported NFT1 version {version} (reader supports {VERSION})"
        )
    if not 1 <= ndim <= MAX_NDIM:
        raise TensorFormatError(f"{path}: ndim {ndim} outside 1..{MAX_NDIM}")
    dims_end = _HEADER.size + 8 * ndim
    if len(blob) < dims_end:
        raise TensorFormatError(f"{path}: truncated dimension list")
    dims = struct.unpack(f"<{ndim}Q", blob[_HEADER.size:dims_end])
    expected = 8 * int(np.prod(dims))
    actual = len(blob) - dims_end
    if actual != expected:
        raise TensorFormatError(
            f"{path}: length mismatch, expected {expected} data bytes, got {actual}"
        )
    values = np.frombuffer(blob[dims_end:], dtype="<f8").copy()
    quarantined = False
    if not np.all(np.isfinite(values)):
        if not allow_nonfinite:
            idx = int(np.flatnonzero(~np.isfinite(values))[0])
            raise NonFiniteError(
                f"{path}: non-finite value at flat index {idx} "
                "(pass allow_nonfinite to quarantine)",
                idx,
            )
        quarantined = True
    return TensorFile(tuple(int(d) for d in dims), values, quarantined)


def read_tensor(path: Path | str, allow_nonfinite: bool = False):
    """Return (dims, flat values) for an NFT1 file."""
    tf = load_tensor(path, allow_nonfinite=allow_nonfinite)
    return tf.dims, tf.values


def write_array(path: Path | str, array: np.ndarray) -> None:
    """Write an ndarray (1-3 dims) as NFT1."""
    arr = np.asarray(array, dtype=float)
    write_tensor(path, arr.shape, arr.ravel())


def read_array(path: Path | str, allow_nonfinite: bool = False) -> np.ndarray:
    """Read an NFT1 file back as a shaped ndarray."""
    tf = load_tensor(path, allow_nonfinite=allow_nonfinite)
    return tf.reshape()


@dataclass(frozen=True)
class AtlasTable:
    """Validated ROI atlas: contiguous 0-based indices with network labels."""

    roi_names: tuple[str, ...]
    networks: tuple[str, ...]
    hemispheres: tuple[str, ...]

    @property
    def n_rois(self) -> int:
        return len(self.roi_names)


def load_atlas(path: Path | str) -> AtlasTable:
    """Load and validate an atlas CSV (roi_index,roi_name,network,hemisphere)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["roi_index", "roi_name", "network", "hemisphere"]:
            raise ValidationError(
                f"{path}: expected header roi_index,roi_name,network,hemisphere, got {header}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise ValidationError(f"{path}: atlas has no rows")
    entries = {}
    for row in rows:
        if len(row) != 4:
            raise ValidationError(f"{path}: malformed row {row}")
        idx = int(row[0])
        if idx in entries:
            raise ValidationError(f"{path}: duplicate roi_index {idx}")
        if row[2] not in YEO7_NETWORKS:
            raise ValidationError(
                f"{path}: unknown network {row[2]!r}; valid labels: "
                + ", ".join(YEO7_NETWORKS)
            )
        if row[3] not in HEMISPHERES:
            raise ValidationError(f"{path}: hemisphere must be L or R, got {row[3]!r}")
        entries[idx] = (row[1], row[2], row[3])
    n = len(entries)
    if sorted(entries) != list(range(n)):
        raise ValidationError(
            f"{path}: roi_index values must form the contiguous range 0..{n - 1}"
        )
    ordered = [entries[i] for i in range(n)]
    return AtlasTable(
        roi_names=tuple(e[0] for e in ordered),
        networks=tuple(e[1] for e in ordered),
        hemispheres=tuple(e[2] for e in ordered),
    )


def write_atlas(path: Path | str, atlas: AtlasTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["roi_index", "roi_name", "network", "hemisphere"])
        for i in range(atlas.n_rois):
            writer.writerow(
                [i, atlas.roi_names[i], atlas.networks[i], atlas.hemispheres[i]]
            )


@dataclass(frozen=True)
class ModelEntry:
    id: str
    modality: str
    trajectories: tuple[tuple[str, Path], ...]  # (stimulus_id, resolved path)


@dataclass(frozen=True)
class StimulusEvent:
    id: str
    onset: float


@dataclass(frozen=True)
class BrainEntry:
    roi_timeseries: Path
    tr: float
    atlas: Path
    stimuli: tuple[StimulusEvent, ...]


_DEFAULT_LAMBDAS = tuple(float(10.0**e) for e in range(-3, 6))

_DEFAULT_HRF = {
    "peak_delay": 6.0,
    "undershoot_delay": 16.0,
    "peak_dispersion": 1.0,
    "undershoot_dispersion": 1.0,
    "undershoot_ratio": 1.0 / 6.0,
    "duration": 32.0,
    "dt": 0.1,
}


@dataclass(frozen=True)
class PipelineParams:
    svd_rel_tol: float = 1e-10
    ridge_lambdas: tuple[float, ...] = _DEFAULT_LAMBDAS
    cv_folds: int = 5
    n_permutations: int = 999
    epsilon: float = 1e-8
    pca_components: int = 2
    hrf: dict = field(default_factory=lambda: dict(_DEFAULT_HRF))


@dataclass(frozen=True)
class Manifest:
    seed: int
    models: tuple[ModelEntry, ...]
    brain: BrainEntry
    params: PipelineParams
    root: Path

    def model_ids(self) -> list[str]:
        return [m.id for m in self.models]


def _resolve(root: Path, rel: str, what: str) -> Path:
    p = (root / rel).resolve() if not Path(rel).is_absolute() else Path(rel)
    if not p.exists():
        raise ValidationError(f"{what}: referenced path does not exist: {p}")
    return p


def load_manifest(path: Path | str) -> Manifest:
    """Load and validate the pipeline manifest JSON.

    Model entries keep their file order; every referenced path must
    resolve relative to the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("models", "brain", "params", "seed"):
        if key not in doc:
            raise ValidationError(f"{path}: manifest missing top-level key {key!r}")
    root = path.parent.resolve()
    seed = int(doc["seed"])

    models = []
    seen_ids = set()
    for entry in doc["models"]:
        mid = str(entry["id"])
        if mid in seen_ids:
            raise ValidationError(f"{path}: duplicate model id {mid!r}")
        seen_ids.add(mid)
        modality = str(entry["modality"])
        if modality not in MODALITIES:
            raise ValidationError(
                f"{path}: model {mid!r} has modality {modality!r}; "
                f"valid: {', '.join(MODALITIES)}"
            )
        trajs = tuple(
            (str(stim), _resolve(root, p, f"model {mid!r} trajectory {stim!r}"))
            for stim, p in entry["trajectories"].items()
        )
        if not trajs:
            raise ValidationError(f"{path}: model {mid!r} declares no trajectories")
        models.append(ModelEntry(mid, modality, trajs))
    if not models:
        raise ValidationError(f"{path}: manifest declares no models")

    brain_doc = doc["brain"]
    tr = float(brain_doc["tr"])
    if tr <= 0:
        raise ValidationError(f"{path}: TR must be positive, got {tr}")
    stimuli = tuple(
        StimulusEvent(str(s["id"]), float(s["onset"])) for s in brain_doc["stimuli"]
    )
    if not stimuli:
        raise ValidationError(f"{path}: brain entry declares no stimuli")
    brain = BrainEntry(
        roi_timeseries=_resolve(root, brain_doc["roi_timeseries"], "brain time series"),
        tr=tr,
        atlas=_resolve(root, brain_doc["atlas"], "atlas"),
        stimuli=stimuli,
    )
    stim_ids = {s.id for s in stimuli}
    for m in models:
        missing = stim_ids - {s for s, _ in m.trajectories}
        if missing:
            raise ValidationError(
                f"{path}: model {m.id!r} lacks trajectories for stimuli {sorted(missing)}"
            )

    p = doc["params"]
    params = PipelineParams(
        svd_rel_tol=float(p.get("svd_rel_tol", 1e-10)),
        ridge_lambdas=tuple(float(x) for x in p.get("ridge_lambdas", _DEFAULT_LAMBDAS)),
        cv_folds=int(p.get("cv_folds", 5)),
        n_permutations=int(p.get("n_permutations", 999)),
        epsilon=float(p.get("epsilon", 1e-8)),
        pca_components=int(p.get("pca_components", 2)),
        hrf={**_DEFAULT_HRF, **p.get("hrf", {})},
    )
    if params.n_permutations < 1:
        raise ValidationError(f"{path}: permutation count must be >= 1")
    if not params.ridge_lambdas:
        raise ValidationError(f"{path}: ridge_lambdas grid is empty")
    return Manifest(seed=seed, models=tuple(models), brain=brain, params=params, root=root)
