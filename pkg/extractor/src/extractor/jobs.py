"""Layer-wise hidden-state extraction from frozen pretrained encoders.

One job covers one model and a list of stimuli.  All hidden-state layers
(embedding output included, in forward order) are kept; the token, patch,
or frame axis is mean-pooled to a single vector per layer, giving one
(L, D) trajectory tensor per stimulus.  Mean pooling is the only
reduction applied; no normalization, so downstream centering sees raw
magnitudes.  Stimuli are processed independently: a stimulus that fails
to decode is recorded as a skip, never aborts the job.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import nft1

MODALITIES = ("vision", "audio", "language")

MIN_LAYERS = 3


class JobError(RuntimeError):
    """The job as a whole cannot proceed (bad model, bad configuration)."""


@dataclass(frozen=True)
class ExtractionJob:
    """What to extract: a frozen model, a modality, and its stimuli.

    ``model`` is a hub name or local directory.  Stimuli are file paths
    (vision/audio, or .txt for language) or raw text strings (language).
    ``stimulus_ids`` names the outputs; defaults to stim-000, stim-001, ...
    """

    model: str
    modality: str
    stimuli: tuple[str, ...]
    output_dir: Path
    stimulus_ids: tuple[str, ...] | None = None
    model_id: str | None = None
    pooling: str = "mean"

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise JobError(
                f"modality must be one of {MODALITIES}, got {self.modality!r}"
            )
        if not self.stimuli:
            raise JobError("job has no stimuli")
        if self.pooling != "mean":
            raise JobError(f"unsupported pooling policy {self.pooling!r}")
        if self.stimulus_ids is not None and len(self.stimulus_ids) != len(
            self.stimuli
        ):
            raise JobError(
                f"{len(self.stimulus_ids)} ids for {len(self.stimuli)} stimuli"
            )

    def resolved_ids(self) -> tuple[str, ...]:
        if self.stimulus_ids is not None:
            return self.stimulus_ids
        return tuple(f"stim-{i:03d}" for i in range(len(self.stimuli)))

    def resolved_model_id(self) -> str:
        name = self.model_id if self.model_id else Path(self.model).name
        return re.sub(r"[^A-Za-z0-9._-]", "_", name)


@dataclass(frozen=True)
class ExtractionResult:
    model_id: str
    modality: str
    n_layers: int
    dim: int
    tensor_paths: dict = field(default_factory=dict)  # stimulus id -> Path
    skipped: tuple = ()
    fragment_path: Path | None = None


def _load_model(name: str):
    from transformers import AutoModel

    model = AutoModel.from_pretrained(name)
    model.eval()
    try:
        model = model.double()  # 64-bit inference where the runtime permits
    except (RuntimeError, NotImplementedError):
        pass
    return model


def _make_preparer(job: ExtractionJob):
    """Return a callable stimulus -> model input dict for the modality."""
    if job.modality == "language":
        from transformers import AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(job.model)

        def prepare(stimulus: str):
            text = stimulus
            p = Path(stimulus)
            if p.suffix == ".txt" and p.exists():
                text = p.read_text()
            return tokenizer(text, return_tensors="pt")

    elif job.modality == "vision":
        from PIL import Image
        from transformers import AutoImageProcessor

        processor = AutoImageProcessor.from_pretrained(job.model)

        def prepare(stimulus: str):
            with Image.open(stimulus) as img:
                return processor(images=img.convert("RGB"), return_tensors="pt")

    else:  # audio
        from scipy.io import wavfile
        from transformers import AutoFeatureExtractor

        extractor = AutoFeatureExtractor.from_pretrained(job.model)

        def prepare(stimulus: str):
            rate, wave = wavfile.read(stimulus)
            wave = np.asarray(wave, dtype=np.float64)
            if wave.ndim == 2:
                wave = wave.mean(axis=1)
            peak = np.abs(wave).max()
            if peak > 0:
                wave = wave / peak
            return extractor(wave, sampling_rate=int(rate), return_tensors="pt")

    return prepare


def _pooled_trajectory(model, inputs) -> np.ndarray:
    inputs = {
        k: (v.double() if isinstance(v, torch.Tensor) and v.is_floating_point() else v)
        for k, v in inputs.items()
    }
    with torch.no_grad():
        out = model(**inputs, output_hidden_states=True)
    states = out.hidden_states
    if states is None or len(states) < MIN_LAYERS:
        raise JobError(
            f"model exposes {0 if states is None else len(states)} hidden-state "
            f"layers; need at least {MIN_LAYERS}"
        )
    rows = []
    for h in states:
        if h.ndim != 3 or h.shape[0] != 1:
            raise JobError(f"unexpected hidden-state shape {tuple(h.shape)}")
        rows.append(h.mean(dim=1).squeeze(0).numpy())
    return np.stack(rows).astype(np.float64)


def _atomic_write_validated(path: Path, trajectory: np.ndarray) -> None:
    """Write via temp+rename, then re-read and require bitwise equality."""
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        nft1.write(tmp, trajectory)
        back = nft1.read(tmp)
        if back.shape != trajectory.shape or back.tobytes() != trajectory.astype(
            "<f8"
        ).tobytes():
            raise JobError(f"round-trip validation failed for {path}")
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def extract_trajectories(job: ExtractionJob) -> ExtractionResult:
    """Run the job: one (L, D) NFT1 tensor per stimulus plus a manifest fragment.

    The fragment (written as ``<model>/fragment.json`` under the output
    directory) carries trajectory paths relative to the output directory,
    so it merges directly into a pipeline manifest placed at that root.
    Deterministic under fixed model weights and inputs.
    """
    out_root = Path(job.output_dir)
    model_id = job.resolved_model_id()
    model_dir = out_root / model_id
    model_dir.mkdir(parents=True, exist_ok=True)

    model = _load_model(job.model)
    prepare = _make_preparer(job)

    ids = job.resolved_ids()
    tensor_paths: dict[str, Path] = {}
    rel_paths: dict[str, str] = {}
    skipped = []
    n_layers = dim = 0
    for sid, stimulus in zip(ids, job.stimuli):
        try:
            inputs = prepare(stimulus)
        except JobError:
            raise
        except Exception as exc:  # per-stimulus isolation
            skipped.append({"stimulus": sid, "reason": f"{type(exc).__name__}: {exc}"})
            continue
        trajectory = _pooled_trajectory(model, inputs)
        if n_layers == 0:
            n_layers, dim = trajectory.shape
        elif trajectory.shape[1] != dim:
            raise JobError(
                f"stimulus {sid!r} produced width {trajectory.shape[1]}, "
                f"expected {dim}"
            )
        path = model_dir / f"{sid}.nft1"
        _atomic_write_validated(path, trajectory)
        tensor_paths[sid] = path
        rel_paths[sid] = str(path.relative_to(out_root))
    if not tensor_paths:
        raise JobError("every stimulus failed to decode")

    fragment = {
        "id": model_id,
        "modality": job.modality,
        "pooling": job.pooling,
        "layers": n_layers,
        "dim": dim,
        "trajectories": rel_paths,
        "skipped": skipped,
    }
    fragment_path = model_dir / "fragment.json"
    fragment_path.write_text(json.dumps(fragment, indent=2, sort_keys=True) + "\n")
    return ExtractionResult(
        model_id=model_id,
        modality=job.modality,
        n_layers=n_layers,
        dim=dim,
        tensor_paths=tensor_paths,
        skipped=tuple(skipped),
        fragment_path=fragment_path,
    )
