"""Synthetic trajectories, brains, and model populations with known truth.

Every generator is a pure function of (spec, seed) via keyed substreams,
so identical inputs give bitwise-identical outputs and parallel generation
equals sequential generation.  These are the ground-truth counterparts
used by the test oracles and by the ``synth`` CLI command, which emits a
complete workspace (trajectory tensors, brain tensor, atlas, manifest)
ready for the full pipeline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import substream
from .depth_dynamics import EmbeddingTrajectory, trajectory_to_z
from .encoding import RoiTimeSeries
from .errors import ConfigurationError, ValidationError
from .hemodynamics import FeatureSeries, HrfParams, align_to_volumes, convolve_hrf
from .tensor_store import (
    MODALITIES,
    YEO7_NETWORKS,
    AtlasTable,
    write_array,
    write_atlas,
)


@dataclass(frozen=True)
class TrajectorySpec:
    """Linear depth dynamics: block-diagonal rotations plus real eigenvalues.

    Each rotation angle contributes a 2x2 rotation block, each real value a
    1x1 block; the block dimensions must add up to ``dim``.  The optional
    offset is added to every layer (a global shift of the trajectory).
    """

    dim: int
    n_layers: int
    rotation_angles: tuple[float, ...] = ()
    real_eigenvalues: tuple[float, ...] = ()
    initial_coefficients: tuple[float, ...] | None = None
    offset: tuple[float, ...] | None = None


@dataclass(frozen=True)
class BrainSpec:
    """Known linear readout of convolved features, plus i.i.d. noise."""

    n_rois: int
    n_volumes: int
    tr: float
    noise_sigma: float = 0.0
    weights: np.ndarray | None = None


@dataclass(frozen=True)
class PopulationSpec:
    """Model clusters in score space: one centroid per modality."""

    modalities: tuple[str, ...]
    models_per_modality: int
    n_rois: int
    separation_angle: float = 0.5
    dispersion: float = 0.01


@dataclass(frozen=True)
class WorkspaceSpec:
    """End-to-end synthetic workspace: models, stimuli, and a brain."""

    seed: int = 0
    modalities: tuple[str, ...] = MODALITIES
    models_per_modality: int = 4
    n_stimuli: int = 24
    n_layers: int = 12
    dim: int = 16
    n_rois: int = 14
    n_volumes: int = 120
    tr: float = 1.5
    noise_sigma: float = 0.0
    model_jitter: float = 0.05


def _rotation_block(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    block = np.array([[c, -s], [s, c]])
    # Snap right-angle entries so quarter-turn orbits are exact.
    snapped = np.round(block)
    block[np.abs(block - snapped) < 1e-15] = snapped[np.abs(block - snapped) < 1e-15]
    return block


def generator_matrix(spec: TrajectorySpec) -> np.ndarray:
    """Block-diagonal depth-step operator declared by the spec."""
    blocks = [_rotation_block(t) for t in spec.rotation_angles]
    blocks.extend(np.array([[lam]]) for lam in spec.real_eigenvalues)
    size = sum(b.shape[0] for b in blocks)
    if size != spec.dim:
        raise ValidationError(
            f"blocks cover {size} dims but spec.dim = {spec.dim}"
        )
    A = np.zeros((spec.dim, spec.dim))
    at = 0
    for b in blocks:
        w = b.shape[0]
        A[at : at + w, at : at + w] = b
        at += w
    return A


def true_spectrum(spec: TrajectorySpec) -> np.ndarray:
    """Exact eigenvalues of the configured generator (by construction)."""
    eigs = []
    for t in spec.rotation_angles:
        eigs.append(complex(math.cos(t), math.sin(t)))
        eigs.append(complex(math.cos(t), -math.sin(t)))
    eigs.extend(complex(lam) for lam in spec.real_eigenvalues)
    return np.array(eigs)


def gen_linear_trajectory(
    spec: TrajectorySpec, seed: int = 0, stimulus_id: str = "stim"
) -> tuple[EmbeddingTrajectory, np.ndarray]:
    """Iterate x_{l+1} = A x_l from a given or seeded start.

    Returns the trajectory and the generator's exact spectrum.  Guards
    against overflow when strongly expanding dynamics meet long
    trajectories.
    """
    if not spec.rotation_angles and not spec.real_eigenvalues:
        raise ValidationError("trajectory spec declares no eigenvalues")
    if spec.n_layers < 2:
        raise ValidationError("need at least 2 layers")
    mags = [1.0] * (2 * len(spec.rotation_angles)) + [
        abs(l) for l in spec.real_eigenvalues
    ]
    if max(mags) > 10.0 and spec.n_layers > 30:
        raise ConfigurationError(
            "eigenvalue magnitude > 10 with L > 30 would overflow"
        )
    A = generator_matrix(spec)
    if spec.initial_coefficients is not None:
        x = np.asarray(spec.initial_coefficients, dtype=float)
        if x.shape != (spec.dim,):
            raise ValidationError(
                f"initial coefficients must have length {spec.dim}, got {x.shape}"
            )
        x = x.copy()
    else:
        x = substream(seed, "trajectory-init").standard_normal(spec.dim)
    layers = np.empty((spec.n_layers, spec.dim))
    layers[0] = x
    for l in range(1, spec.n_layers):
        layers[l] = A @ layers[l - 1]
    if spec.offset is not None:
        off = np.asarray(spec.offset, dtype=float)
        if off.shape != (spec.dim,):
            raise ValidationError(
                f"offset must have length {spec.dim}, got {off.shape}"
            )
        layers = layers + off
    return EmbeddingTrajectory(stimulus_id, layers), true_spectrum(spec)


def gen_roi_responses(
    features: FeatureSeries, spec: BrainSpec, seed: int = 0
) -> tuple[RoiTimeSeries, np.ndarray]:
    """ROI responses as a known linear readout of convolved features."""
    if not features.convolved:
        raise ValidationError("ROI generator expects convolved features")
    if features.n_volumes != spec.n_volumes:
        raise ValidationError(
            f"features have {features.n_volumes} volumes, spec says {spec.n_volumes}"
        )
    if spec.noise_sigma < 0:
        raise ValidationError("noise sigma must be >= 0")
    if spec.weights is not None:
        W = np.asarray(spec.weights, dtype=float)
        if W.shape != (spec.n_rois, features.dim):
            raise ValidationError(
                f"weights must be (R, D) = ({spec.n_rois}, {features.dim}), got {W.shape}"
            )
    else:
        W = substream(seed, "roi-weights").standard_normal(
            (spec.n_rois, features.dim)
        )
    Y = np.empty((spec.n_rois, spec.n_volumes))
    for r in range(spec.n_rois):
        Y[r] = features.Z @ W[r]
        if spec.noise_sigma > 0:
            Y[r] += spec.noise_sigma * substream(seed, "roi-noise", r).standard_normal(
                spec.n_volumes
            )
    return RoiTimeSeries(tr=spec.tr, Y=Y), W


def gen_modality_clusters(
    spec: PopulationSpec, seed: int = 0
) -> tuple[np.ndarray, list[str]]:
    """Score-space clusters: one centroid per modality plus seeded scatter.

    Centroids sit at the configured pairwise angle around the positive
    diagonal and members scatter around them; everything is clipped to the
    valid score range [0, 1].  A dispersion so large that clipping
    saturates most entries is a configuration error.
    """
    K = len(spec.modalities)
    if K < 2:
        raise ValidationError("need at least 2 modalities")
    if spec.models_per_modality < 1:
        raise ValidationError("need at least one model per modality")
    if not 0.0 < spec.separation_angle <= math.pi / 2:
        raise ValidationError("separation angle must lie in (0, pi/2]")
    if spec.dispersion < 0:
        raise ValidationError("dispersion must be >= 0")
    R = spec.n_rois
    if R < K + 1:
        raise ValidationError(f"need R >= {K + 1} ROIs for {K} separated centroids")

    diag = np.ones(R) / math.sqrt(R)
    rng = substream(seed, "cluster-directions")
    dirs = []
    for _ in range(K):
        u = rng.standard_normal(R)
        u -= (u @ diag) * diag
        for prev in dirs:
            u -= (u @ prev) * prev
        u /= np.linalg.norm(u)
        dirs.append(u)
    # Pairwise angle between centroids v_k = cos(h) diag + sin(h) u_k is
    # arccos(cos(h)^2); solve for the half-angle h.
    half = math.acos(math.sqrt(math.cos(spec.separation_angle)))
    centroids = np.array(
        [math.cos(half) * diag + math.sin(half) * u for u in dirs]
    )
    top = np.abs(centroids).max()
    centroids = np.clip(centroids * (0.9 / top), 0.0, 1.0)

    C = np.empty((K * spec.models_per_modality, R))
    labels: list[str] = []
    m = 0
    for k, modality in enumerate(spec.modalities):
        for i in range(spec.models_per_modality):
            noise = substream(seed, "cluster-member", k, i).standard_normal(R)
            C[m] = np.clip(centroids[k] + spec.dispersion * noise, 0.0, 1.0)
            labels.append(modality)
            m += 1
    saturated = float(np.mean((C == 0.0) | (C == 1.0)))
    if spec.dispersion > 0 and saturated > 0.5:
        raise ConfigurationError(
            f"dispersion {spec.dispersion} saturates {saturated:.0%} of score entries"
        )
    return C, labels


def _modality_generator(spec: WorkspaceSpec, k: int) -> TrajectorySpec:
    n_pairs = spec.dim // 3
    n_real = spec.dim - 2 * n_pairs
    rng = substream(spec.seed, "workspace-generator", k)
    angles = tuple(rng.uniform(0.3, 1.2, n_pairs).tolist())
    reals = tuple(rng.uniform(0.5, 0.95, n_real).tolist())
    return TrajectorySpec(
        dim=spec.dim,
        n_layers=spec.n_layers,
        rotation_angles=angles,
        real_eigenvalues=reals,
    )


def gen_workspace(spec: WorkspaceSpec, out_dir: Path | str) -> Path:
    """Write a complete synthetic workspace; returns the manifest path.

    Each modality has its own depth-dynamics generator; models within a
    modality perturb a shared per-stimulus start, so their stable vectors
    (and hence their alignment profiles) cluster by modality.  ROIs are
    wired round-robin to modalities as noiseless (or noisy) linear
    readouts of the modality's unperturbed feature series.
    """
    if spec.n_layers < 3:
        raise ValidationError("workspace trajectories need at least 3 layers")
    if spec.n_stimuli < 2:
        raise ValidationError("need at least 2 stimuli")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    K = len(spec.modalities)
    for m in spec.modalities:
        if m not in MODALITIES:
            raise ValidationError(f"unknown modality {m!r}")

    generators = [_modality_generator(spec, k) for k in range(K)]
    scan_len = spec.n_volumes * spec.tr
    onsets = [s * scan_len / spec.n_stimuli for s in range(spec.n_stimuli)]
    stim_ids = [f"stim-{s:03d}" for s in range(spec.n_stimuli)]

    models_doc = []
    base_z: list[list[np.ndarray]] = []
    for k, modality in enumerate(spec.modalities):
        zs = []
        for s in range(spec.n_stimuli):
            start = substream(spec.seed, "workspace-init", k, s).standard_normal(
                spec.dim
            )
            base = TrajectorySpec(
                dim=spec.dim,
                n_layers=spec.n_layers,
                rotation_angles=generators[k].rotation_angles,
                real_eigenvalues=generators[k].real_eigenvalues,
                initial_coefficients=tuple(start.tolist()),
            )
            traj, _ = gen_linear_trajectory(base, spec.seed, stim_ids[s])
            zs.append(trajectory_to_z(traj))
        base_z.append(zs)

        for i in range(spec.models_per_modality):
            model_id = f"{modality}-{i:02d}"
            model_dir = out / "trajectories" / model_id
            model_dir.mkdir(parents=True, exist_ok=True)
            traj_paths = {}
            for s in range(spec.n_stimuli):
                start = substream(
                    spec.seed, "workspace-init", k, s
                ).standard_normal(spec.dim)
                jitter = substream(
                    spec.seed, "workspace-jitter", k, i, s
                ).standard_normal(spec.dim)
                tspec = TrajectorySpec(
                    dim=spec.dim,
                    n_layers=spec.n_layers,
                    rotation_angles=generators[k].rotation_angles,
                    real_eigenvalues=generators[k].real_eigenvalues,
                    initial_coefficients=tuple(
                        (start + spec.model_jitter * jitter).tolist()
                    ),
                )
                traj, _ = gen_linear_trajectory(tspec, spec.seed, stim_ids[s])
                rel = f"trajectories/{model_id}/{stim_ids[s]}.nft1"
                write_array(out / rel, traj.layers)
                traj_paths[stim_ids[s]] = rel
            models_doc.append(
                {"id": model_id, "modality": modality, "trajectories": traj_paths}
            )

    hrf = HrfParams()
    modality_features = []
    for k in range(K):
        series = align_to_volumes(onsets, base_z[k], spec.tr, spec.n_volumes)
        modality_features.append(convolve_hrf(series, hrf))

    Y = np.empty((spec.n_rois, spec.n_volumes))
    for r in range(spec.n_rois):
        feats = modality_features[r % K]
        w = substream(spec.seed, "workspace-readout", r).standard_normal(spec.dim)
        Y[r] = feats.Z @ w
        if spec.noise_sigma > 0:
            Y[r] += spec.noise_sigma * substream(
                spec.seed, "workspace-brain-noise", r
            ).standard_normal(spec.n_volumes)
    write_array(out / "brain.nft1", Y)

    atlas = AtlasTable(
        roi_names=tuple(f"ROI_{r:03d}" for r in range(spec.n_rois)),
        networks=tuple(YEO7_NETWORKS[r % len(YEO7_NETWORKS)] for r in range(spec.n_rois)),
        hemispheres=tuple("L" if r % 2 == 0 else "R" for r in range(spec.n_rois)),
    )
    write_atlas(out / "atlas.csv", atlas)

    manifest = {
        "seed": spec.seed,
        "models": models_doc,
        "brain": {
            "roi_timeseries": "brain.nft1",
            "tr": spec.tr,
            "atlas": "atlas.csv",
            "stimuli": [
                {"id": sid, "onset": onset} for sid, onset in zip(stim_ids, onsets)
            ],
        },
        "params": {},
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
