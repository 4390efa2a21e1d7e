"""Stage orchestration: manifest in, result artifacts out.

Stages run in the fixed order dmd -> hrf -> encode -> snci -> stats, each
persisting its intermediates under the output directory so later stages
can restart from disk.  Rerunning a completed stage with unchanged inputs
rewrites byte-identical files.  A stage that aborts leaves a
``<stage>.partial`` marker next to whatever it managed to write.
"""

from __future__ import annotations

import json
import re
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import sha256_file
from .consistency import ModalityGroup, snci_map, zscore_across_rois
from .depth_dynamics import EmbeddingTrajectory, analyze_trajectory
from .encoding import EncodingConfig, RoiTimeSeries, alignment_vector
from .errors import AlignspaceError, ValidationError
from .geometry_stats import (
    aggregate_networks,
    distance_contrast,
    distance_matrix,
    pca_embed,
    permanova,
    silhouette,
    two_way_anova,
)
from .hemodynamics import FeatureSeries, HrfParams, align_to_volumes, convolve_hrf
from .reports import svg_scatter, write_csv, write_json
from .tensor_store import Manifest, load_atlas, load_manifest, read_array, write_array

STAGES = ("dmd", "hrf", "encode", "snci", "stats")


class DegeneracyEscalation(AlignspaceError):
    """A degenerate-input fallback occurred while running with --strict."""


@dataclass
class RunOptions:
    stages: tuple[str, ...] = STAGES
    seed: int | None = None  # overrides the manifest seed
    jobs: int = 1
    strict: bool = False
    emit_spectra: bool = False
    allow_nonfinite: bool = False
    joint_zscore: bool = False
    distance_metric: str = "cosine"


@dataclass
class RunReport:
    manifest_sha256: str
    seed: int
    stage_seconds: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    inventory: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "manifest_sha256": self.manifest_sha256,
            "seed": self.seed,
            "stage_seconds": self.stage_seconds,
            "warnings": self.warnings,
            "inventory": self.inventory,
        }


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


@dataclass
class _Context:
    manifest: Manifest
    out: Path
    seed: int
    options: RunOptions

    def hrf_params(self) -> HrfParams:
        return HrfParams.from_dict(self.manifest.params.hrf)


def _load_brain(ctx: _Context) -> RoiTimeSeries:
    Y = read_array(
        ctx.manifest.brain.roi_timeseries, allow_nonfinite=ctx.options.allow_nonfinite
    )
    if Y.ndim != 2:
        raise ValidationError(
            f"brain tensor must be 2-D (R, T), got shape {Y.shape}"
        )
    return RoiTimeSeries(tr=ctx.manifest.brain.tr, Y=Y)


def _validate(ctx: _Context) -> None:
    atlas = load_atlas(ctx.manifest.brain.atlas)
    brain = _load_brain(ctx)
    if atlas.n_rois != brain.n_rois:
        raise ValidationError(
            f"atlas has {atlas.n_rois} ROIs but brain tensor has {brain.n_rois}"
        )
    scan_end = brain.n_volumes * brain.tr
    bad = [s.id for s in ctx.manifest.brain.stimuli if not 0.0 <= s.onset < scan_end]
    if bad:
        raise ValidationError(f"stimulus onsets outside the scan: {bad}")
    ids = {_safe_name(m.id) for m in ctx.manifest.models}
    if len(ids) != len(ctx.manifest.models):
        raise ValidationError("model ids collide after filesystem sanitization")


def _stage_dmd(ctx: _Context) -> None:
    tol = ctx.manifest.params.svd_rel_tol
    for model in ctx.manifest.models:
        model_dir = ctx.out / "dmd" / _safe_name(model.id)
        model_dir.mkdir(parents=True, exist_ok=True)

        def one(item):
            stim_id, path = item
            layers = read_array(path, allow_nonfinite=ctx.options.allow_nonfinite)
            if layers.ndim != 2:
                raise ValidationError(
                    f"trajectory {path} must be 2-D (L, D), got {layers.shape}"
                )
            traj = EmbeddingTrajectory(stim_id, layers)
            return stim_id, analyze_trajectory(traj, tol)

        if ctx.options.jobs > 1:
            with ThreadPoolExecutor(max_workers=ctx.options.jobs) as pool:
                results = list(pool.map(one, model.trajectories))
        else:
            results = [one(item) for item in model.trajectories]

        for stim_id, report in results:
            write_array(model_dir / f"{_safe_name(stim_id)}.z.nft1", report.z)
            if report.status != "ok":
                warnings.warn(
                    f"model {model.id!r} stimulus {stim_id!r}: "
                    f"{report.status} trajectory, fell back to depth average",
                    UserWarning,
                    stacklevel=2,
                )
            if ctx.options.emit_spectra:
                write_json(
                    model_dir / f"{_safe_name(stim_id)}.spectrum.json",
                    {
                        "stimulus_id": stim_id,
                        "status": report.status,
                        "rank": report.rank,
                        "eigenvalues": [
                            {"re": ev.real, "im": ev.imag}
                            for ev in report.eigenvalues
                        ],
                        "selected_index": report.selected_index,
                    },
                )


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise ValidationError(
            f"missing intermediate {path}; run the {produced_by!r} stage first"
        )
    return path


def _stage_hrf(ctx: _Context) -> None:
    brain = _load_brain(ctx)
    params = ctx.hrf_params()
    stimuli = ctx.manifest.brain.stimuli
    onsets = [s.onset for s in stimuli]
    for model in ctx.manifest.models:
        model_dir = ctx.out / "dmd" / _safe_name(model.id)
        zs = [
            read_array(_require(model_dir / f"{_safe_name(s.id)}.z.nft1", "dmd"))
            for s in stimuli
        ]
        series = align_to_volumes(onsets, zs, brain.tr, brain.n_volumes)
        convolved = convolve_hrf(series, params)
        out_dir = ctx.out / "hrf"
        out_dir.mkdir(parents=True, exist_ok=True)
        write_array(out_dir / f"{_safe_name(model.id)}.nft1", convolved.Z)
        write_json(
            out_dir / f"{_safe_name(model.id)}.json",
            {"tr": convolved.tr, "convolved": True, "model_id": model.id},
        )


def _stage_encode(ctx: _Context) -> None:
    brain = _load_brain(ctx)
    p = ctx.manifest.params
    cfg = EncodingConfig(
        cv_folds=p.cv_folds,
        ridge_lambdas=p.ridge_lambdas,
        seed=ctx.seed,
        n_jobs=ctx.options.jobs,
    )
    out_dir = ctx.out / "encode"
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = np.empty((len(ctx.manifest.models), brain.n_rois))
    index = []
    for i, model in enumerate(ctx.manifest.models):
        feat_path = _require(ctx.out / "hrf" / f"{_safe_name(model.id)}.nft1", "hrf")
        features = FeatureSeries(tr=brain.tr, Z=read_array(feat_path), convolved=True)
        vec = alignment_vector(
            features, brain, cfg, model_id=model.id, modality=model.modality
        )
        matrix[i] = vec.scores
        index.append({"id": model.id, "modality": model.modality})
        write_csv(
            out_dir / f"{_safe_name(model.id)}.csv",
            ["roi_index", "score"],
            [(r, vec.scores[r]) for r in range(brain.n_rois)],
        )
    write_array(out_dir / "alignment_matrix.nft1", matrix)
    write_json(out_dir / "models.json", {"models": index})


def _load_alignment(ctx: _Context):
    matrix = read_array(
        _require(ctx.out / "encode" / "alignment_matrix.nft1", "encode")
    )
    doc = json.loads((ctx.out / "encode" / "models.json").read_text())
    ids = [m["id"] for m in doc["models"]]
    modalities = [m["modality"] for m in doc["models"]]
    return matrix, ids, modalities


def _snci_maps(ctx: _Context):
    matrix, ids, modalities = _load_alignment(ctx)
    eps = ctx.manifest.params.epsilon
    maps = {}
    for modality in dict.fromkeys(modalities):
        rows = [i for i, m in enumerate(modalities) if m == modality]
        group = ModalityGroup(
            modality=modality,
            model_ids=tuple(ids[i] for i in rows),
            C=matrix[rows],
        )
        maps[modality] = snci_map(group, eps)
    return matrix, ids, modalities, maps


def _stage_snci(ctx: _Context) -> None:
    _, _, _, maps = _snci_maps(ctx)
    out_dir = ctx.out / "snci"
    out_dir.mkdir(parents=True, exist_ok=True)
    if ctx.options.joint_zscore:
        joined = np.concatenate([m.snci for m in maps.values()])
        zs = zscore_across_rois(joined)
        offsets = np.cumsum([0] + [m.snci.size for m in maps.values()])
        z_by_modality = {
            name: zs[offsets[i] : offsets[i + 1]]
            for i, name in enumerate(maps)
        }
    else:
        z_by_modality = {name: zscore_across_rois(m.snci) for name, m in maps.items()}
    for name, smap in maps.items():
        z = z_by_modality[name]
        write_csv(
            out_dir / f"{_safe_name(name)}.csv",
            ["roi_index", "mu", "sigma", "snci", "snci_z"],
            [
                (r, smap.mu[r], smap.sigma[r], smap.snci[r], z[r])
                for r in range(smap.snci.size)
            ],
        )


def emit_reports(results: dict, out_dir: Path | str) -> list[Path]:
    """Write the stats-stage artifact set; returns the emitted paths.

    ``results`` must carry the population geometry and network summaries;
    an empty results dict is an error rather than a source of silent empty
    files.
    """
    if not results:
        raise ValidationError("stats results are empty; nothing to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emitted = []
    coords = results["pca_coordinates"]
    labels = results["modalities"]
    ids = results["model_ids"]
    k = coords.shape[1]
    emitted.append(
        write_csv(
            out / "pca_coordinates.csv",
            ["model_id", "modality"] + [f"pc{i + 1}" for i in range(k)],
            [
                [ids[m], labels[m]] + [coords[m, i] for i in range(k)]
                for m in range(len(ids))
            ],
        )
    )
    emitted.append(svg_scatter(out / "pca_scatter.svg", coords, labels))
    emitted.append(write_json(out / "pca_variance.json", results["pca_variance"]))
    emitted.append(write_json(out / "permanova.json", results["permanova"]))
    emitted.append(write_json(out / "silhouette.json", results["silhouette"]))
    emitted.append(
        write_json(out / "distance_contrast.json", results["distance_contrast"])
    )
    emitted.append(
        write_csv(
            out / "network_means.csv",
            ["modality", "network", "mean_snci"],
            results["network_means"],
        )
    )
    emitted.append(
        write_csv(
            out / "anova.csv",
            ["term", "sum_of_squares", "df", "F", "p"],
            results["anova_rows"],
        )
    )
    return emitted


def _stage_stats(ctx: _Context) -> None:
    matrix, ids, modalities, maps = _snci_maps(ctx)
    atlas = load_atlas(ctx.manifest.brain.atlas)
    p = ctx.manifest.params

    k = min(p.pca_components, matrix.shape[0] - 1, matrix.shape[1])
    if k < 1:
        raise ValidationError("PCA needs at least 2 models")
    emb = pca_embed(matrix, k)
    D = distance_matrix(matrix, metric=ctx.options.distance_metric)
    perm = permanova(D, modalities, n_perm=p.n_permutations, seed=ctx.seed)
    sil = silhouette(D, modalities, n_perm=p.n_permutations, seed=ctx.seed)
    intra, inter = distance_contrast(D, modalities)

    network_rows = []
    anova_obs = []
    for name, smap in maps.items():
        for r in range(atlas.n_rois):
            anova_obs.append((smap.snci[r], name, atlas.networks[r]))
        means = aggregate_networks(smap.snci, atlas.networks)
        for network, mean in means.items():
            network_rows.append((name, network, mean))
    table = two_way_anova(anova_obs)

    results = {
        "pca_coordinates": emb.coordinates,
        "pca_variance": {
            "explained_variance_ratio": emb.explained_variance_ratio,
            "components": k,
        },
        "model_ids": ids,
        "modalities": modalities,
        "permanova": {
            "pseudo_F": perm.pseudo_f,
            "p_value": perm.p_value,
            "n_permutations": perm.n_permutations,
            "seed": perm.seed,
            "exact": perm.exact,
            "metric": D.metric,
        },
        "silhouette": {
            "mean_silhouette": sil.mean_silhouette,
            "per_sample": sil.per_sample,
            "p_value": sil.p_value,
            "n_permutations": sil.n_permutations,
            "seed": sil.seed,
            "exact": sil.exact,
            "metric": D.metric,
        },
        "distance_contrast": {
            "intra_mean": intra,
            "inter_mean": inter,
            "metric": D.metric,
        },
        "network_means": network_rows,
        "anova_rows": [
            (
                row.term,
                row.ss,
                row.df,
                "" if row.f is None else row.f,
                "" if row.p is None else row.p,
            )
            for row in table.rows()
        ],
    }
    emit_reports(results, ctx.out / "stats")


_STAGE_FN = {
    "dmd": _stage_dmd,
    "hrf": _stage_hrf,
    "encode": _stage_encode,
    "snci": _stage_snci,
    "stats": _stage_stats,
}

_ARTIFACT_SUFFIXES = {".nft1", ".csv", ".json", ".svg"}


def parse_stage_filter(text: str | None) -> tuple[str, ...]:
    if not text:
        return STAGES
    chosen = tuple(s.strip() for s in text.split(",") if s.strip())
    unknown = [s for s in chosen if s not in STAGES]
    if unknown:
        raise ValidationError(f"unknown stages {unknown}; valid: {', '.join(STAGES)}")
    return tuple(s for s in STAGES if s in chosen)


def run_pipeline(
    manifest_path: Path | str,
    out_dir: Path | str,
    options: RunOptions = RunOptions(),
) -> RunReport:
    """Execute the selected stages and write run_report.json.

    The full pipeline is a pure function of the manifest bytes and the
    referenced input files; the report inventory carries a sha256 for
    every artifact under the output directory.
    """
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = manifest.seed if options.seed is None else options.seed
    ctx = _Context(manifest=manifest, out=out, seed=seed, options=options)
    report = RunReport(manifest_sha256=sha256_file(manifest_path), seed=seed)

    _validate(ctx)
    for stage in options.stages:
        marker = out / f"{stage}.partial"
        marker.write_text("")
        start = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                _STAGE_FN[stage](ctx)
            except AlignspaceError as exc:
                raise type(exc)(f"stage {stage!r}: {exc}") from exc
        messages = [str(w.message) for w in caught]
        report.warnings.extend(f"{stage}: {m}" for m in messages)
        if options.strict and messages:
            raise DegeneracyEscalation(
                f"stage {stage!r} hit degenerate inputs under --strict: {messages[0]}"
            )
        report.stage_seconds[stage] = time.perf_counter() - start
        marker.unlink()

    for path in sorted(out.rglob("*")):
        if path.is_file() and path.suffix in _ARTIFACT_SUFFIXES:
            if path.name == "run_report.json":
                continue
            report.inventory[str(path.relative_to(out))] = sha256_file(path)
    write_json(out / "run_report.json", report.to_doc())
    return report
