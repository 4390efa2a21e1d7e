"""Command-line entry point.

Subcommands: pipeline, dmd, hrf, encode, snci, stats, synth, validate.
Exit codes: 0 success, 2 validation error, 3 numerical degeneracy
escalated by --strict, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import AlignspaceError, ValidationError
from .pipeline import (
    STAGES,
    DegeneracyEscalation,
    RunOptions,
    parse_stage_filter,
    run_pipeline,
)
from .synth import WorkspaceSpec, gen_workspace
from .tensor_store import load_atlas, load_manifest

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DEGENERACY = 3
EXIT_IO = 4


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="manifest JSON path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override manifest seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallelism degree")
    parser.add_argument(
        "--strict", action="store_true", help="escalate degeneracies to exit code 3"
    )
    parser.add_argument(
        "--emit-spectra",
        action="store_true",
        help="write a spectrum JSON per stimulus in the dmd stage",
    )
    parser.add_argument(
        "--allow-nonfinite",
        action="store_true",
        help="quarantine NaN/Inf tensors instead of rejecting them",
    )
    parser.add_argument(
        "--joint-zscore",
        action="store_true",
        help="z-score consistency maps jointly across modalities",
    )
    parser.add_argument(
        "--distance-metric",
        choices=("cosine", "euclidean"),
        default="cosine",
        help="distance used by the stats stage",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alignspace",
        description=(
            "Depth-dynamics embeddings, ROI encoding models, and "
            "cross-model consistency statistics"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("pipeline", help="run all (or selected) stages")
    _add_run_args(run)
    run.add_argument(
        "--stages",
        default=None,
        help=f"comma-separated subset of: {','.join(STAGES)}",
    )

    for stage in STAGES:
        single = sub.add_parser(stage, help=f"run only the {stage} stage")
        _add_run_args(single)

    synth = sub.add_parser("synth", help="emit a synthetic workspace")
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument(
        "--modalities", default="vision,audio,language", help="comma-separated"
    )
    synth.add_argument("--models-per-modality", type=int, default=4)
    synth.add_argument("--stimuli", type=int, default=24)
    synth.add_argument("--layers", type=int, default=12)
    synth.add_argument("--dim", type=int, default=16)
    synth.add_argument("--rois", type=int, default=14)
    synth.add_argument("--volumes", type=int, default=120)
    synth.add_argument("--tr", type=float, default=1.5)
    synth.add_argument("--noise", type=float, default=0.0)
    synth.add_argument("--jitter", type=float, default=0.05)

    val = sub.add_parser("validate", help="validate a manifest and its inputs")
    val.add_argument("--manifest", required=True)

    return parser


def _run_options(args: argparse.Namespace, stages) -> RunOptions:
    return RunOptions(
        stages=stages,
        seed=args.seed,
        jobs=args.jobs,
        strict=args.strict,
        emit_spectra=args.emit_spectra,
        allow_nonfinite=args.allow_nonfinite,
        joint_zscore=args.joint_zscore,
        distance_metric=args.distance_metric,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "pipeline":
            stages = parse_stage_filter(args.stages)
            report = run_pipeline(args.manifest, args.out, _run_options(args, stages))
            print(f"pipeline complete; {len(report.inventory)} artifacts in {args.out}")
        elif args.command in STAGES:
            report = run_pipeline(
                args.manifest, args.out, _run_options(args, (args.command,))
            )
            print(f"stage {args.command} complete ({args.out})")
        elif args.command == "synth":
            spec = WorkspaceSpec(
                seed=args.seed,
                modalities=tuple(m.strip() for m in args.modalities.split(",")),
                models_per_modality=args.models_per_modality,
                n_stimuli=args.stimuli,
                n_layers=args.layers,
                dim=args.dim,
                n_rois=args.rois,
                n_volumes=args.volumes,
                tr=args.tr,
                noise_sigma=args.noise,
                model_jitter=args.jitter,
            )
            manifest = gen_workspace(spec, args.out)
            print(f"synthetic workspace written; manifest at {manifest}")
        elif args.command == "validate":
            manifest = load_manifest(args.manifest)
            atlas = load_atlas(manifest.brain.atlas)
            print(
                f"manifest ok: {len(manifest.models)} models, "
                f"{len(manifest.brain.stimuli)} stimuli, {atlas.n_rois} ROIs"
            )
    except DegeneracyEscalation as exc:
        print(f"degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except AlignspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
