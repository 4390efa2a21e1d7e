"""CLI: dump layer trajectories for one model over a stimulus list."""

from __future__ import annotations

import argparse
import sys

from .jobs import MODALITIES, ExtractionJob, JobError, extract_trajectories


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Extract layer-wise hidden states into NFT1 trajectory tensors",
    )
    parser.add_argument("--model", required=True, help="hub name or local model path")
    parser.add_argument("--modality", required=True, choices=MODALITIES)
    parser.add_argument(
        "--stimuli",
        required=True,
        nargs="+",
        help="file paths (vision/audio, .txt for language) or raw text strings",
    )
    parser.add_argument(
        "--ids",
        nargs="+",
        default=None,
        help="stimulus ids matching --stimuli (default stim-000, stim-001, ...)",
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--model-id", default=None, help="manifest id (default: model basename)"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = None
    try:
        job = ExtractionJob(
            model=args.model,
            modality=args.modality,
            stimuli=tuple(args.stimuli),
            stimulus_ids=tuple(args.ids) if args.ids else None,
            output_dir=args.out,
            model_id=args.model_id,
        )
        result = extract_trajectories(job)
    except JobError as exc:
        print(f"extraction error: {exc}", file=sys.stderr)
        return 2
    print(
        f"{result.model_id}: {len(result.tensor_paths)} trajectories "
        f"(L={result.n_layers}, D={result.dim}), {len(result.skipped)} skipped; "
        f"fragment at {result.fragment_path}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
