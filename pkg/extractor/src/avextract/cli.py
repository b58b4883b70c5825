"""Small CLI: extract embeddings from a directory of videos."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .encoders import DeterministicEncoder, EncoderError, ImageBindEncoder
from .extract import ExtractionJob, extract
from .media import FfmpegSource, MediaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avextract")
    parser.add_argument("--videos", required=True, help="directory of video files")
    parser.add_argument("--classes", required=True, help="text file, one class name per line")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--encoder", default="deterministic",
                        choices=("deterministic", "imagebind"))
    parser.add_argument("--checkpoint", help="encoder checkpoint (imagebind backend)")
    parser.add_argument("--dim", type=int, default=1024,
                        help="embedding width (deterministic backend)")
    parser.add_argument("--segment-length", type=float, default=1.0)
    parser.add_argument("--text-template", help='e.g. "a video of {}"')
    parser.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.encoder == "imagebind":
            if not args.checkpoint:
                raise EncoderError("--checkpoint is required for the imagebind backend")
            encoder = ImageBindEncoder(args.checkpoint)
        else:
            encoder = DeterministicEncoder(dim=args.dim)
        class_names = [
            line.strip()
            for line in Path(args.classes).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        sources = []
        for path in sorted(Path(args.videos).iterdir()):
            if not path.is_file():
                continue
            try:
                sources.append(FfmpegSource(path))
            except MediaError as exc:
                print(f"skipping {path.name}: {exc}", file=sys.stderr)
        job = ExtractionJob(
            videos=sources,
            class_names=class_names,
            output_dir=Path(args.out),
            segment_length=args.segment_length,
            text_template=args.text_template,
        )
        result = extract(job, encoder, jobs=args.jobs)
    except (EncoderError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"extracted {len(result.written)} videos "
        f"({len(result.skipped)} skipped) into {args.out}"
    )
    return 0


def entry() -> None:
    sys.exit(main())
