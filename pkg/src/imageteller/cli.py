"""Headless batch interface: illustrated story from a directory of images.

Frames are ordered by filename (lexicographic). Output directory receives
story.md, one PNG per illustrated chapter, and the canonical story.json
manifest (the same format the library store uses).

Exit codes: 0 success, 2 validation error, 3 generation failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .agents import make_suite
from .domain import (
    InputFrame,
    NarrativeKind,
    NarrativeRequest,
    genre_catalog,
    sniff_media_type,
    story_to_document,
    document_to_json,
    validate_request,
)
from .parsing import render_story
from .pipeline import PlotManager

EXIT_VALIDATION = 2
EXIT_GENERATION = 3
EXIT_IO = 4

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".webp"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imageteller",
        description="Generate an illustrated story from a directory of images.",
    )
    parser.add_argument("--in", dest="input_dir", required=True, help="directory of input images")
    parser.add_argument("--out", dest="output_dir", required=True, help="output directory")
    parser.add_argument("--captions", help="TSV file mapping filename<TAB>caption")
    parser.add_argument("--genre", help="one of the catalog genres")
    parser.add_argument("--data-driven", action="store_true", help="compose a data-driven narrative")
    parser.add_argument("--backend", choices=["live", "mock"], default="mock")
    parser.add_argument("--seed", type=int, help="fix all illustration seeds")
    parser.add_argument("--max-frames", type=int, default=10)
    return parser


def _load_captions(path: Path) -> dict[str, str]:
    captions: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        name, _, caption = line.partition("\t")
        captions[name] = caption
    return captions


def _collect_frames(input_dir: Path, captions: dict[str, str]) -> list[InputFrame]:
    frames = []
    files = sorted(
        p for p in input_dir.iterdir()
        if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
    )
    for i, path in enumerate(files, start=1):
        data = path.read_bytes()
        frames.append(
            InputFrame(
                index=i,
                image_data=data,
                media_type=sniff_media_type(data) or "png",
                caption=captions.get(path.name),
            )
        )
    return frames


def _resolve_kind(args) -> NarrativeKind:
    catalog = genre_catalog()
    if args.data_driven:
        return NarrativeKind.data_driven()
    if args.genre:
        for entry in catalog.entries:
            if entry.name == args.genre:
                if entry.data_driven:
                    return NarrativeKind.data_driven()
                return NarrativeKind.story_with_genre(catalog.genre(args.genre))
        names = ", ".join(e.name for e in catalog.entries)
        raise SystemExit2(f"unknown genre {args.genre!r}; valid genres: {names}")
    return NarrativeKind.story_free()


class SystemExit2(Exception):
    """Validation failure carrying the message for stderr."""


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    input_dir = Path(args.input_dir)
    output_dir = Path(args.output_dir)

    try:
        kind = _resolve_kind(args)
    except SystemExit2 as exc:
        print(f"validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        captions = _load_captions(Path(args.captions)) if args.captions else {}
        if not input_dir.is_dir():
            print(f"io: input directory not found: {input_dir}", file=sys.stderr)
            return EXIT_IO
        frames = _collect_frames(input_dir, captions)
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return EXIT_IO

    request = NarrativeRequest(
        frames=tuple(frames), kind=kind, max_frames=args.max_frames
    )
    result = validate_request(request)
    if not result.ok:
        for issue in result.issues:
            print(f"validation: {issue.message}", file=sys.stderr)
        return EXIT_VALIDATION

    seed_source = None
    if args.seed is not None:
        rng = random.Random(args.seed)
        seed_source = lambda: rng.getrandbits(63)

    suite = make_suite(args.backend)
    manager = (
        PlotManager(suite, seed_source=seed_source)
        if seed_source
        else PlotManager(suite)
    )
    job = manager.run_generation(request)
    if job.state != "Done":
        stage = job.progress_log[-1].stage if job.progress_log else "unknown"
        print(f"generation failed at stage {stage}: {job.error}", file=sys.stderr)
        return EXIT_GENERATION

    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        doc = story_to_document(
            job.story,
            write_image=lambda ref, data: (output_dir / ref).write_bytes(data),
        )
        (output_dir / "story.json").write_text(
            document_to_json(doc), encoding="utf-8"
        )
        (output_dir / "story.md").write_text(
            render_story(job.story), encoding="utf-8"
        )
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"wrote {output_dir / 'story.md'} ({len(job.story.chapters)} chapters)")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
