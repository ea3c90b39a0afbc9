"""Command-line entry points: simulate scenes, run the pipeline, score.

Exit codes: 0 success, 1 runtime error, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PipelineConfig, write_default_config
from .css import dump_masks
from .errors import ConfigInvalid, EmptyReference, SpecInvalid, SrdError
from .face_id import read_tracklets_jsonl
from .pipeline import (AttributedTranscript, MeetingInputs, oracle_providers,
                       run_pipeline)
from .scene_sim import SceneSpec, load_scene, simulate, standard_scenes, write_scene
from .scoring import score_transcript

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srdpipe",
        description="Synthetic meeting simulation, transcription, and scoring.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render a scene to a directory")
    group = sim.add_mutually_exclusive_group(required=True)
    group.add_argument("--scene", help="name from the built-in catalog")
    group.add_argument("--spec", help="path to a scene spec JSON file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=0)

    run = sub.add_parser("run", help="transcribe a simulated scene directory")
    run.add_argument("--audio", required=True,
                     help="mixture.wav inside a simulated scene directory")
    run.add_argument("--tracklets", help="tracklet JSONL (default: next to audio)")
    run.add_argument("--enrollment", help="enrollment JSON (default: next to audio)")
    run.add_argument("--config", help="pipeline config JSON")
    run.add_argument("--out", required=True, help="transcript JSONL path")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--no-video", action="store_true",
                     help="audio-only attribution (face term uniform)")
    run.add_argument("--streams", type=int, default=None,
                     help="number of separated output channels")
    run.add_argument("--emit-masks", action="store_true",
                     help="also write the stitched mask stream (masks.npz)")

    score = sub.add_parser("score", help="score a transcript against a reference")
    score.add_argument("--transcript", required=True)
    score.add_argument("--reference", required=True)
    score.add_argument("--out", help="write the JSON report here")

    cfg = sub.add_parser("default-config", help="write the default config file")
    cfg.add_argument("--out", required=True)
    return parser


def cmd_simulate(args) -> int:
    if args.scene:
        catalog = standard_scenes()
        if args.scene not in catalog:
            print(f"unknown scene {args.scene!r}; catalog: {sorted(catalog)}",
                  file=sys.stderr)
            return EXIT_INVALID
        spec = catalog[args.scene]
    else:
        try:
            spec = SceneSpec.from_json(Path(args.spec).read_text())
        except OSError as e:
            print(f"cannot read spec: {e}", file=sys.stderr)
            return EXIT_INVALID
    out = simulate(spec, seed=args.seed)
    write_scene(out, args.out)
    print(f"wrote scene {out.meeting_id} to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    audio_path = Path(args.audio)
    scene_dir = audio_path.parent
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.streams:
        config = config.replace_section("css", n_outputs=args.streams)
    if config.io.scene_dir:
        scene_dir = Path(config.io.scene_dir)
    if not (scene_dir / "scene.json").exists():
        print(f"no scene.json beside {audio_path}; the bundled oracle "
              "providers need a simulated scene directory", file=sys.stderr)
        return EXIT_INVALID
    scene = load_scene(scene_dir)

    tracklets_path = Path(args.tracklets) if args.tracklets else scene_dir / "tracklets.jsonl"
    tracklets = read_tracklets_jsonl(tracklets_path) if tracklets_path.exists() else []

    enrollment_path = Path(args.enrollment) if args.enrollment else scene_dir / "enrollment.json"
    enrollment = {}
    if enrollment_path.exists():
        import numpy as np
        with open(enrollment_path) as f:
            for rec in json.load(f):
                enrollment[rec["speaker_id"]] = np.asarray(rec["embedding"])

    inputs = MeetingInputs(
        mixture=scene.mixture,
        tracklets=tracklets,
        enrollment_voice=enrollment,
        galleries={p: g for p, g in scene.enrollment_galleries().items()
                   if p in enrollment},
        background=scene.background_set(),
        meeting_id=scene.meeting_id)
    providers = oracle_providers(scene, config, seed=args.seed)
    result = run_pipeline(inputs, providers, config, use_video=not args.no_video)
    result.transcript.to_jsonl(args.out)
    if args.emit_masks:
        dump_masks(result.mask_stream, str(Path(args.out).with_suffix("")) + "-masks.npz",
                   fmt="npz")
    for flag in result.flags:
        print(f"flag: {flag}", file=sys.stderr)
    print(f"wrote {len(result.transcript.records)} attributed words to {args.out}")
    return EXIT_OK


def _read_reference_jsonl(path) -> list[dict]:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def cmd_score(args) -> int:
    try:
        hyp = AttributedTranscript.from_jsonl(args.transcript)
        ref = _read_reference_jsonl(args.reference)
    except (OSError, json.JSONDecodeError, TypeError) as e:
        print(f"cannot read inputs: {e}", file=sys.stderr)
        return EXIT_INVALID
    ref_ids = {r.get("meeting_id") for r in ref} - {None}
    if hyp.meeting_id is not None and ref_ids and {hyp.meeting_id} != ref_ids:
        print(f"meeting id mismatch: transcript {hyp.meeting_id!r} vs "
              f"reference {sorted(ref_ids)}", file=sys.stderr)
        return EXIT_INVALID
    report = score_transcript(ref, [r.as_dict() for r in hyp.records],
                              meeting_id=hyp.meeting_id)
    print(report.summary_table())
    if args.out:
        with open(args.out, "w") as f:
            json.dump(report.as_dict(), f, sort_keys=True, indent=1)
            f.write("\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "score":
            return cmd_score(args)
        if args.command == "default-config":
            write_default_config(args.out)
            return EXIT_OK
        return EXIT_INVALID
    except (SpecInvalid, ConfigInvalid, EmptyReference) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SrdError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
