"""Command-line interface: ``shadowroad {run,shadow,eval,synth,compare}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import metrics, pipeline, shadowfilter, synth
from .imagecore import (
    DimensionMismatchError,
    ImageError,
    StructuringElement,
    load_image,
    load_mask,
    save_gray,
    save_image,
    save_mask,
)

log = logging.getLogger("shadowroad")

MANIFEST = "manifest.tsv"
IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")


class CliError(Exception):
    pass


def frame_label(frame_id: str) -> str:
    """``frame_0003`` -> ``3``; ids without a numeric tail are kept."""
    m = re.search(r"(\d+)$", frame_id)
    return str(int(m.group(1))) if m else frame_id


# config fields exposed as flags; booleans get --x / --no-x
_CONFIG_FLAGS = [f for f in dataclasses.fields(pipeline.PipelineConfig) if f.name != "output_dir"]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    for f in _CONFIG_FLAGS:
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            conv = {"int": int, "float": float}.get(f.type, str)
            p.add_argument(flag, dest=f.name, type=conv, default=None)


def _config(args, **overrides) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig()
    if args.config:
        cfg = pipeline.load_config(args.config, cfg)
    changes = {f.name: getattr(args, f.name) for f in _CONFIG_FLAGS if getattr(args, f.name) is not None}
    changes.update(overrides)
    try:
        return dataclasses.replace(cfg, **changes)
    except TypeError as exc:
        raise pipeline.ConfigError(str(exc)) from None


def read_manifest(directory: Path) -> list[tuple[str, Path, Path | None]]:
    entries = []
    for lineno, line in enumerate((directory / MANIFEST).read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (1, 2):
            raise CliError(f"{directory / MANIFEST}:{lineno}: expected frame<TAB>truth")
        frame = directory / parts[0]
        truth = directory / parts[1] if len(parts) == 2 and parts[1] else None
        entries.append((frame.stem, frame, truth))
    return entries


def load_frames(directory) -> list[pipeline.Frame]:
    """Frames of a directory, paired with truth masks when a manifest exists."""
    directory = Path(directory)
    if not directory.is_dir():
        raise CliError(f"missing input directory: {directory}")
    if (directory / MANIFEST).is_file():
        entries = read_manifest(directory)
    else:
        entries = [(p.stem, p, None) for p in sorted(directory.iterdir())
                   if p.suffix.lower() in IMAGE_SUFFIXES]
    if not entries:
        raise CliError(f"no frames found in {directory}")
    frames = []
    for fid, path, truth_path in entries:
        img = load_image(path)
        truth = load_mask(truth_path) if truth_path is not None else None
        if truth is not None and truth.shape != img.shape[:2]:
            raise DimensionMismatchError(f"dimension mismatch: frame {frame_label(fid)}")
        frames.append(pipeline.Frame(fid, img, truth))
    return frames


def synthetic_frames(count: int, seed: int, shadows: bool = True) -> list[tuple[pipeline.Frame, np.ndarray]]:
    n_scenes = max(1, math.ceil(count / 10))
    scenes = synth.benchmark_scenes(n_scenes, 10, master_seed=seed, shadows=shadows)[:count]
    out = []
    for k, spec in enumerate(scenes):
        img, truth, shadow = synth.generate_scene(spec)
        out.append((pipeline.Frame(f"frame_{k:04d}", img, truth), shadow))
    return out


def cmd_run(args) -> int:
    cfg = _config(args, output_dir=str(args.out))
    if args.frames:
        frames = load_frames(args.frames)
    else:
        frames = [f for f, _ in synthetic_frames(args.synthetic, args.scene_seed)]
    stream = pipeline.run_stream(frames, cfg)
    for fid, msg in stream.failures:
        print(f"warning: frame {frame_label(fid)} skipped: {msg}", file=sys.stderr)
    print(f"processed {len(stream.results)} of {len(frames)} frames -> {args.out}")
    if stream.counts:
        for k, g in enumerate(stream.groups(cfg.group_size), start=1):
            r = g.micro
            print(f"group {k} ({g.label}): ACC={metrics.format_rate(r.acc)} "
                  f"ERR={metrics.format_rate(r.err)} TPR={metrics.format_rate(r.tpr)} "
                  f"FPR={metrics.format_rate(r.fpr)}")
    return 0 if stream.results else 1


def cmd_shadow(args) -> int:
    img = load_image(args.image)
    se = StructuringElement.parse(args.se)
    rep = shadowfilter.detect_and_remove(img, se, args.min_area, args.max_brightness)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_image(rep.image, out / "compensated.png")
    save_mask(rep.shadow_mask, out / "shadow_mask.pgm")
    save_gray(rep.ndi, out / "ndi.pgm", -1.0, 1.0)
    print(f"threshold T={rep.threshold.T:.6f}; {len(rep.components)} shadow component(s), "
          f"{int(rep.shadow_mask.sum())} px")
    return 0


def _mask_files(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        raise CliError(f"missing input directory: {directory}")
    return {p.stem: p for p in sorted(directory.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES}


def cmd_eval(args) -> int:
    preds, truths = _mask_files(Path(args.pred)), _mask_files(Path(args.truth))
    common = sorted(set(preds) & set(truths))
    if not common:
        raise CliError("no prediction/truth pairs with matching names")
    for missing in sorted(set(preds) ^ set(truths)):
        print(f"warning: {missing} has no counterpart; ignored", file=sys.stderr)
    counts = []
    for fid in common:
        pred, truth = load_mask(preds[fid]), load_mask(truths[fid])
        if pred.shape != truth.shape:
            raise DimensionMismatchError(f"dimension mismatch: frame {frame_label(fid)}")
        counts.append((fid, metrics.confusion(pred, truth)))
    text = metrics.metrics_csv(counts, args.group_size)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    for sub in ("frames", "truth", "shadow"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    lines = []
    for frame, shadow in synthetic_frames(args.frames, args.seed, shadows=not args.no_shadow):
        save_image(frame.image, out / "frames" / f"{frame.frame_id}.png")
        save_mask(frame.truth, out / "truth" / f"{frame.frame_id}.pgm")
        save_mask(shadow, out / "shadow" / f"{frame.frame_id}.pgm")
        lines.append(f"frames/{frame.frame_id}.png\ttruth/{frame.frame_id}.pgm")
    (out / MANIFEST).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} frames to {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    frames = load_frames(args.scenes)
    if any(f.truth is None for f in frames):
        raise CliError(f"compare needs truth masks: {Path(args.scenes) / MANIFEST} is missing")
    runs = pipeline.compare(frames, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(pipeline.comparison_csv(runs, cfg.group_size))
    for label, stream in runs.items():
        (out / f"frames_{label}.csv").write_text(stream.csv(cfg.group_size) or "")
    from .chart import comparison_chart

    comparison_chart(runs, cfg.group_size, out / "comparison.png")
    for k, (a, b) in enumerate(zip(runs["with_filter"].groups(cfg.group_size),
                                   runs["without_filter"].groups(cfg.group_size)), start=1):
        print(f"group {k}: ERR with={metrics.format_rate(a.micro.err)} "
              f"without={metrics.format_rate(b.micro.err)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowroad", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline on a frame directory or synthetic scenes")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--frames", help="directory of frames (manifest.tsv pairs truth masks)")
    src.add_argument("--synthetic", type=int, metavar="N", help="generate N synthetic frames")
    p.add_argument("--scene-seed", type=int, default=2024)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("shadow", help="shadow detection and compensation on one image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--se", default="square:3")
    p.add_argument("--min-area", type=int, default=shadowfilter.DEFAULT_MIN_AREA)
    p.add_argument("--max-brightness", type=float,
                   default=shadowfilter.DEFAULT_MAX_RELATIVE_BRIGHTNESS)
    p.set_defaults(func=cmd_shadow)

    p = sub.add_parser("eval", help="score predicted masks against truth masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--group-size", type=int, default=10)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--no-shadow", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", help="pipeline with vs. without shadow filtering")
    p.add_argument("--scenes", required=True, help="dataset directory with manifest.tsv")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ImageError, pipeline.ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
