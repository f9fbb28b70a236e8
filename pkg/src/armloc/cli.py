"""Command-line entry point: ``armloc <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 I/O, 3 malformed input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from . import formats
from .associate import OccupancyMap, detect_arms, extrapolate_hand
from .augment import (
    LIGHTING_CONDITIONS,
    GeometricAugmentParams,
    geometric_augment,
    lighting_augment,
    mirror_symmetry,
)
from .core import ArmClass, FrameAnnotation, PipelineConfig
from .labelgen import render_stack
from .metrics import ALL, angle_curve, average_arm_length, pck_curve
from .synth import noise_rng, synth_frames, synth_stack

log = logging.getLogger("armloc")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FORMAT = 0, 1, 2, 3

PCK_THRESHOLDS = tuple(round(0.01 * i, 2) for i in range(1, 31))
ANGLE_THRESHOLDS = tuple(float(i) for i in range(1, 31))

# Occupancy PNG colours per arm class (RGB in [0, 1]).
OCCUPANCY_COLORS = {
    ArmClass.DriverLeft: (1.0, 0.2, 0.2),
    ArmClass.DriverRight: (0.2, 1.0, 0.2),
    ArmClass.PassengerLeft: (0.2, 0.4, 1.0),
    ArmClass.PassengerRight: (1.0, 0.9, 0.1),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --------------------------------------------------------------------------
# helpers

def _ordered_map(fn: Callable, items: Sequence, jobs: int) -> List:
    """Map preserving input order; a process pool when ``jobs > 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with PipelineConfig overrides")
    for name in PipelineConfig.field_names():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float, default=None)


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None) is not None:
        try:
            overrides = json.loads(args.config.read_text())
        except json.JSONDecodeError as e:
            raise formats.FormatError(f"config file is not valid JSON: {e}") from e
        if not isinstance(overrides, dict):
            raise formats.FormatError("config file must hold a JSON object")
        try:
            cfg = cfg.updated(overrides)
        except ValueError as e:
            raise formats.FormatError(str(e)) from e
    flags = {n: getattr(args, n) for n in PipelineConfig.field_names()
             if getattr(args, n, None) is not None}
    try:
        return cfg.updated(flags)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _safe_id(frame_id: str) -> str:
    if not frame_id or "/" in frame_id or "\\" in frame_id or frame_id in (".", ".."):
        raise formats.FormatError(f"frame_id {frame_id!r} is not usable as a file name")
    return frame_id


def _hmap_inputs(paths: Iterable[Path]) -> List[Path]:
    out = []
    for p in paths:
        if p.is_dir():
            out.extend(sorted(p.glob("*.hmap")))
        elif p.exists():
            out.append(p)
        else:
            raise FileNotFoundError(f"no such file or directory: {p}")
    if not out:
        raise UsageError("no .hmap inputs found")
    return out


# --------------------------------------------------------------------------
# subcommands

def cmd_labelgen(args) -> int:
    cfg = _load_config(args)
    frames = formats.read_annotations(args.annotations)
    names = [_safe_id(f.frame_id) for f in frames]
    stacks = _ordered_map(_Render(cfg), frames, args.jobs)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, st in zip(names, stacks):
        formats.write_hmap(args.out_dir / f"{name}.hmap", st)
    log.info("wrote %d stacks to %s", len(stacks), args.out_dir)
    return EXIT_OK


class _Render:
    def __init__(self, cfg):
        self.cfg = cfg

    def __call__(self, frame):
        return render_stack(frame, self.cfg)


def _pick_frame(frames: List[FrameAnnotation], frame_id: Optional[str], image: Path) -> FrameAnnotation:
    if frame_id is not None:
        hits = [f for f in frames if f.frame_id == frame_id]
        if not hits:
            raise UsageError(f"frame {frame_id!r} not in annotation file")
        return hits[0]
    if len(frames) == 1:
        return frames[0]
    hits = [f for f in frames if f.frame_id == image.stem]
    if not hits:
        raise UsageError("annotation file has several frames; pass --frame-id")
    return hits[0]


def cmd_augment(args) -> int:
    if args.mode == "lighting" and args.condition is None:
        raise UsageError("--mode lighting needs --condition")
    if args.mode == "mirror" and args.side is None:
        raise UsageError("--mode mirror needs --side")
    if args.mode != "lighting" and (args.annotations is None or args.out_annotations is None):
        raise UsageError(f"--mode {args.mode} needs --annotations and --out-annotations")

    image = formats.read_gray_png(args.image)
    frame = None
    if args.annotations is not None:
        frame = _pick_frame(formats.read_annotations(args.annotations), args.frame_id, args.image)
        if frame.image_size != (image.shape[1], image.shape[0]):
            raise formats.FormatError(
                f"annotation size {frame.image_size} does not match image "
                f"{(image.shape[1], image.shape[0])}")

    if args.mode == "mirror":
        out, out_frame = mirror_symmetry(image, frame, args.side)
    elif args.mode == "lighting":
        out = lighting_augment(image, args.condition, args.seed, args.blur_sigma)
        out_frame = frame
    else:
        params = GeometricAugmentParams(args.max_rotation, args.crop_w, args.crop_h,
                                        args.scale_min, args.scale_max, args.random_offset)
        out, out_frame = geometric_augment(image, frame, params, args.seed)

    png = formats.encode_gray_png(out)
    ann_text = formats.dumps_annotations([out_frame]) if out_frame is not None else None
    formats.atomic_write_bytes(args.out_image, png)
    if args.out_annotations is not None and ann_text is not None:
        formats.atomic_write_text(args.out_annotations, ann_text)
    return EXIT_OK


class _Decode:
    def __init__(self, cfg):
        self.cfg = cfg

    def __call__(self, item):
        frame_id, stack = item
        dets = detect_arms(stack, self.cfg)
        return formats.detections_record(frame_id, dets,
                                         (stack.width * stack.stride, stack.height * stack.stride))


def cmd_decode(args) -> int:
    cfg = _load_config(args)
    paths = _hmap_inputs(args.inputs)
    items = []
    for p in paths:
        st = formats.read_hmap(p)
        if isinstance(st, np.ndarray):
            raise formats.FormatError(f"{p}: expected 17 channels, got {st.shape[0]}")
        items.append((p.stem, st))
    records = _ordered_map(_Decode(cfg), items, args.jobs)
    formats.atomic_write_text(args.out, formats.dumps_detections(records))
    log.info("decoded %d stacks -> %s", len(records), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    dets, _ = formats.read_detections(args.detections)
    frames = formats.read_annotations(args.annotations)
    norm = args.norm_length if args.norm_length is not None else average_arm_length(frames)
    pck = pck_curve(dets, frames, norm, PCK_THRESHOLDS)
    ang = angle_curve(dets, frames, ANGLE_THRESHOLDS, args.min_arm_length)
    summary = {
        "n_frames": len(frames),
        "norm_length": norm,
        "pck_at_0.05": pck[ALL].rate_at(0.05),
        "pck_at_0.10": pck[ALL].rate_at(0.10),
        "pck_per_part_at_0.10": {k: v.rate_at(0.10) for k, v in pck.items() if k != ALL},
        "angle_within_3deg": ang[ALL].rate_at(3.0),
        "angle_within_5deg": ang[ALL].rate_at(5.0),
        "angle_per_arm_within_5deg": {k: v.rate_at(5.0) for k, v in ang.items() if k != ALL},
        "n_joints": pck[ALL].n_samples,
        "n_arms": ang[ALL].n_samples,
    }
    pck_text = formats.curves_csv(pck, "threshold")
    ang_text = formats.curves_csv(ang, "threshold_deg")
    args.out_dir.mkdir(parents=True, exist_ok=True)
    formats.atomic_write_text(args.out_dir / "pck.csv", pck_text)
    formats.atomic_write_text(args.out_dir / "angle.csv", ang_text)
    formats.atomic_write_text(args.out_dir / "summary.json", json.dumps(summary, indent=1) + "\n")
    print(f"PCK@0.10 = {summary['pck_at_0.10']:.4f}  angle<=5deg = {summary['angle_within_5deg']:.4f}")
    return EXIT_OK


def occupancy_png(maps) -> np.ndarray:
    """Additive colour composite; each class's grid is scaled by its own maximum."""
    h, w = next(iter(maps.values())).grid.shape
    rgb = np.zeros((h, w, 3))
    for arm, occ in maps.items():
        peak = occ.grid.max()
        if peak > 0:
            rgb += (occ.grid / peak)[:, :, None] * np.asarray(OCCUPANCY_COLORS[arm])
    return np.clip(rgb, 0.0, 1.0)


def cmd_occupancy(args) -> int:
    if not args.splat_sigma > 0:
        raise UsageError("--splat-sigma must be > 0")
    dets, sizes = formats.read_detections(args.detections)
    modes = {}
    if args.annotations is not None:
        modes = {f.frame_id: f.drive_mode for f in formats.read_annotations(args.annotations)}
    if not sizes:
        raise formats.FormatError("detections file is empty")
    dims = set(sizes.values())
    if len(dims) != 1:
        raise formats.FormatError(f"frames differ in size: {sorted(dims)}")
    w, h = dims.pop()
    lambda_h = args.lambda_h if args.lambda_h is not None else PipelineConfig().lambda_h
    maps = {arm: OccupancyMap(w, h, args.splat_sigma, args.drive_mode) for arm in ArmClass}
    for fid, per in dets.items():
        for arm, d in per.items():
            if d.present and d.wrist != d.elbow:
                maps[arm].accumulate(extrapolate_hand(d.wrist, d.elbow, lambda_h), modes.get(fid))
    grids = np.stack([maps[a].grid for a in ArmClass]).astype(np.float32)
    png = formats.encode_rgb_png(occupancy_png(maps))
    formats.atomic_write_bytes(args.out.with_suffix(".png"), png)
    formats.write_hmap(args.out.with_suffix(".hmap"), grids)
    print(" ".join(f"{a.name}={maps[a].count}" for a in ArmClass))
    return EXIT_OK


class _Synth:
    def __init__(self, cfg, noise, seed):
        self.cfg, self.noise, self.seed = cfg, noise, seed

    def __call__(self, item):
        i, frame = item
        return synth_stack(frame, self.cfg, self.noise, noise_rng(self.seed, i))


def cmd_synth(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if args.noise_sigma < 0:
        raise UsageError("--noise-sigma must be >= 0")
    cfg = _load_config(args)
    frames = synth_frames(args.n, args.seed, (args.width, args.height))
    stacks = _ordered_map(_Synth(cfg, args.noise_sigma, args.seed), list(enumerate(frames)), args.jobs)
    stack_dir = args.out_dir / "stacks"
    stack_dir.mkdir(parents=True, exist_ok=True)
    formats.write_annotations(args.out_dir / "annotations.json", frames)
    for f, st in zip(frames, stacks):
        formats.write_hmap(stack_dir / f"{f.frame_id}.hmap", st)
    log.info("wrote %d synthetic frames to %s", len(frames), args.out_dir)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="armloc", description="Driver/passenger arm localization from heatmaps.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("labelgen", help="render ground-truth HMAP stacks from annotations")
    s.add_argument("--annotations", type=Path, required=True)
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--jobs", type=int, default=1)
    _add_config_flags(s)
    s.set_defaults(func=cmd_labelgen)

    s = sub.add_parser("augment", help="mirror / lighting / geometric augmentation of one image")
    s.add_argument("--image", type=Path, required=True)
    s.add_argument("--annotations", type=Path)
    s.add_argument("--frame-id")
    s.add_argument("--mode", choices=("mirror", "lighting", "geometric"), required=True)
    s.add_argument("--condition", choices=sorted(LIGHTING_CONDITIONS))
    s.add_argument("--side", choices=("driver", "passenger"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--blur-sigma", type=float, default=10.0)
    s.add_argument("--max-rotation", type=float, default=20.0)
    s.add_argument("--crop-w", type=int, default=736)
    s.add_argument("--crop-h", type=int, default=368)
    s.add_argument("--scale-min", type=float, default=0.7)
    s.add_argument("--scale-max", type=float, default=1.2)
    s.add_argument("--random-offset", action="store_true")
    s.add_argument("--out-image", type=Path, required=True)
    s.add_argument("--out-annotations", type=Path)
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("decode", help="decode HMAP stacks into detections JSONL")
    s.add_argument("inputs", type=Path, nargs="+", help=".hmap files or directories")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--jobs", type=int, default=1)
    _add_config_flags(s)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("eval", help="PCK and angle curves from detections + annotations")
    s.add_argument("--detections", type=Path, required=True)
    s.add_argument("--annotations", type=Path, required=True)
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--norm-length", type=float, help="default: average annotated arm length")
    s.add_argument("--min-arm-length", type=float, default=0.0,
                   help="exclude shorter arms (input px) from the angle curves")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("occupancy", help="hand-location occupancy map from detections")
    s.add_argument("--detections", type=Path, required=True)
    s.add_argument("--annotations", type=Path, help="source of per-frame drive_mode tags")
    s.add_argument("--out", type=Path, required=True, help="output prefix (.png and .hmap)")
    s.add_argument("--drive-mode", choices=("manual", "autonomous"))
    s.add_argument("--splat-sigma", type=float, default=8.0)
    s.add_argument("--lambda-h", type=float)
    s.set_defaults(func=cmd_occupancy)

    s = sub.add_parser("synth", help="seeded synthetic annotations + rendered stacks")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--noise-sigma", type=float, default=0.0)
    s.add_argument("--width", type=int, default=736)
    s.add_argument("--height", type=int, default=368)
    s.add_argument("--jobs", type=int, default=1)
    _add_config_flags(s)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"armloc: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("armloc: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"armloc: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except formats.FormatError as e:
        print(f"armloc: format error ({e.code}): {e}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as e:
        print(f"armloc: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"armloc: error: {e}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
