"""``bench`` command line: run, corrupt, eval, stats."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..corruptions import IMAGE_KINDS, KINDS, CorruptionSpec, corrupt_image, corrupt_lidar
from ..errors import FormatError, GenerationError, InputError, KindError, ShapeError
from ..evaluation import Detection, ap_r40, dataset_pixel_stats, match_frames
from ..geometry import label_to_box
from ..kitti import DIFFICULTY_LEVELS, parse_labels, read_velodyne_bin, write_velodyne_bin
from .bench import run_benchmark, write_report
from .config import BenchConfig, parse_config
from .io import read_bytes, read_ppm, write_ppm

log = logging.getLogger("wavefuse.bench")


def _label_files(path: Path) -> dict[str, Path]:
    if path.is_dir():
        return {p.stem: p for p in sorted(path.glob("*.txt"))}
    return {path.stem: path}


def _read_labels(path: Path, keep_dontcare: bool):
    return parse_labels(read_bytes(path).decode("utf-8"), keep_dontcare=keep_dontcare)


def cmd_run(args) -> int:
    overrides = {"threads": args.threads, "out_dir": args.out}
    if args.config:
        cfg = parse_config(read_bytes(args.config).decode("utf-8"), **overrides)
    else:
        cfg = BenchConfig(**{k: v for k, v in overrides.items() if v is not None})
    report = run_benchmark(cfg)
    formats = (args.format,) if args.format else ("csv", "json")
    for p in write_report(report, cfg.out_dir, formats):
        print(p)
    print(f"AP_clean={report.ap_clean:.4f} AP_cor={report.ap_cor:.4f} RCE={report.rce:.4f}")
    return 0


def cmd_corrupt(args) -> int:
    spec = CorruptionSpec.parse(args.spec) if args.spec else CorruptionSpec(args.kind, args.severity, args.seed)
    src, dst = Path(args.inp), Path(args.out)
    data = read_bytes(src)
    if src.suffix == ".bin":
        out = write_velodyne_bin(corrupt_lidar(read_velodyne_bin(data), spec))
    elif src.suffix == ".ppm":
        if spec.kind != "none" and spec.kind not in IMAGE_KINDS:
            raise KindError(f"{spec.kind} is a LiDAR corruption; input {src} is an image")
        out = write_ppm(corrupt_image(read_ppm(data), spec))
    else:
        raise InputError(f"{src}: expected a .bin point cloud or .ppm image")
    try:
        dst.write_bytes(out)
    except OSError as exc:
        raise OSError(f"{dst}: {exc.strerror or exc}") from exc
    print(f"{spec} -> {dst}")
    return 0


def cmd_eval(args) -> int:
    det_files = _label_files(Path(args.dets))
    gt_files = _label_files(Path(args.gts))
    if len(gt_files) == 1 and len(det_files) == 1:
        pairs = [(next(iter(det_files.values())), next(iter(gt_files.values())))]
    else:
        pairs = [(det_files.get(k), p) for k, p in gt_files.items()]
    frames = []
    for det_path, gt_path in pairs:
        recs = _read_labels(gt_path, keep_dontcare=True)
        gts, ignore = [], []
        for r in recs:
            if r.dont_care:
                continue  # matched DontCare regions are simply not scored
            gts.append(label_to_box(r))
            ignore.append(r.cls != args.cls or (args.difficulty is not None and not r.difficulty_ok(args.difficulty)))
        dets = []
        if det_path is not None:
            for r in _read_labels(det_path, keep_dontcare=False):
                if r.cls != args.cls:
                    continue
                if r.score is None:
                    raise FormatError(f"{det_path}: detection lines need a score column")
                dets.append(Detection(label_to_box(r), r.score, r.cls))
        frames.append((dets, gts, ignore))
    curve = match_frames(frames, args.iou, args.iou_kind)
    result = {"frames": len(frames), "n_gt": curve.n_gt, "n_det": int(len(curve.recall)),
              "iou": args.iou, "iou_kind": args.iou_kind, "ap_r40": ap_r40(curve)}
    print(json.dumps(result, indent=2))
    return 0


def cmd_stats(args) -> int:
    paths = sorted(Path(args.images).glob("*.ppm"))
    if not paths:
        raise InputError(f"{args.images}: no .ppm images found")
    means, mu, sigma = dataset_pixel_stats(read_ppm(read_bytes(p)) for p in paths)
    if args.format == "json":
        print(json.dumps({"images": {p.name: m for p, m in zip(paths, means)}, "mean": mu, "std": sigma}, indent=2))
    else:
        print("image,mean")
        for p, m in zip(paths, means):
            print(f"{p.name},{m!r}")
        print(f"# mean={mu!r} std={sigma!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bench", description="Corruption robustness benchmark harness.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full clean + corruption matrix")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--format", choices=("csv", "json"), help="write only this format")
    p.add_argument("--threads", type=int, help="worker threads (overrides threads)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("corrupt", help="corrupt one .bin cloud or .ppm image")
    p.add_argument("--kind", choices=KINDS, default="none")
    p.add_argument("--severity", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", help="kind:severity:seed, overrides the three flags above")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("eval", help="R40 AP from KITTI label files or directories")
    p.add_argument("--dets", required=True)
    p.add_argument("--gts", required=True)
    p.add_argument("--iou", type=float, default=0.7)
    p.add_argument("--iou-kind", choices=("bev", "3d"), default="3d")
    p.add_argument("--difficulty", choices=tuple(DIFFICULTY_LEVELS))
    p.add_argument("--cls", default="Car")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="per-image mean pixel value over a directory of .ppm files")
    p.add_argument("--images", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, FormatError, KindError, ShapeError, GenerationError, OSError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
