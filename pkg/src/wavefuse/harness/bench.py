"""Clean-vs-corrupted benchmark over synthetic scenes."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..corruptions import IMAGE_KINDS, CorruptionSpec, corrupt_image, corrupt_lidar
from ..evaluation import BenchmarkReport, ap_r40, match_frames
from .config import BenchConfig
from .detector import PipelineParams, make_pipeline_params, toy_detect
from .scene import SyntheticScene, synth_scene

log = logging.getLogger(__name__)


def corrupt_scene(scene: SyntheticScene, spec: CorruptionSpec) -> SyntheticScene:
    if spec.kind == "none":
        return scene
    if spec.kind in IMAGE_KINDS:
        return dataclasses.replace(scene, image=corrupt_image(scene.image, spec))
    return dataclasses.replace(scene, cloud=corrupt_lidar(scene.cloud, spec, scene.gt_boxes))


def evaluate_scenes(scenes, params: PipelineParams, cfg: BenchConfig, kind: str = "none",
                    severity: int = 1) -> float:
    frames = []
    for i, scene in enumerate(scenes):
        spec = CorruptionSpec(kind, severity, cfg.corruption_seed + i)
        dets = toy_detect(corrupt_scene(scene, spec), params, cfg)
        frames.append((dets, scene.gt_boxes))
    curve = match_frames(frames, cfg.match_iou, cfg.iou_kind)
    if curve.n_gt == 0:
        return 0.0
    return ap_r40(curve)


def run_benchmark(cfg: BenchConfig) -> BenchmarkReport:
    scenes = [synth_scene(cfg.scene_seed + i, cfg) for i in range(cfg.n_scenes)]
    params = make_pipeline_params(cfg.model_seed)
    cells = [(k, s) for k in cfg.kinds for s in cfg.severities]
    jobs = [("none", 1)] + cells

    def run(job):
        ap = evaluate_scenes(scenes, params, cfg, *job)
        log.info("%s:%d -> AP %.2f", job[0], job[1], ap)
        return ap

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    return BenchmarkReport(results[0], dict(zip(cells, results[1:])), cfg.rce_unit)


def write_report(report: BenchmarkReport, out_dir, formats=("csv", "json")) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if "csv" in formats:
            (out / "report.csv").write_text(report.to_csv())
            written.append(out / "report.csv")
        if "json" in formats:
            (out / "report.json").write_text(report.to_json())
            written.append(out / "report.json")
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return written
