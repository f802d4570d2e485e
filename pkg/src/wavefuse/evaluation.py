"""Detection matching, NMS, R40 average precision and corruption metrics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .geometry import Box3D, iou3d, rotated_bev_iou

R40_ANCHORS = np.arange(1, 41) / 40.0


@dataclass(frozen=True)
class Detection:
    box: Box3D
    score: float
    cls: str = "Car"

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise InputError(f"detection score must be finite, got {self.score}")


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) after each detection of a score-descending sweep."""

    recall: np.ndarray
    precision: np.ndarray
    n_gt: int

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.recall.tolist(), self.precision.tolist()))


def _iou_fn(kind: str):
    if kind == "bev":
        return rotated_bev_iou
    if kind == "3d":
        return iou3d
    raise InputError(f"iou kind must be 'bev' or '3d', got {kind!r}")


def _score_order(scores: Sequence[float]) -> list[int]:
    # descending score, ties by original index
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def nms(dets: Sequence[Detection], iou_thresh: float) -> list[int]:
    """Greedy suppression by BEV IoU; a box is dropped when IoU > threshold."""
    if not 0.0 <= iou_thresh <= 1.0:
        raise InputError(f"iou threshold must be in [0, 1], got {iou_thresh}")
    order = _score_order([d.score for d in dets])
    kept: list[int] = []
    for i in order:
        if all(rotated_bev_iou(dets[i].box, dets[j].box) <= iou_thresh for j in kept):
            kept.append(i)
    return kept


def match_detections(dets: Sequence[Detection], gts: Sequence[Box3D], iou_thresh: float = 0.7,
                     iou_kind: str = "3d", gt_ignore: Sequence[bool] | None = None) -> PRCurve:
    """One-to-one greedy matching in score order.

    Each detection takes the highest-IoU still-unmatched ground truth with
    IoU >= ``iou_thresh``.  Detections that land on an ignored ground truth
    (e.g. DontCare or outside the difficulty bucket) are dropped from the
    sweep rather than counted as false positives.
    """
    ignore = np.zeros(len(gts), dtype=bool) if gt_ignore is None else np.asarray(gt_ignore, dtype=bool)
    flags = _match_flags(dets, gts, iou_thresh, iou_kind, ignore)
    return _curve([tp for _, tp in flags], int((~ignore).sum()))


def _match_flags(dets, gts, iou_thresh, iou_kind, gt_ignore) -> list[tuple[int, bool]]:
    """(detection index, is_tp) in score order, ignored matches removed."""
    iou = _iou_fn(iou_kind)
    ignore = np.zeros(len(gts), dtype=bool) if gt_ignore is None else np.asarray(gt_ignore, dtype=bool)
    matched = np.zeros(len(gts), dtype=bool)
    flags = []
    for i in _score_order([d.score for d in dets]):
        best, best_j = -1.0, -1
        for j, g in enumerate(gts):
            if matched[j]:
                continue
            v = iou(dets[i].box, g)
            if v >= iou_thresh and v > best:
                best, best_j = v, j
        if best_j >= 0:
            matched[best_j] = True
            if not ignore[best_j]:
                flags.append((i, True))
        else:
            flags.append((i, False))
    return flags


def _curve(tp_flags: Sequence[bool], n_gt: int) -> PRCurve:
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64))
    k = np.arange(1, len(tp) + 1, dtype=np.float64)
    recall = tp / n_gt if n_gt else np.zeros_like(tp)
    return PRCurve(recall, tp / k, n_gt)


def match_frames(frames, iou_thresh: float = 0.7, iou_kind: str = "3d") -> PRCurve:
    """Pool per-frame matches into one dataset-level curve.

    ``frames`` is an iterable of ``(detections, gt_boxes)`` or
    ``(detections, gt_boxes, gt_ignore)``.  Matching is one-to-one within a
    frame; the sweep is then re-sorted by score across frames (ties by frame
    order, then detection order).
    """
    scored: list[tuple[float, int, int, bool]] = []
    n_gt = 0
    for f, frame in enumerate(frames):
        dets, gts, *rest = frame
        ignore = rest[0] if rest else None
        flags = _match_flags(dets, gts, iou_thresh, iou_kind, ignore)
        n_gt += len(gts) if ignore is None else int(len(gts) - np.sum(ignore))
        scored += [(-dets[i].score, f, r, tp) for r, (i, tp) in enumerate(flags)]
    scored.sort(key=lambda t: t[:3])
    return _curve([t[3] for t in scored], n_gt)


def ap_r40(curve: PRCurve) -> float:
    """Average precision over recall anchors 1/40 .. 40/40, in percent."""
    if curve.n_gt <= 0:
        raise InputError("AP is undefined without ground truth")
    if len(curve.recall) == 0:
        return 0.0
    # precision interpolated from the right: max over all points at or beyond
    interp = np.maximum.accumulate(curve.precision[::-1])[::-1]
    # recall is non-decreasing along the sweep, so searchsorted finds the first reachable point
    idx = np.searchsorted(curve.recall, R40_ANCHORS, side="left")
    vals = np.where(idx < len(interp), interp[np.minimum(idx, len(interp) - 1)], 0.0)
    return float(100.0 * vals.sum() / 40.0)


def mean_ap(values: Iterable[float]) -> float:
    vals = list(values)
    if not vals:
        raise InputError("mAP of an empty set")
    return float(np.mean(vals))


def rce(ap_clean: float, ap_cor_values: Iterable[float], unit: str = "percent") -> float:
    """Relative corruption error: relative drop from clean to mean corrupted AP."""
    vals = list(ap_cor_values)
    if ap_clean <= 0:
        raise InputError(f"clean AP must be positive, got {ap_clean}")
    if not vals:
        raise InputError("no corrupted APs given")
    frac = (ap_clean - float(np.mean(vals))) / ap_clean
    if unit == "percent":
        return 100.0 * frac
    if unit == "fraction":
        return frac
    raise InputError(f"unit must be 'percent' or 'fraction', got {unit!r}")


def dataset_pixel_stats(images) -> tuple[list[float], float, float]:
    """Per-image mean pixel value and a Gaussian fit to those means.

    Returns (per-image means, sample mean, population std).
    """
    means = [float(np.mean(np.asarray(img, dtype=np.float64))) for img in images]
    if not means:
        raise InputError("pixel statistics need at least one image")
    arr = np.array(means)
    return means, float(arr.mean()), float(arr.std())


# -- reports ----------------------------------------------------------------

@dataclass
class BenchmarkReport:
    ap_clean: float
    cells: dict[tuple[str, int], float] = field(default_factory=dict)
    rce_unit: str = "percent"

    @property
    def kinds(self) -> list[str]:
        return list(dict.fromkeys(k for k, _ in self.cells))

    @property
    def per_kind(self) -> dict[str, float]:
        return {k: float(np.mean([v for (kk, _), v in self.cells.items() if kk == k])) for k in self.kinds}

    @property
    def ap_cor(self) -> float:
        return float(np.mean(list(self.per_kind.values())))

    @property
    def rce(self) -> float:
        return rce(self.ap_clean, self.per_kind.values(), self.rce_unit)

    def to_dict(self) -> dict:
        return {
            "ap_clean": self.ap_clean,
            "cells": [{"kind": k, "severity": s, "ap": v} for (k, s), v in self.cells.items()],
            "per_kind_ap_cor": self.per_kind,
            "ap_cor": self.ap_cor,
            "rce": self.rce,
            "rce_unit": self.rce_unit,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "severity", "ap", "ap_clean"])
        for (k, s), v in self.cells.items():
            w.writerow([k, s, repr(v), repr(self.ap_clean)])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        cells = {(c["kind"], int(c["severity"])): float(c["ap"]) for c in d["cells"]}
        return cls(float(d["ap_clean"]), cells, d.get("rce_unit", "percent"))
