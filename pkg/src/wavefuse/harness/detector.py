"""Untrained end-to-end detector over the fused features.

The readout is seed-fixed, not learned.  LiDAR height evidence dominates the
cell score so boxes are found reliably; the fused camera term perturbs it,
which is what lets image corruptions move the metrics at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..adfpn import EncoderParams, PyramidParams, image_features, make_encoder_params, make_pyramid_params
from ..dgwa import DgwaParams, depth_encode, depth_guide, dgwa_forward, make_dgwa_params
from ..evaluation import Detection, nms
from ..fusion import FusionCellBatch, FusionParams, adaptive_fuse, gather_image_features, make_fusion_params
from ..geometry import Box3D, project_points
from ..numeric import philox
from .config import BenchConfig
from .scene import SyntheticScene

LIDAR_FEATURES = 4  # log1p(count), max height, mean intensity, min height
MIN_OBJECT_HEIGHT = 0.2  # metres above ground
ANCHOR_YAWS = (0.0, np.pi / 2)
CAMERA_WEIGHT = 0.05


@dataclass(frozen=True)
class PipelineParams:
    encoder: EncoderParams
    pyramid: PyramidParams
    dgwa: DgwaParams
    fusion: FusionParams
    readout: np.ndarray  # fused width


def make_pipeline_params(seed: int) -> PipelineParams:
    enc = make_encoder_params(seed)
    pyr = make_pyramid_params(seed, dim=enc.dim)
    dg = make_dgwa_params(seed, c_i=pyr.out_channels)
    fu = make_fusion_params(seed, c_l=LIDAR_FEATURES, c_c=dg.mlp[1].out_dim)
    w = philox(seed, 0x524541).normal(0.0, 1.0, fu.mlp[1].out_dim)
    return PipelineParams(enc, pyr, dg, fu, CAMERA_WEIGHT * w / np.linalg.norm(w))


def camera_features(image, cloud, calib, params: PipelineParams) -> np.ndarray:
    """Image branch: stride-4 pyramid feature, depth guidance, wavelet attention."""
    h, w = image.shape[:2]
    f_i = image_features(image, params.encoder, params.pyramid)
    s = project_points(cloud, calib, h, w)
    guided = depth_guide(f_i, depth_encode(s, params.dgwa), params.dgwa)
    return dgwa_forward(guided, params.dgwa)


@dataclass(frozen=True)
class BevCells:
    ix: np.ndarray
    iy: np.ndarray
    feats: np.ndarray  # M x LIDAR_FEATURES
    centers: np.ndarray  # M x 3
    height: np.ndarray  # max height above ground per cell


def rasterize_bev(xyz: np.ndarray, intensity: np.ndarray, cfg: BenchConfig) -> tuple[BevCells, tuple[int, int]]:
    x0, x1 = cfg.x_range
    y0, y1 = cfg.y_range
    nx = int(round((x1 - x0) / cfg.cell_size))
    ny = int(round((y1 - y0) / cfg.cell_size))
    ix = np.floor((xyz[:, 0] - x0) / cfg.cell_size).astype(np.int64)
    iy = np.floor((xyz[:, 1] - y0) / cfg.cell_size).astype(np.int64)
    ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    ix, iy, pts, inten = ix[ok], iy[ok], xyz[ok], intensity[ok]
    flat, inv = np.unique(ix * ny + iy, return_inverse=True)
    m = len(flat)
    count = np.bincount(inv, minlength=m).astype(np.float64)
    hgt = pts[:, 2] + cfg.sensor_height
    hmax = np.full(m, -np.inf)
    np.maximum.at(hmax, inv, hgt)
    hmin = np.full(m, np.inf)
    np.minimum.at(hmin, inv, hgt)
    mean_int = np.bincount(inv, weights=inten, minlength=m) / np.maximum(count, 1)
    cix, ciy = flat // ny, flat % ny
    centers = np.c_[
        x0 + (cix + 0.5) * cfg.cell_size,
        y0 + (ciy + 0.5) * cfg.cell_size,
        hmax - cfg.sensor_height if m else np.zeros(0),
    ]
    feats = np.c_[np.log1p(count), np.clip(hmax, -1, 3), mean_int, np.clip(hmin, -1, 3)]
    return BevCells(cix, ciy, feats, centers, hmax), (nx, ny)


def _fit_box(peak_xy: np.ndarray, obj_xyz: np.ndarray, cfg: BenchConfig, anchor_yaw: float) -> Box3D:
    l, w, h = cfg.object_dims
    center = peak_xy
    yaw = anchor_yaw
    for _ in range(2):
        near = obj_xyz[np.hypot(*(obj_xyz[:, :2] - center).T) <= l / 2 + 0.6]
        if len(near) < 5:
            break
        xy = near[:, :2]
        evals, evecs = np.linalg.eigh(np.cov(xy.T))
        axis = evecs[:, np.argmax(evals)]
        yaw = float(np.arctan2(axis[1], axis[0]))
        perp = np.array([-axis[1], axis[0]])
        a, b = xy @ axis, xy @ perp
        center = axis * (a.min() + a.max()) / 2 + perp * (b.min() + b.max()) / 2
    bottom = -cfg.sensor_height
    if len(obj_xyz):
        near = obj_xyz[np.hypot(*(obj_xyz[:, :2] - center).T) <= l / 2 + 0.6]
        if len(near):
            bottom = float(near[:, 2].min())
    return Box3D(float(center[0]), float(center[1]), bottom + h / 2, l, w, h, yaw)


def toy_detect(scene: SyntheticScene, params: PipelineParams, cfg: BenchConfig) -> list[Detection]:
    cloud = scene.cloud
    if len(cloud) == 0:
        return []
    cells, (nx, ny) = rasterize_bev(cloud.xyz, cloud.intensity, cfg)
    if len(cells.ix) == 0:
        return []
    f_out = camera_features(scene.image, cloud, scene.calib, params)
    cam = gather_image_features(f_out, cells.centers, scene.calib)
    fused = adaptive_fuse(FusionCellBatch(cells.feats, cam, cells.centers), params.fusion)

    evidence = np.where(cells.height >= MIN_OBJECT_HEIGHT, np.clip(cells.height, 0.0, 2.0), 0.0)
    cell_score = np.maximum(evidence + fused @ params.readout, 0.0)

    pool = cfg.proposal_pool
    grid = np.zeros((-(-nx // pool), -(-ny // pool)))
    np.add.at(grid, (cells.ix // pool, cells.iy // pool), cell_score)
    step = cfg.cell_size * pool
    l, w, _ = cfg.object_dims
    maps = []
    for yaw in ANCHOR_YAWS:
        sx, sy = (l, w) if yaw == 0.0 else (w, l)
        sig = (sx / (4 * step), sy / (4 * step))
        maps.append(ndimage.gaussian_filter(grid, sig, mode="constant") * (2 * np.pi * sig[0] * sig[1]))
    stack = np.stack(maps)
    agg = stack.max(axis=0)
    which = stack.argmax(axis=0)

    thr = -cfg.score_scale * np.log1p(-cfg.score_threshold)
    size = max(3, int(round(w / step)) | 1)
    peaks = (agg == ndimage.maximum_filter(agg, size=size, mode="constant")) & (agg >= thr)
    labels, n_peaks = ndimage.label(peaks)
    if n_peaks == 0:
        return []
    # one representative (first in raster order) per plateau
    flat = np.flatnonzero(peaks)
    _, first = np.unique(labels.flat[flat], return_index=True)
    obj = cloud.xyz[cloud.xyz[:, 2] + cfg.sensor_height >= MIN_OBJECT_HEIGHT]
    dets = []
    for i, j in zip(*np.unravel_index(flat[first], agg.shape)):
        a = agg[i, j]
        peak_xy = np.array([cfg.x_range[0] + (i + 0.5) * step, cfg.y_range[0] + (j + 0.5) * step])
        box = _fit_box(peak_xy, obj, cfg, ANCHOR_YAWS[which[i, j]])
        dets.append(Detection(box, float(1.0 - np.exp(-a / cfg.score_scale))))
    kept = nms(dets, cfg.nms_iou)[: cfg.max_detections]
    return [dets[k] for k in kept]
