"""Per-cell LiDAR/camera fusion with two-token self-attention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .geometry import project_to_pixels
from .kitti import CalibrationSet
from .numeric import LinearMap, attention, init_linear, philox, relu

FEATURE_STRIDE = 4


@dataclass(frozen=True)
class FusionCellBatch:
    lidar_feats: np.ndarray  # M x C_l
    cam_feats: np.ndarray  # M x C_c
    cell_centers: np.ndarray  # M x 3

    def __post_init__(self):
        m = {np.shape(self.lidar_feats)[0], np.shape(self.cam_feats)[0], np.shape(self.cell_centers)[0]}
        if len(m) != 1:
            raise ShapeError(f"fusion batch fields disagree on M: {sorted(m)}")

    def __len__(self) -> int:
        return np.shape(self.lidar_feats)[0]


@dataclass(frozen=True)
class FusionParams:
    lidar_proj: LinearMap  # C_l -> d
    cam_proj: LinearMap  # C_c -> d
    wq: LinearMap  # d -> d
    wk: LinearMap
    wv: LinearMap
    mlp: tuple[LinearMap, LinearMap]  # 2d -> hidden -> C_f

    def __post_init__(self):
        d = self.lidar_proj.out_dim
        if self.cam_proj.out_dim != d or self.wq.in_dim != d or self.wk.in_dim != d or self.wv.in_dim != d:
            raise ShapeError("token projection widths disagree")
        if self.wv.out_dim != d:
            raise ShapeError("value width must equal token width for the residual")
        if self.mlp[0].in_dim != 2 * d:
            raise ShapeError(f"fusion MLP input must be 2d = {2 * d}")


def make_fusion_params(seed: int, c_l: int, c_c: int, d: int = 16, hidden: int = 32,
                       c_f: int = 16) -> FusionParams:
    rng = philox(seed, 0x465553)
    return FusionParams(
        lidar_proj=init_linear(rng, c_l, d),
        cam_proj=init_linear(rng, c_c, d),
        wq=init_linear(rng, d, d),
        wk=init_linear(rng, d, d),
        wv=init_linear(rng, d, d),
        mlp=(init_linear(rng, 2 * d, hidden), init_linear(rng, hidden, c_f)),
    )


def bilinear_sample(fmap: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample ``fmap`` at fractional grid coordinates; out-of-range -> 0."""
    h, w, c = fmap.shape
    out = np.zeros((rows.shape[0], c))
    ok = (rows >= 0) & (rows <= h - 1) & (cols >= 0) & (cols <= w - 1)
    if not np.any(ok):
        return out
    r, q = rows[ok], cols[ok]
    r0 = np.minimum(np.floor(r).astype(np.int64), max(h - 2, 0))
    c0 = np.minimum(np.floor(q).astype(np.int64), max(w - 2, 0))
    r1, c1 = np.minimum(r0 + 1, h - 1), np.minimum(c0 + 1, w - 1)
    fr, fc = (r - r0)[:, None], (q - c0)[:, None]
    out[ok] = (
        fmap[r0, c0] * (1 - fr) * (1 - fc)
        + fmap[r0, c1] * (1 - fr) * fc
        + fmap[r1, c0] * fr * (1 - fc)
        + fmap[r1, c1] * fr * fc
    )
    return out


def gather_image_features(f_out, centers, calib: CalibrationSet, stride: int = FEATURE_STRIDE) -> np.ndarray:
    """Bilinearly sample a stride-``stride`` map at projected 3-D points.

    Grid node ``(i, j)`` sits at image pixel ``(stride*j, stride*i)``.
    Points behind the camera or outside the grid get a zero vector.
    """
    f_out = np.asarray(f_out, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    if len(centers) == 0:
        return np.zeros((0, f_out.shape[-1]))
    rect = calib.velo_to_rect(centers)
    uv, wh = calib.rect_to_image(rect)
    front = (rect[:, 2] > 0) & (wh > 0)
    rows = np.where(front, uv[:, 1] / stride, -1.0)
    cols = np.where(front, uv[:, 0] / stride, -1.0)
    return bilinear_sample(f_out, rows, cols)


def adaptive_fuse(batch: FusionCellBatch, params: FusionParams, return_weights: bool = False):
    lidar = np.asarray(batch.lidar_feats, dtype=np.float64)
    cam = np.asarray(batch.cam_feats, dtype=np.float64)
    if lidar.shape[-1] != params.lidar_proj.in_dim or cam.shape[-1] != params.cam_proj.in_dim:
        raise ShapeError(
            f"feature widths ({lidar.shape[-1]}, {cam.shape[-1]}) do not match projections "
            f"({params.lidar_proj.in_dim}, {params.cam_proj.in_dim})"
        )
    tokens = np.stack([params.lidar_proj(lidar), params.cam_proj(cam)], axis=1)  # M x 2 x d
    att, weights = attention(params.wq(tokens), params.wk(tokens), params.wv(tokens), return_weights=True)
    updated = tokens + att
    fc1, fc2 = params.mlp
    out = fc2(relu(fc1(updated.reshape(len(batch), -1))))
    return (out, weights) if return_weights else out
