"""Synthetic LiDAR + camera frames with car-sized boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull

from ..errors import GenerationError
from ..geometry import Box3D, bev_intersection
from ..kitti import CalibrationSet, RawPointCloud
from ..numeric import philox
from .config import BenchConfig

MAX_PLACEMENT_ATTEMPTS = 1000


@dataclass(frozen=True)
class SyntheticScene:
    gt_boxes: list[Box3D]
    cloud: RawPointCloud
    image: np.ndarray  # H x W x 3, 0..255
    calib: CalibrationSet
    seed: int


def make_calib(cfg: BenchConfig) -> CalibrationSet:
    """Pinhole camera at the LiDAR origin looking along +x."""
    p2 = np.array([
        [cfg.focal, 0.0, cfg.image_width / 2.0, 0.0],
        [0.0, cfg.focal, cfg.image_height / 2.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    # LiDAR (x fwd, y left, z up) -> camera (x right, y down, z fwd)
    tr = np.array([[0.0, -1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
    return CalibrationSet(p2, np.eye(3), tr)


def _place_boxes(rng, cfg: BenchConfig, n: int) -> list[Box3D]:
    l, w, h = cfg.object_dims
    z = -cfg.sensor_height + h / 2.0
    max_az = np.deg2rad(cfg.max_object_azimuth_deg)
    boxes: list[Box3D] = []
    attempts = 0
    while len(boxes) < n:
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise GenerationError(f"could not place {n} non-overlapping boxes in {MAX_PLACEMENT_ATTEMPTS} attempts")
        x = rng.uniform(*cfg.object_x_range)
        y = x * np.tan(rng.uniform(-max_az, max_az))
        yaw = rng.uniform(-np.pi, np.pi)
        cand = Box3D(x, y, z, l, w, h, yaw)
        corners = cand.bev_corners()
        inside = (
            (corners[:, 0] >= cfg.x_range[0]) & (corners[:, 0] <= cfg.x_range[1])
            & (corners[:, 1] >= cfg.y_range[0]) & (corners[:, 1] <= cfg.y_range[1])
        )
        if not inside.all():
            continue
        if any(bev_intersection(cand, b) > 0.0 for b in boxes):
            continue
        boxes.append(cand)
    return boxes


def _surface_points(rng, box: Box3D, density: float) -> np.ndarray:
    """Uniform samples on the four sides and the roof, in the LiDAR frame."""
    l, w, h = box.l, box.w, box.h
    faces = [  # (origin, edge u, edge v) in box-local coordinates
        ((-l / 2, -w / 2, -h / 2), (l, 0, 0), (0, 0, h)),
        ((-l / 2, w / 2, -h / 2), (l, 0, 0), (0, 0, h)),
        ((-l / 2, -w / 2, -h / 2), (0, w, 0), (0, 0, h)),
        ((l / 2, -w / 2, -h / 2), (0, w, 0), (0, 0, h)),
        ((-l / 2, -w / 2, h / 2), (l, 0, 0), (0, w, 0)),
    ]
    parts = []
    for origin, u, v in faces:
        u, v = np.array(u), np.array(v)
        area = np.linalg.norm(np.cross(u, v))
        k = int(round(area * density))
        st = rng.random((k, 2))
        parts.append(np.array(origin) + st[:, :1] * u + st[:, 1:] * v)
    local = np.vstack(parts)
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    xyz = local @ rot.T + box.center
    return np.c_[xyz, rng.uniform(0.2, 0.8, len(xyz))]


def _fill_convex(img: np.ndarray, pts: np.ndarray, color: np.ndarray) -> None:
    if len(pts) < 3:
        return
    try:
        hull = pts[ConvexHull(pts).vertices]  # counter-clockwise
    except Exception:  # degenerate (collinear) footprint
        return
    h, w = img.shape[:2]
    r0, r1 = max(int(np.floor(hull[:, 1].min())), 0), min(int(np.ceil(hull[:, 1].max())) + 1, h)
    c0, c1 = max(int(np.floor(hull[:, 0].min())), 0), min(int(np.ceil(hull[:, 0].max())) + 1, w)
    if r0 >= r1 or c0 >= c1:
        return
    yy, xx = np.mgrid[r0:r1, c0:c1]
    inside = np.ones(yy.shape, dtype=bool)
    for a, b in zip(hull, np.roll(hull, -1, axis=0)):
        inside &= (b[0] - a[0]) * (yy - a[1]) - (b[1] - a[1]) * (xx - a[0]) >= 0
    img[r0:r1, c0:c1][inside] = color


def render_image(rng, boxes: list[Box3D], calib: CalibrationSet, cfg: BenchConfig) -> np.ndarray:
    h, w = cfg.image_height, cfg.image_width
    rows = np.linspace(0.0, 1.0, h)[:, None, None]
    base = 150.0 - 60.0 * rows + np.array([0.0, 5.0, 15.0])
    texture = ndimage.gaussian_filter(rng.normal(0.0, 40.0, (h, w)), 1.5)[..., None]
    img = np.broadcast_to(base, (h, w, 3)) + texture
    img = img.copy()
    # far to near so nearer boxes overwrite
    for i in sorted(range(len(boxes)), key=lambda k: -np.hypot(boxes[k].x, boxes[k].y)):
        corners = boxes[i].corners()
        rect = calib.velo_to_rect(corners)
        if np.any(rect[:, 2] <= 0.1):
            continue
        uv, _ = calib.rect_to_image(rect)
        shade = 40.0 + 180.0 * ((i * 0.618034) % 1.0)
        _fill_convex(img, uv, np.array([shade, shade * 0.8, 255.0 - shade]))
    return np.clip(img, 0.0, 255.0)


def synth_scene(seed: int, cfg: BenchConfig) -> SyntheticScene:
    rng = philox(seed, 0x5343454E)
    n = int(rng.integers(cfg.n_objects_min, cfg.n_objects_max + 1))
    boxes = _place_boxes(rng, cfg, n)
    ground = np.c_[
        rng.uniform(*cfg.x_range, cfg.ground_points),
        rng.uniform(*cfg.y_range, cfg.ground_points),
        -cfg.sensor_height + rng.normal(0.0, 0.02, cfg.ground_points),
        rng.uniform(0.05, 0.3, cfg.ground_points),
    ]
    parts = [ground] + [_surface_points(rng, b, cfg.face_density) for b in boxes]
    cloud = RawPointCloud(np.vstack(parts))
    calib = make_calib(cfg)
    image = render_image(rng, boxes, calib, cfg)
    return SyntheticScene(boxes, cloud, image, calib, seed)
