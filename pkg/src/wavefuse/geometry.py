"""Point projection into the camera and oriented-box overlap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kitti import CalibrationSet, LabelRecord, RawPointCloud

CAR_ANCHOR = (3.9, 1.6, 1.56)  # l, w, h in metres


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = float(np.mod(a + np.pi, 2.0 * np.pi) - np.pi)
    return np.pi if a == -np.pi else a


@dataclass(frozen=True)
class Box3D:
    """Oriented box in the LiDAR frame; ``center`` is the geometric centre."""

    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    yaw: float = 0.0

    def __post_init__(self):
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise InputError(f"box sizes must be positive, got {(self.l, self.w, self.h)}")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    def bev_corners(self) -> np.ndarray:
        """Counter-clockwise footprint corners, shape ``4 x 2``."""
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        hl, hw = self.l / 2.0, self.w / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.x, self.y])

    def corners(self) -> np.ndarray:
        """All eight corners, shape ``8 x 3`` (bottom face first)."""
        bev = self.bev_corners()
        z0, z1 = self.z - self.h / 2.0, self.z + self.h / 2.0
        return np.vstack([np.c_[bev, np.full(4, z0)], np.c_[bev, np.full(4, z1)]])

    def contains(self, xyz: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the box (closed)."""
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        d = xyz - self.center
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        u = c * d[:, 0] + s * d[:, 1]
        v = -s * d[:, 0] + c * d[:, 1]
        return (np.abs(u) <= self.l / 2) & (np.abs(v) <= self.w / 2) & (np.abs(d[:, 2]) <= self.h / 2)

    def translated(self, dx: float, dy: float, dz: float = 0.0) -> "Box3D":
        return Box3D(self.x + dx, self.y + dy, self.z + dz, self.l, self.w, self.h, self.yaw)


# -- projection -------------------------------------------------------------

@dataclass(frozen=True)
class SparseDepthMap:
    """``H x W x 2`` array: channel 0 depth in metres, channel 1 validity."""

    data: np.ndarray

    @property
    def depth(self) -> np.ndarray:
        return self.data[..., 0]

    @property
    def valid(self) -> np.ndarray:
        return self.data[..., 1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]


def round_half_down(x: np.ndarray) -> np.ndarray:
    """Nearest integer; exact .5 ties go to the smaller index."""
    return np.ceil(np.asarray(x) - 0.5).astype(np.int64)


def project_to_pixels(xyz: np.ndarray, calib: CalibrationSet):
    """Return (row, col, depth, in_front) for LiDAR points.

    ``depth`` is the rectified camera z.  Pixels are rounded with
    :func:`round_half_down`.
    """
    rect = calib.velo_to_rect(xyz)
    uv, w = calib.rect_to_image(rect)
    depth = rect[:, 2]
    front = (depth > 0) & (w > 0)
    uv = np.where(front[:, None], uv, 0.0)
    return round_half_down(uv[:, 1]), round_half_down(uv[:, 0]), depth, front


def project_points(cloud: RawPointCloud, calib: CalibrationSet, height: int, width: int) -> SparseDepthMap:
    if height <= 0 or width <= 0:
        raise InputError(f"depth map size must be positive, got {height}x{width}")
    if not calib.is_finite():
        raise InputError("calibration contains non-finite entries")
    out = np.zeros((height, width, 2))
    if len(cloud) == 0:
        return SparseDepthMap(out)
    row, col, depth, front = project_to_pixels(cloud.xyz, calib)
    ok = front & (row >= 0) & (row < height) & (col >= 0) & (col < width)
    buf = np.full((height, width), np.inf)
    np.minimum.at(buf, (row[ok], col[ok]), depth[ok])
    hit = np.isfinite(buf)
    out[..., 0] = np.where(hit, buf, 0.0)
    out[..., 1] = hit
    return SparseDepthMap(out)


# -- overlap ----------------------------------------------------------------

def _clip(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of a polygon by a CCW convex polygon."""
    out = list(subject)
    n = len(clipper)
    for i in range(n):
        if not out:
            break
        a, b = clipper[i], clipper[(i + 1) % n]
        edge = b - a
        inp, out = out, []

        def side(p):
            return edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])

        prev = inp[-1]
        sp = side(prev)
        for cur in inp:
            sc = side(cur)
            if sc >= 0:
                if sp < 0:
                    out.append(prev + (cur - prev) * (sp / (sp - sc)))
                out.append(cur)
            elif sp >= 0:
                out.append(prev + (cur - prev) * (sp / (sp - sc)))
            prev, sp = cur, sc
    return np.array(out).reshape(-1, 2)


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def bev_intersection(a: Box3D, b: Box3D) -> float:
    # quick reject on circumscribed circles
    ra = 0.5 * np.hypot(a.l, a.w)
    rb = 0.5 * np.hypot(b.l, b.w)
    if np.hypot(a.x - b.x, a.y - b.y) > ra + rb:
        return 0.0
    # clip the smaller-index box against the other so iou(a,b) == iou(b,a) bitwise
    pa, pb = a.bev_corners(), b.bev_corners()
    if (a.x, a.y, a.l, a.w, a.yaw) > (b.x, b.y, b.l, b.w, b.yaw):
        pa, pb = pb, pa
    return polygon_area(_clip(pa, pb))


def rotated_bev_iou(a: Box3D, b: Box3D) -> float:
    inter = bev_intersection(a, b)
    union = a.l * a.w + b.l * b.w - inter
    if inter <= 0.0 or union <= 0.0:
        return 0.0
    return float(min(1.0, inter / union))


def iou3d(a: Box3D, b: Box3D) -> float:
    dz = min(a.z + a.h / 2, b.z + b.h / 2) - max(a.z - a.h / 2, b.z - b.h / 2)
    if dz <= 0:
        return 0.0
    inter = bev_intersection(a, b) * dz
    union = a.volume + b.volume - inter
    if inter <= 0.0 or union <= 0.0:
        return 0.0
    return float(min(1.0, inter / union))


# -- label conversion -------------------------------------------------------

def label_to_box(rec: LabelRecord) -> Box3D:
    """Camera-frame KITTI label to a z-up box.

    Uses the fixed axis permutation (x_cam, y_cam, z_cam) ->
    (z_cam, -x_cam, -y_cam).  Overlap is invariant to this rigid map, so
    evaluation does not need the calibration.
    """
    h, w, l = rec.dims
    xc, yc, zc = rec.location
    return Box3D(zc, -xc, -yc + h / 2.0, l, w, h, wrap_angle(-rec.rotation_y - np.pi / 2))


def box_to_label(box: Box3D, cls: str = "Car", score: float | None = None) -> LabelRecord:
    ry = wrap_angle(-box.yaw - np.pi / 2)
    loc = (-box.y, -(box.z - box.h / 2.0), box.x)
    alpha = wrap_angle(ry - np.arctan2(loc[0], loc[2]))
    return LabelRecord(cls, 0.0, 0, alpha, (0.0, 0.0, 100.0, 100.0), (box.h, box.w, box.l), loc, ry, score)
