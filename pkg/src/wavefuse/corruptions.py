"""Seeded image and LiDAR corruptions at five severities.

Every generator draws from ``numpy.random.Philox`` keyed by
``SeedSequence([seed, kind_code, severity])``, so output depends only on the
input signal and the ``kind:severity:seed`` triple.

The parameter tables below are a fixed house choice: each scalar is
monotone in severity, spanning mild to severe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError, KindError
from .geometry import Box3D
from .kitti import RawPointCloud
from .numeric import philox

IMAGE_KINDS = ("snow", "rain", "fog", "sunlight", "gauss_img", "uniform_img", "impulse_img", "motion_blur")
LIDAR_KINDS = (
    "gauss_lidar", "uniform_lidar", "impulse_lidar", "density", "cutout", "crosstalk", "fov_lost",
    "local_density", "local_cutout", "local_gauss", "local_uniform", "local_impulse",
    "moving_object", "compensation",
)
KINDS = ("none",) + IMAGE_KINDS + LIDAR_KINDS
BOX_KINDS = ("local_density", "local_cutout", "local_gauss", "local_uniform", "local_impulse", "moving_object")

SEVERITY_TABLE: dict[str, dict[str, tuple]] = {
    "snow": {"flake_density": (0.004, 0.008, 0.014, 0.022, 0.032), "flake_length": (1, 2, 2, 3, 4),
             "veil": (0.04, 0.08, 0.12, 0.16, 0.20)},
    "rain": {"streak_density": (0.002, 0.004, 0.006, 0.008, 0.010), "streak_length": (4, 6, 8, 10, 12),
             "darken": (0.04, 0.08, 0.12, 0.16, 0.20)},
    "fog": {"transmittance": (0.85, 0.72, 0.60, 0.48, 0.36), "beta": (0.01, 0.02, 0.03, 0.045, 0.06)},
    "sunlight": {"gain": (1.05, 1.10, 1.15, 1.22, 1.30), "offset": (8.0, 16.0, 24.0, 32.0, 40.0),
                 "glare_amplitude": (60.0, 100.0, 140.0, 180.0, 220.0),
                 "glare_sigma": (0.10, 0.14, 0.18, 0.22, 0.26)},
    "gauss_img": {"sigma": (0.04, 0.06, 0.08, 0.10, 0.12)},  # fraction of 255
    "uniform_img": {"half_width": (0.06, 0.09, 0.12, 0.15, 0.18)},  # fraction of 255
    "impulse_img": {"rate": (0.01, 0.02, 0.03, 0.05, 0.07)},
    "motion_blur": {"kernel_length": (3, 5, 7, 9, 11)},
    "gauss_lidar": {"sigma": (0.02, 0.04, 0.06, 0.08, 0.10)},  # metres
    "uniform_lidar": {"half_width": (0.04, 0.08, 0.12, 0.16, 0.20)},
    "impulse_lidar": {"rate": (0.02, 0.04, 0.06, 0.08, 0.10), "magnitude": (0.1, 0.15, 0.2, 0.25, 0.3)},
    "density": {"drop_fraction": (0.1, 0.2, 0.3, 0.4, 0.5)},
    "cutout": {"n_spheres": (2, 4, 6, 8, 10), "radius": (1.0, 1.0, 1.0, 1.0, 1.0)},
    "crosstalk": {"fraction": (0.01, 0.02, 0.03, 0.04, 0.05), "jitter": (3.0, 3.0, 3.0, 3.0, 3.0)},
    "fov_lost": {"keep_degrees": (150.0, 120.0, 90.0, 75.0, 60.0)},
    "local_density": {"drop_fraction": (0.2, 0.3, 0.4, 0.5, 0.6)},
    "local_cutout": {"radius": (0.4, 0.6, 0.8, 1.0, 1.2)},
    "local_gauss": {"sigma": (0.04, 0.08, 0.12, 0.16, 0.20)},
    "local_uniform": {"half_width": (0.06, 0.12, 0.18, 0.24, 0.30)},
    "local_impulse": {"rate": (0.1, 0.2, 0.3, 0.4, 0.5), "magnitude": (0.1, 0.15, 0.2, 0.25, 0.3)},
    "moving_object": {"displacement": (0.2, 0.4, 0.6, 0.8, 1.0)},  # metres along heading
    "compensation": {"max_rotation_deg": (0.5, 1.0, 1.5, 2.0, 2.5), "n_sectors": (16, 16, 16, 16, 16)},
}


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str = "none"
    severity: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown corruption kind {self.kind!r}")
        if not 1 <= int(self.severity) <= 5:
            raise InputError(f"severity must be in 1..5, got {self.severity}")
        if not 0 <= int(self.seed) < 2**64:
            raise InputError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @classmethod
    def parse(cls, text: str) -> "CorruptionSpec":
        parts = text.strip().split(":")
        if len(parts) != 3:
            raise InputError(f"corruption spec must be 'kind:severity:seed', got {text!r}")
        try:
            return cls(parts[0], int(parts[1]), int(parts[2]))
        except ValueError:
            raise InputError(f"bad corruption spec {text!r}") from None

    def __str__(self) -> str:
        return f"{self.kind}:{self.severity}:{self.seed}"

    def rng(self) -> np.random.Generator:
        return philox(self.seed, KINDS.index(self.kind), self.severity)


def severity_params(kind: str, severity: int) -> dict:
    if kind not in KINDS:
        raise InputError(f"unknown corruption kind {kind!r}")
    if not 1 <= severity <= 5:
        raise InputError(f"severity must be in 1..5, got {severity}")
    if kind == "none":
        return {}
    return {name: values[severity - 1] for name, values in SEVERITY_TABLE[kind].items()}


# -- image ------------------------------------------------------------------

def _streaks(shape, rng, density, length, angle):
    """Binary mask of short line segments at random positions."""
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    n = int(round(density * h * w))
    if n == 0:
        return mask
    r0 = rng.integers(0, h, n)
    c0 = rng.integers(0, w, n)
    steps = np.arange(int(length))
    rr = np.clip(np.round(r0[:, None] + steps * np.cos(angle)).astype(int), 0, h - 1)
    cc = np.clip(np.round(c0[:, None] + steps * np.sin(angle)).astype(int), 0, w - 1)
    mask[rr.ravel(), cc.ravel()] = True
    return mask


def _motion_kernel(length: int, angle: float) -> np.ndarray:
    k = np.zeros((length, length))
    mid = length // 2
    t = np.linspace(-mid, mid, 4 * length)
    r = np.round(mid + t * np.sin(angle)).astype(int)
    c = np.round(mid + t * np.cos(angle)).astype(int)
    k[r, c] = 1.0
    return k / k.sum()


def corrupt_image(img, spec: CorruptionSpec, depth: np.ndarray | None = None) -> np.ndarray:
    """Apply an image corruption to an ``H x W x 3`` array in [0, 255].

    ``depth`` (``H x W`` metres, 0 where unknown) makes fog depth-weighted.
    """
    img = np.asarray(img, dtype=np.float64)
    if spec.kind == "none":
        return img.copy()
    if spec.kind not in IMAGE_KINDS:
        raise KindError(f"{spec.kind!r} is not an image corruption")
    p = severity_params(spec.kind, spec.severity)
    rng = spec.rng()
    h, w = img.shape[:2]
    kind = spec.kind

    if kind == "gauss_img":
        out = img + rng.normal(0.0, p["sigma"] * 255.0, img.shape)
    elif kind == "uniform_img":
        a = p["half_width"] * 255.0
        out = img + rng.uniform(-a, a, img.shape)
    elif kind == "impulse_img":
        u = rng.random(img.shape)
        out = img.copy()
        out[u < p["rate"] / 2] = 0.0
        out[(u >= p["rate"] / 2) & (u < p["rate"])] = 255.0
    elif kind == "fog":
        if depth is not None:
            d = np.asarray(depth, dtype=np.float64)
            fill = d > 0
            d = np.where(fill, d, d[fill].max() if fill.any() else 0.0)
            t = np.exp(-p["beta"] * d)[..., None]
        else:
            t = p["transmittance"]
        out = img * t + 255.0 * (1.0 - t)
    elif kind == "sunlight":
        cy, cx = rng.uniform(0, h * 0.5), rng.uniform(0, w)
        sig = p["glare_sigma"] * max(h, w)
        yy, xx = np.mgrid[0:h, 0:w]
        glare = p["glare_amplitude"] * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig**2))
        out = img * p["gain"] + p["offset"] + glare[..., None]
    elif kind == "snow":
        angle = rng.uniform(-0.3, 0.3)
        flakes = _streaks((h, w), rng, p["flake_density"], p["flake_length"], angle)
        out = img * (1 - p["veil"]) + 255.0 * p["veil"]
        out[flakes] = 255.0
    elif kind == "rain":
        angle = rng.uniform(-0.25, 0.25)
        streaks = _streaks((h, w), rng, p["streak_density"], p["streak_length"], angle)
        out = img * (1 - p["darken"])
        out[streaks] = np.maximum(out[streaks], 200.0)
    elif kind == "motion_blur":
        k = _motion_kernel(int(p["kernel_length"]), rng.uniform(0, np.pi))
        out = np.stack([ndimage.convolve(img[..., ch], k, mode="nearest") for ch in range(img.shape[2])], axis=-1)
    else:  # pragma: no cover - guarded by IMAGE_KINDS
        raise KindError(kind)
    return np.clip(out, 0.0, 255.0)


# -- lidar ------------------------------------------------------------------

def _in_boxes(xyz: np.ndarray, boxes) -> np.ndarray:
    mask = np.zeros(len(xyz), dtype=bool)
    for b in boxes:
        mask |= b.contains(xyz)
    return mask


def _drop_exact(n_candidates: int, fraction: float, rng) -> np.ndarray:
    """Indices (into the candidate list) of exactly floor(n * fraction) picks."""
    k = int(np.floor(n_candidates * fraction + 1e-9))
    return rng.permutation(n_candidates)[:k]


def _sphere_centers(xyz: np.ndarray, k: int, rng) -> np.ndarray:
    if len(xyz) == 0:
        return np.zeros((0, 3))
    return xyz[rng.integers(0, len(xyz), k)].copy()


def cutout_spheres(cloud: RawPointCloud, spec: CorruptionSpec) -> tuple[np.ndarray, float]:
    """Centres and radius of the spheres a ``cutout`` spec removes."""
    if spec.kind != "cutout":
        raise KindError(f"{spec.kind!r} is not 'cutout'")
    p = severity_params(spec.kind, spec.severity)
    return _sphere_centers(cloud.xyz, p["n_spheres"], spec.rng()), p["radius"]


def _impulse(n: int, rate: float, magnitude: float, rng) -> np.ndarray:
    offs = np.zeros((n, 3))
    hit = _drop_exact(n, rate, rng)
    offs[hit] = rng.choice([-magnitude, magnitude], size=(len(hit), 3))
    return offs


def corrupt_lidar(cloud: RawPointCloud, spec: CorruptionSpec, boxes: list[Box3D] | None = None) -> RawPointCloud:
    pts = cloud.points
    if spec.kind == "none":
        return RawPointCloud(pts.copy())
    if spec.kind not in LIDAR_KINDS:
        raise KindError(f"{spec.kind!r} is not a LiDAR corruption")
    if spec.kind in BOX_KINDS and boxes is None:
        raise InputError(f"{spec.kind!r} needs object boxes")
    p = severity_params(spec.kind, spec.severity)
    rng = spec.rng()
    n = len(pts)
    out = pts.copy()
    xyz = out[:, :3]
    kind = spec.kind

    if kind == "gauss_lidar":
        xyz += rng.normal(0.0, p["sigma"], (n, 3))
    elif kind == "uniform_lidar":
        xyz += rng.uniform(-p["half_width"], p["half_width"], (n, 3))
    elif kind == "impulse_lidar":
        xyz += _impulse(n, p["rate"], p["magnitude"], rng)
    elif kind == "density":
        keep = np.ones(n, dtype=bool)
        keep[_drop_exact(n, p["drop_fraction"], rng)] = False
        out = out[keep]
    elif kind == "cutout":
        keep = np.ones(n, dtype=bool)
        for c in _sphere_centers(xyz, p["n_spheres"], rng):
            keep &= np.linalg.norm(xyz - c, axis=1) > p["radius"]
        out = out[keep]
    elif kind == "crosstalk":
        hit = _drop_exact(n, p["fraction"], rng)
        xyz[hit] += rng.normal(0.0, p["jitter"], (len(hit), 3))
    elif kind == "fov_lost":
        half = np.deg2rad(p["keep_degrees"]) / 2.0
        az = np.arctan2(xyz[:, 1], xyz[:, 0])
        out = out[np.abs(az) <= half]
    elif kind == "compensation":
        k = int(p["n_sectors"])
        az = np.arctan2(xyz[:, 1], xyz[:, 0])
        sector = np.minimum(((az + np.pi) / (2 * np.pi) * k).astype(int), k - 1)
        sign = rng.choice([-1.0, 1.0])
        theta = sign * np.deg2rad(p["max_rotation_deg"]) * sector / (k - 1)
        c, s = np.cos(theta), np.sin(theta)
        x, y = xyz[:, 0].copy(), xyz[:, 1].copy()
        xyz[:, 0] = c * x - s * y
        xyz[:, 1] = s * x + c * y
    else:
        out = _corrupt_local(out, kind, p, rng, boxes)
    return RawPointCloud(out)


def _corrupt_local(pts: np.ndarray, kind: str, p: dict, rng, boxes: list[Box3D]) -> np.ndarray:
    xyz = pts[:, :3]
    if kind == "moving_object":
        for b in boxes:
            m = b.contains(xyz)
            xyz[m, 0] += p["displacement"] * np.cos(b.yaw)
            xyz[m, 1] += p["displacement"] * np.sin(b.yaw)
        return pts
    inside = np.flatnonzero(_in_boxes(xyz, boxes))
    m = len(inside)
    if kind == "local_gauss":
        xyz[inside] += rng.normal(0.0, p["sigma"], (m, 3))
    elif kind == "local_uniform":
        xyz[inside] += rng.uniform(-p["half_width"], p["half_width"], (m, 3))
    elif kind == "local_impulse":
        xyz[inside] += _impulse(m, p["rate"], p["magnitude"], rng)
    elif kind == "local_density":
        keep = np.ones(len(pts), dtype=bool)
        keep[inside[_drop_exact(m, p["drop_fraction"], rng)]] = False
        return pts[keep]
    elif kind == "local_cutout":
        keep = np.ones(len(pts), dtype=bool)
        for b in boxes:
            members = np.flatnonzero(b.contains(xyz))
            if len(members) == 0:
                continue
            c = xyz[members[rng.integers(0, len(members))]]
            near = np.linalg.norm(xyz[members] - c, axis=1) <= p["radius"]
            keep[members[near]] = False
        return pts[keep]
    return pts
