"""Readers and writers for the KITTI velodyne, calibration and label files."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import FormatError

DIFFICULTY_LEVELS = {
    # name: (min bbox height px, max occlusion, max truncation)
    "easy": (40.0, 0, 0.15),
    "moderate": (25.0, 1, 0.30),
    "hard": (25.0, 2, 0.50),
}


@dataclass(frozen=True)
class RawPointCloud:
    """LiDAR points as an ``N x 4`` float64 array of (x, y, z, intensity)."""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 4)
        if not np.all(np.isfinite(pts)):
            raise FormatError("point cloud contains non-finite values")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, 3]


@dataclass(frozen=True)
class CalibrationSet:
    P2: np.ndarray
    R0_rect: np.ndarray
    Tr_velo_to_cam: np.ndarray

    def __post_init__(self):
        for name, shape in (("P2", (3, 4)), ("R0_rect", (3, 3)), ("Tr_velo_to_cam", (3, 4))):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.shape != shape:
                raise FormatError(f"{name} must be {shape}, got {m.shape}")
            object.__setattr__(self, name, m)

    def velo_to_rect(self, xyz: np.ndarray) -> np.ndarray:
        """LiDAR-frame points to rectified camera coordinates."""
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        cam = xyz @ self.Tr_velo_to_cam[:, :3].T + self.Tr_velo_to_cam[:, 3]
        return cam @ self.R0_rect.T

    def rect_to_image(self, rect: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project rectified points; returns (pixel uv, homogeneous depth)."""
        hom = rect @ self.P2[:, :3].T + self.P2[:, 3]
        w = hom[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = hom[:, :2] / w[:, None]
        return uv, w

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(m)) for m in (self.P2, self.R0_rect, self.Tr_velo_to_cam))


@dataclass
class LabelRecord:
    cls: str
    truncation: float
    occlusion: int
    alpha: float
    bbox2d: tuple[float, float, float, float]
    dims: tuple[float, float, float]  # h, w, l
    location: tuple[float, float, float]  # camera frame, bottom centre
    rotation_y: float
    score: float | None = None

    @property
    def dont_care(self) -> bool:
        return self.cls == "DontCare"

    def difficulty_ok(self, level: str) -> bool:
        min_h, max_occ, max_trunc = DIFFICULTY_LEVELS[level]
        height = self.bbox2d[3] - self.bbox2d[1]
        return height >= min_h and self.occlusion <= max_occ and self.truncation <= max_trunc


# -- velodyne ---------------------------------------------------------------

def read_velodyne_bin(data: bytes) -> RawPointCloud:
    if len(data) % 16:
        raise FormatError(f"velodyne payload of {len(data)} bytes is not a multiple of 16")
    arr = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    return RawPointCloud(arr.astype(np.float64))


def write_velodyne_bin(cloud: RawPointCloud) -> bytes:
    return np.ascontiguousarray(cloud.points, dtype="<f4").tobytes()


# -- calibration ------------------------------------------------------------

_CALIB_KEYS = {"P2": 12, "R0_rect": 9, "Tr_velo_to_cam": 12}


def parse_calib(text: str) -> CalibrationSet:
    found: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep:
            raise FormatError(f"calib line {lineno}: expected 'KEY: values'")
        if key not in _CALIB_KEYS:
            continue
        try:
            vals = np.array([float(v) for v in rest.split()])
        except ValueError as exc:
            raise FormatError(f"calib line {lineno}: {exc}") from None
        if vals.size != _CALIB_KEYS[key]:
            raise FormatError(
                f"calib line {lineno}: {key} needs {_CALIB_KEYS[key]} values, got {vals.size}"
            )
        found[key] = vals
    missing = [k for k in _CALIB_KEYS if k not in found]
    if missing:
        raise FormatError(f"calib missing required key(s): {', '.join(missing)}")
    return CalibrationSet(
        P2=found["P2"].reshape(3, 4),
        R0_rect=found["R0_rect"].reshape(3, 3),
        Tr_velo_to_cam=found["Tr_velo_to_cam"].reshape(3, 4),
    )


def format_calib(calib: CalibrationSet) -> str:
    def row(name, m):
        return name + ": " + " ".join(f"{v:.12e}" for v in np.ravel(m))

    return "\n".join([
        row("P2", calib.P2),
        row("R0_rect", calib.R0_rect),
        row("Tr_velo_to_cam", calib.Tr_velo_to_cam),
    ]) + "\n"


# -- labels -----------------------------------------------------------------

def parse_labels(text: str, keep_dontcare: bool = True) -> list[LabelRecord]:
    """Parse a KITTI label file (15 fields) or detection file (16 fields).

    Errors name the 1-based line number.  ``DontCare`` rows are kept by
    default so evaluators can treat them explicitly; check
    :attr:`LabelRecord.dont_care`.
    """
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) not in (15, 16):
            raise FormatError(f"label line {lineno}: expected 15 or 16 fields, got {len(fields)}")
        try:
            nums = [float(v) for v in fields[1:]]
            occ = int(float(fields[2]))
        except ValueError as exc:
            raise FormatError(f"label line {lineno}: {exc}") from None
        rec = LabelRecord(
            cls=fields[0],
            truncation=nums[0],
            occlusion=occ,
            alpha=nums[2],
            bbox2d=tuple(nums[3:7]),
            dims=tuple(nums[7:10]),
            location=tuple(nums[10:13]),
            rotation_y=nums[13],
            score=nums[14] if len(fields) == 16 else None,
        )
        if rec.dont_care and not keep_dontcare:
            continue
        records.append(rec)
    return records


def format_labels(records: Iterable[LabelRecord]) -> str:
    lines = []
    for r in records:
        vals = [r.truncation, r.occlusion, r.alpha, *r.bbox2d, *r.dims, *r.location, r.rotation_y]
        parts = [r.cls, f"{r.truncation:.2f}", str(int(r.occlusion))]
        parts += [f"{v:.2f}" for v in vals[2:]]
        if r.score is not None:
            parts.append(f"{r.score:.4f}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")
