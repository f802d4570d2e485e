"""Benchmark configuration and its flat ``key = value`` file grammar.

Grammar, one entry per line::

    # comment
    key = value
    kinds = snow, fog, density        # lists are comma separated
    x_range = 0, 48                   # numeric pairs likewise

Blank lines and ``#`` comments are ignored.  Unknown or repeated keys are
errors.  Every :class:`BenchConfig` field may be set.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..corruptions import KINDS
from ..errors import InputError


@dataclass(frozen=True)
class BenchConfig:
    n_scenes: int = 20
    n_objects_min: int = 1
    n_objects_max: int = 4
    kinds: tuple[str, ...] = ("snow", "fog", "gauss_img", "density", "cutout", "gauss_lidar")
    severities: tuple[int, ...] = (1, 2, 3, 4, 5)
    scene_seed: int = 0
    corruption_seed: int = 1000
    model_seed: int = 7
    # scene layout (LiDAR frame, metres)
    x_range: tuple[float, float] = (0.0, 48.0)
    y_range: tuple[float, float] = (-24.0, 24.0)
    object_x_range: tuple[float, float] = (8.0, 40.0)
    max_object_azimuth_deg: float = 30.0
    object_dims: tuple[float, float, float] = (3.9, 1.6, 1.56)
    face_density: float = 20.0  # points per square metre of box surface
    ground_points: int = 4000
    sensor_height: float = 1.73
    image_height: int = 96
    image_width: int = 320
    focal: float = 160.0
    # detector
    cell_size: float = 0.05
    proposal_pool: int = 4
    score_threshold: float = 0.3
    score_scale: float = 60.0
    nms_iou: float = 0.7
    max_detections: int = 100
    # evaluation
    match_iou: float = 0.7
    iou_kind: str = "3d"
    rce_unit: str = "percent"
    threads: int = 1
    out_dir: str = "bench_out"

    def __post_init__(self):
        if self.n_scenes < 1:
            raise InputError("n_scenes must be >= 1")
        if not 0 <= self.n_objects_min <= self.n_objects_max:
            raise InputError("need 0 <= n_objects_min <= n_objects_max")
        if not self.kinds:
            raise InputError("kinds must be non-empty")
        for k in self.kinds:
            if k not in KINDS:
                raise InputError(f"unknown corruption kind {k!r}")
        if not self.severities or any(not 1 <= s <= 5 for s in self.severities):
            raise InputError("severities must be a non-empty subset of 1..5")
        for name in ("x_range", "y_range", "object_x_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise InputError(f"{name} must be an increasing pair")
        if self.image_height % 32 or self.image_width % 32:
            raise InputError("image dims must be multiples of 32")
        if self.cell_size <= 0 or self.proposal_pool < 1:
            raise InputError("cell_size and proposal_pool must be positive")
        if self.iou_kind not in ("bev", "3d"):
            raise InputError("iou_kind must be 'bev' or '3d'")
        if self.threads < 1:
            raise InputError("threads must be >= 1")


def _convert(name: str, ftype, raw: str):
    text = raw.strip()
    origin = getattr(ftype, "__origin__", None)
    try:
        if ftype in (int, "int"):
            return int(text)
        if ftype in (float, "float"):
            return float(text)
        if ftype in (str, "str"):
            return text
        if origin is tuple or (isinstance(ftype, str) and ftype.startswith("tuple")):
            items = [t.strip() for t in text.split(",") if t.strip()]
            inner = str(ftype)
            if "str" in inner:
                return tuple(items)
            if "int" in inner:
                return tuple(int(t) for t in items)
            return tuple(float(t) for t in items)
    except ValueError:
        raise InputError(f"bad value for {name}: {raw!r}") from None
    raise InputError(f"unsupported field type for {name}")  # pragma: no cover


def parse_config(text: str, **overrides) -> BenchConfig:
    fields = {f.name: f.type for f in dataclasses.fields(BenchConfig)}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise InputError(f"config line {lineno}: expected 'key = value'")
        if key not in fields:
            raise InputError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise InputError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, fields[key], val)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return BenchConfig(**values)


def format_config(cfg: BenchConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {', '.join(map(str, v)) if isinstance(v, tuple) else v}")
    return "\n".join(lines) + "\n"
