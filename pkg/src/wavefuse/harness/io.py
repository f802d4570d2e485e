"""Binary PPM images and the raw float feature container.

Feature container layout (little-endian)::

    bytes 0..3    magic b"WFT1"
    bytes 4..15   uint32 H, W, C
    bytes 16..    float32 data, row-major H x W x C
"""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

RAW_MAGIC = b"WFT1"

_PPM_HEADER = re.compile(rb"\AP6\s+(?:#[^\n]*\s+)*(\d+)\s+(?:#[^\n]*\s+)*(\d+)\s+(?:#[^\n]*\s+)*(\d+)\s")


def read_ppm(data: bytes) -> np.ndarray:
    m = _PPM_HEADER.match(data)
    if not m:
        raise FormatError("not a binary PPM (P6) image")
    w, h, maxval = (int(g) for g in m.groups())
    if not 0 < maxval < 256:
        raise FormatError(f"only 8-bit PPM supported, maxval={maxval}")
    body = data[m.end():]
    if len(body) < w * h * 3:
        raise FormatError(f"PPM body truncated: {len(body)} < {w * h * 3} bytes")
    img = np.frombuffer(body[: w * h * 3], dtype=np.uint8).reshape(h, w, 3)
    return img.astype(np.float64) * (255.0 / maxval)


def write_ppm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise FormatError(f"PPM needs H x W x 3, got {img.shape}")
    h, w, _ = img.shape
    pix = np.clip(np.round(img), 0, 255).astype(np.uint8)
    return f"P6\n{w} {h}\n255\n".encode() + pix.tobytes()


def write_raw(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim != 3:
        raise FormatError(f"raw container holds H x W x C maps, got {arr.shape}")
    return RAW_MAGIC + struct.pack("<3I", *arr.shape) + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def read_raw(data: bytes) -> np.ndarray:
    if len(data) < 16 or data[:4] != RAW_MAGIC:
        raise FormatError("missing raw feature header")
    h, w, c = struct.unpack("<3I", data[4:16])
    n = h * w * c * 4
    if len(data) - 16 != n:
        raise FormatError(f"raw payload is {len(data) - 16} bytes, header implies {n}")
    return np.frombuffer(data[16:], dtype="<f4").reshape(h, w, c).astype(np.float64)


def read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
