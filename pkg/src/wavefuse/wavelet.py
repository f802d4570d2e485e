"""Single-level orthonormal 2-D Haar transform on ``H x W x C`` maps.

Band names read (width filter, height filter): ``lh`` is low-pass along the
width and high-pass along the height.  Filters are ``(1, 1)/sqrt(2)`` and
``(1, -1)/sqrt(2)``, so the transform preserves energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

BANDS = ("LL", "LH", "HL", "HH")
_R2 = np.sqrt(0.5)


@dataclass(frozen=True)
class Subbands:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(b) for b in self.bands()}
        if len(shapes) != 1 or len(next(iter(shapes))) != 3:
            raise ShapeError(f"subbands must share one H x W x C shape, got {sorted(shapes)}")

    def bands(self) -> tuple[np.ndarray, ...]:
        return (self.ll, self.lh, self.hl, self.hh)

    def band(self, name: str) -> np.ndarray:
        return getattr(self, name.lower())

    @property
    def source_shape(self) -> tuple[int, int, int]:
        h, w, c = self.ll.shape
        return (2 * h, 2 * w, c)

    def energy(self) -> float:
        return float(sum(np.sum(np.square(b)) for b in self.bands()))

    def concat(self) -> np.ndarray:
        """Channel concatenation ``[LL, LH, HL, HH]`` -> ``H/2 x W/2 x 4C``."""
        return np.concatenate(self.bands(), axis=-1)


def dwt2(f) -> Subbands:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ShapeError(f"dwt2 expects H x W x C, got shape {f.shape}")
    h, w, _ = f.shape
    if h % 2 or w % 2:
        raise ShapeError(f"dwt2 needs even H and W, got {h}x{w}")
    # along width
    lo = (f[:, 0::2] + f[:, 1::2]) * _R2
    hi = (f[:, 0::2] - f[:, 1::2]) * _R2
    # along height
    return Subbands(
        ll=(lo[0::2] + lo[1::2]) * _R2,
        lh=(lo[0::2] - lo[1::2]) * _R2,
        hl=(hi[0::2] + hi[1::2]) * _R2,
        hh=(hi[0::2] - hi[1::2]) * _R2,
    )


def idwt2(s: Subbands) -> np.ndarray:
    h, w, c = s.ll.shape
    lo = np.empty((2 * h, w, c))
    hi = np.empty((2 * h, w, c))
    lo[0::2] = (s.ll + s.lh) * _R2
    lo[1::2] = (s.ll - s.lh) * _R2
    hi[0::2] = (s.hl + s.hh) * _R2
    hi[1::2] = (s.hl - s.hh) * _R2
    out = np.empty((2 * h, 2 * w, c))
    out[:, 0::2] = (lo + hi) * _R2
    out[:, 1::2] = (lo - hi) * _R2
    return out


def band_filter(s: Subbands, keep) -> Subbands:
    """Zero every band whose name is not in ``keep``."""
    keep = {k.upper() for k in keep}
    unknown = keep - set(BANDS)
    if unknown:
        raise ValueError(f"unknown band name(s): {sorted(unknown)}")
    return Subbands(*(b if name in keep else np.zeros_like(b) for name, b in zip(BANDS, s.bands())))
