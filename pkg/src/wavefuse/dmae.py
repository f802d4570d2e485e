"""Patch masking and the masked reconstruction loss for denoising pretraining.

Inputs are corrupted images; the loss target is always the clean image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ShapeError
from .numeric import philox

DEFAULT_MASK_RATIO = 0.75


@dataclass(frozen=True)
class PatchMask:
    patch_size: int
    masked: np.ndarray  # gh x gw bool

    @property
    def grid(self) -> tuple[int, int]:
        return self.masked.shape

    @property
    def count(self) -> int:
        return int(self.masked.sum())

    def pixel_mask(self) -> np.ndarray:
        """``H x W`` boolean mask of pixels inside masked patches."""
        p = self.patch_size
        return np.repeat(np.repeat(self.masked, p, axis=0), p, axis=1)


def mask_count(n_patches: int, ratio: float) -> int:
    # half-up rounding; Python's round() would send 2.5 -> 2
    return int(np.floor(ratio * n_patches + 0.5))


def mask_patches(img, patch: int, ratio: float = DEFAULT_MASK_RATIO, seed: int = 0):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise ShapeError(f"image must be H x W x C, got {img.shape}")
    if patch < 1:
        raise InputError(f"patch size must be positive, got {patch}")
    if not 0.0 <= ratio <= 1.0:
        raise InputError(f"mask ratio must be in [0, 1], got {ratio}")
    h, w, _ = img.shape
    if h % patch or w % patch:
        raise ShapeError(f"image {h}x{w} not divisible by patch size {patch}")
    gh, gw = h // patch, w // patch
    n = gh * gw
    chosen = philox(seed, 0x4D41534B).permutation(n)[: mask_count(n, ratio)]
    flags = np.zeros(n, dtype=bool)
    flags[chosen] = True
    mask = PatchMask(patch, flags.reshape(gh, gw))
    masked_img = img.copy()
    masked_img[mask.pixel_mask()] = 0.0
    return masked_img, mask


def dmae_loss(pred, clean, mask: PatchMask) -> float:
    """Mean squared error over the pixels of masked patches (all channels)."""
    pred, clean = np.asarray(pred, dtype=np.float64), np.asarray(clean, dtype=np.float64)
    if pred.shape != clean.shape:
        raise ShapeError(f"prediction {pred.shape} and target {clean.shape} differ")
    pm = mask.pixel_mask()
    if pm.shape != pred.shape[:2]:
        raise ShapeError(f"mask covers {pm.shape}, images are {pred.shape[:2]}")
    if not pm.any():
        return 0.0
    diff = pred[pm] - clean[pm]
    return float(np.mean(diff * diff))
