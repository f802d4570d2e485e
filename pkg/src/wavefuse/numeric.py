"""Dense float64 kernels used by every feature-map module.

Feature maps are ``numpy.ndarray`` objects laid out channels-last
(``H x W x C``).  All arithmetic is carried out in float64; callers may pass
float32 data, it is promoted on entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError


def as_tensor(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class LinearMap:
    """Affine map ``y = x @ weight.T + bias`` on the last axis."""

    weight: np.ndarray  # [out_dim, in_dim]
    bias: np.ndarray | None = None  # [out_dim]

    def __post_init__(self):
        w = as_tensor(self.weight)
        if w.ndim != 2:
            raise ShapeError(f"LinearMap weight must be 2-D, got shape {w.shape}")
        object.__setattr__(self, "weight", w)
        b = np.zeros(w.shape[0]) if self.bias is None else as_tensor(self.bias)
        if b.shape != (w.shape[0],):
            raise ShapeError(f"LinearMap bias shape {b.shape} != ({w.shape[0]},)")
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x) -> np.ndarray:
        x = as_tensor(x)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"LinearMap expects last dim {self.in_dim}, got {x.shape[-1]}")
        return x @ self.weight.T + self.bias


@dataclass(frozen=True)
class ConvKernel:
    """2-D convolution weights ``[out_ch, in_ch, kh, kw]`` plus bias."""

    weight: np.ndarray
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        w = as_tensor(self.weight)
        if w.ndim != 4 or w.shape[2] < 1 or w.shape[3] < 1:
            raise ShapeError(f"ConvKernel weight must be [out, in, kh, kw], got {w.shape}")
        if self.stride < 1 or self.padding < 0:
            raise ShapeError(f"invalid stride/padding ({self.stride}, {self.padding})")
        object.__setattr__(self, "weight", w)
        b = np.zeros(w.shape[0]) if self.bias is None else as_tensor(self.bias)
        if b.shape != (w.shape[0],):
            raise ShapeError(f"ConvKernel bias shape {b.shape} != ({w.shape[0]},)")
        object.__setattr__(self, "bias", b)

    @property
    def in_ch(self) -> int:
        return self.weight.shape[1]

    @property
    def out_ch(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class TConvKernel:
    """Stride-2, 2x2 transposed convolution weights ``[in_ch, out_ch, 2, 2]``."""

    weight: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        w = as_tensor(self.weight)
        if w.ndim != 4 or w.shape[2:] != (2, 2):
            raise ShapeError(f"TConvKernel weight must be [in, out, 2, 2], got {w.shape}")
        object.__setattr__(self, "weight", w)
        b = np.zeros(w.shape[1]) if self.bias is None else as_tensor(self.bias)
        if b.shape != (w.shape[1],):
            raise ShapeError(f"TConvKernel bias shape {b.shape} != ({w.shape[1]},)")
        object.__setattr__(self, "bias", b)


def matmul(a, b) -> np.ndarray:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax over the last axis, stabilised by the row max."""
    m = as_tensor(m)
    if m.ndim < 1 or m.shape[-1] == 0:
        raise ShapeError(f"softmax needs a non-empty last axis, got shape {m.shape}")
    z = m - m.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def attention(q, k, v, scale: float | None = None, return_weights: bool = False):
    """Single-head scaled dot-product attention on token matrices.

    ``q`` is ``[..., Nq, d]``, ``k`` is ``[..., Nk, d]``, ``v`` is
    ``[..., Nk, dv]``.  ``scale`` defaults to ``1/sqrt(d)``.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"attention shapes q={q.shape} k={k.shape} v={v.shape} disagree")
    if scale is None:
        scale = 1.0 / np.sqrt(q.shape[-1])
    w = softmax_rows((q @ np.swapaxes(k, -1, -2)) * scale)
    out = w @ v
    return (out, w) if return_weights else out


def relu(x) -> np.ndarray:
    return np.maximum(as_tensor(x), 0.0)


def gelu(x) -> np.ndarray:
    x = as_tensor(x)
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x**3)))


def layer_norm(x, eps: float = 1e-6) -> np.ndarray:
    x = as_tensor(x)
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def _check_map(x: np.ndarray, name: str = "input") -> np.ndarray:
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"{name} must be H x W x C, got shape {x.shape}")
    return x


def conv2d(x, k: ConvKernel) -> np.ndarray:
    """Cross-correlation (no kernel flip) of an ``H x W x Cin`` map."""
    x = _check_map(x)
    h, w, cin = x.shape
    cout, kin, kh, kw = k.weight.shape
    if cin != kin:
        raise ShapeError(f"kernel expects {kin} input channels, map has {cin}")
    s, p = k.stride, k.padding
    num_h, num_w = h + 2 * p - kh, w + 2 * p - kw
    if num_h < 0 or num_w < 0 or num_h % s or num_w % s:
        raise ShapeError(
            f"conv output size not integral for H={h} W={w} kernel={kh}x{kw} stride={s} pad={p}"
        )
    if p:
        x = np.pad(x, ((p, p), (p, p), (0, 0)))
    win = sliding_window_view(x, (kh, kw), axis=(0, 1))[::s, ::s]  # [H', W', Cin, kh, kw]
    out = np.tensordot(win, k.weight, axes=([2, 3, 4], [1, 2, 3]))
    return out + k.bias


def maxpool2(x) -> np.ndarray:
    x = _check_map(x)
    h, w, c = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 needs even H and W, got {h}x{w}")
    return x.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


def nearest_up2(x) -> np.ndarray:
    x = _check_map(x)
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


def tconv2(x, k: TConvKernel) -> np.ndarray:
    """Transposed convolution, kernel 2, stride 2: doubles H and W."""
    x = _check_map(x)
    h, w, cin = x.shape
    if cin != k.weight.shape[0]:
        raise ShapeError(f"tconv kernel expects {k.weight.shape[0]} channels, map has {cin}")
    # out[2i+a, 2j+b, o] = sum_c x[i, j, c] * W[c, o, a, b]
    y = np.einsum("ijc,coab->iajbo", x, k.weight)
    return y.reshape(2 * h, 2 * w, -1) + k.bias


def resample(x, mode: str, kernel: TConvKernel | None = None) -> np.ndarray:
    if mode == "maxpool2":
        return maxpool2(x)
    if mode == "nearest_up2":
        return nearest_up2(x)
    if mode == "tconv2":
        if kernel is None:
            raise ShapeError("tconv2 resampling needs a kernel")
        return tconv2(x, kernel)
    raise ValueError(f"unknown resample mode {mode!r}")


def pool_to_stride(x, factor: int) -> np.ndarray:
    """Repeated maxpool2 until the map is ``factor`` times coarser."""
    if factor < 1 or factor & (factor - 1):
        raise ShapeError(f"pool factor must be a power of two, got {factor}")
    while factor > 1:
        x = maxpool2(x)
        factor //= 2
    return x


def philox(*key: int) -> np.random.Generator:
    """Counter-based generator keyed by a tuple of non-negative integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def init_linear(rng: np.random.Generator, in_dim: int, out_dim: int, bias: bool = True) -> LinearMap:
    bound = 1.0 / np.sqrt(in_dim)
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    b = rng.uniform(-bound, bound, size=out_dim) if bias else None
    return LinearMap(w, b)


def init_conv(rng: np.random.Generator, in_ch: int, out_ch: int, size: int, stride: int = 1,
              padding: int | None = None) -> ConvKernel:
    fan_in = in_ch * size * size
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(out_ch, in_ch, size, size))
    b = rng.uniform(-bound, bound, size=out_ch)
    return ConvKernel(w, b, stride=stride, padding=size // 2 if padding is None else padding)


def init_tconv(rng: np.random.Generator, in_ch: int, out_ch: int) -> TConvKernel:
    bound = 1.0 / np.sqrt(in_ch * 4)
    w = rng.uniform(-bound, bound, size=(in_ch, out_ch, 2, 2))
    b = rng.uniform(-bound, bound, size=out_ch)
    return TConvKernel(w, b)
