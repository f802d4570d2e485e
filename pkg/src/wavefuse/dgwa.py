"""Depth-guided wavelet attention.

Pipeline on one frame::

    S (H x W x 2) --depth_encode--> F_d (H/4 x W/4 x C)
    concat(F_i, F_d) --1x1 conv--> guided features G (H/4 x W/4 x C)
    dwt2(G) -> four bands (H/8 x W/8 x C each), concatenated to 4C channels
    attention(queries from G, keys/values from the bands) -> F_att
    MLP(concat(F_att, idwt2(bands))) -> F_out (H/4 x W/4 x C_out)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .geometry import SparseDepthMap
from .numeric import (
    ConvKernel,
    LinearMap,
    attention,
    conv2d,
    init_conv,
    init_linear,
    maxpool2,
    philox,
    pool_to_stride,
    relu,
)
from .wavelet import Subbands, band_filter, dwt2, idwt2

DEFAULT_MAX_RANGE = 80.0  # metres


@dataclass(frozen=True)
class DgwaParams:
    depth_convs: tuple[ConvKernel, ConvKernel]  # 3x3, each followed by ReLU + maxpool2
    guide_conv: ConvKernel  # 1x1, C_i + C -> C
    wq: LinearMap  # C -> d_k
    wk: LinearMap  # 4C -> d_k
    wv: LinearMap  # 4C -> d_v
    mlp: tuple[LinearMap, LinearMap]  # (d_v + C) -> hidden -> C_out
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self):
        c = self.guide_conv.out_ch
        if self.wq.in_dim != c:
            raise ShapeError(f"wq input dim {self.wq.in_dim} != guided channels {c}")
        if self.wk.in_dim != 4 * c or self.wv.in_dim != 4 * c:
            raise ShapeError(f"wk/wv input dims must equal 4C = {4 * c}")
        if self.wq.out_dim != self.wk.out_dim:
            raise ShapeError("wq and wk output dims differ")
        if self.mlp[0].in_dim != self.wv.out_dim + c:
            raise ShapeError(f"mlp input dim must be d_v + C = {self.wv.out_dim + c}")

    @property
    def channels(self) -> int:
        return self.guide_conv.out_ch


@dataclass(frozen=True)
class DgwaOutput:
    out: np.ndarray  # F_out
    attention: np.ndarray  # F_att
    weights: np.ndarray  # (H/4 * W/4) x (H/8 * W/8), row-stochastic
    reconstruction: np.ndarray  # idwt2 of the (possibly filtered) bands
    bands: Subbands


def make_dgwa_params(seed: int, c_i: int = 32, c: int = 16, d_k: int = 16, d_v: int = 16,
                     hidden: int = 32, c_out: int = 16, depth_ch: int = 16,
                     max_range: float = DEFAULT_MAX_RANGE) -> DgwaParams:
    rng = philox(seed, 0x444757)
    return DgwaParams(
        depth_convs=(init_conv(rng, 2, depth_ch, 3), init_conv(rng, depth_ch, c, 3)),
        guide_conv=init_conv(rng, c_i + c, c, 1),
        wq=init_linear(rng, c, d_k),
        wk=init_linear(rng, 4 * c, d_k),
        wv=init_linear(rng, 4 * c, d_v),
        mlp=(init_linear(rng, d_v + c, hidden), init_linear(rng, hidden, c_out)),
        max_range=max_range,
    )


def depth_encode(s: SparseDepthMap | np.ndarray, params: DgwaParams) -> np.ndarray:
    data = s.data if isinstance(s, SparseDepthMap) else np.asarray(s, dtype=np.float64)
    if data.ndim != 3 or data.shape[2] != 2:
        raise ShapeError(f"sparse depth map must be H x W x 2, got {data.shape}")
    h, w, _ = data.shape
    if h % 4 or w % 4:
        raise ShapeError(f"depth map dims {h}x{w} must be divisible by 4")
    x = np.stack([data[..., 0] / params.max_range, data[..., 1]], axis=-1)
    for k in params.depth_convs:
        x = maxpool2(relu(conv2d(x, k)))
    return x


def depth_guide(f_i, f_d, params: DgwaParams) -> np.ndarray:
    f_i, f_d = np.asarray(f_i, dtype=np.float64), np.asarray(f_d, dtype=np.float64)
    if f_i.shape[:2] != f_d.shape[:2]:
        raise ShapeError(f"spatial dims differ: image {f_i.shape[:2]} vs depth {f_d.shape[:2]}")
    return conv2d(np.concatenate([f_i, f_d], axis=-1), params.guide_conv)


def wave_attention(q_src, s: Subbands, params: DgwaParams, return_weights: bool = False):
    """Cross-attention from stride-4 query tokens to stride-8 band tokens."""
    q_src = np.asarray(q_src, dtype=np.float64)
    if q_src.ndim != 3:
        raise ShapeError(f"query map must be H x W x C, got {q_src.shape}")
    h, w, c = q_src.shape
    kv = s.concat()
    if c != params.wq.in_dim or kv.shape[-1] != params.wk.in_dim:
        raise ShapeError(
            f"channel mismatch: query {c} vs wq {params.wq.in_dim}, bands {kv.shape[-1]} vs wk {params.wk.in_dim}"
        )
    kv = kv.reshape(-1, kv.shape[-1])
    q = params.wq(q_src.reshape(-1, c))
    out, weights = attention(q, params.wk(kv), params.wv(kv), return_weights=True)
    out = out.reshape(h, w, -1)
    return (out, weights) if return_weights else out


def dgwa_forward(q_src, params: DgwaParams, keep=None, pool: int = 1,
                 return_intermediates: bool = False):
    """Full wavelet-attention block on guided features.

    ``keep`` optionally restricts the bands passed to the inverse transform
    (a diagnostic; the attention branch always sees every band).  ``pool``
    max-pools the output to a coarser stride for consumers that need one.
    """
    q_src = np.asarray(q_src, dtype=np.float64)
    if q_src.ndim != 3 or q_src.shape[0] % 2 or q_src.shape[1] % 2:
        raise ShapeError(f"guided features need even H and W, got {q_src.shape}")
    bands = dwt2(q_src)
    att, weights = wave_attention(q_src, bands, params, return_weights=True)
    recon = idwt2(bands if keep is None else band_filter(bands, keep))
    fc1, fc2 = params.mlp
    out = fc2(relu(fc1(np.concatenate([att, recon], axis=-1))))
    if pool > 1:
        out = pool_to_stride(out, pool)
    if return_intermediates:
        return DgwaOutput(out, att, weights, recon, bands)
    return out
