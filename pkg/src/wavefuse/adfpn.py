"""Stride-16 stub image encoder and the four-level pyramid built from it.

The encoder is a small ViT-style stand-in: 16x16 patches, a linear
embedding, a fixed sinusoidal position code and a few pre-norm transformer
blocks.  The pyramid derives strides {32, 16, 8, 4} from its single output
and merges them coarse-to-fine into one stride-4 feature map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numeric import (
    ConvKernel,
    LinearMap,
    TConvKernel,
    attention,
    conv2d,
    gelu,
    init_conv,
    init_linear,
    init_tconv,
    layer_norm,
    maxpool2,
    nearest_up2,
    philox,
    tconv2,
)

PATCH = 16
STRIDES = (32, 16, 8, 4)


@dataclass(frozen=True)
class ImageEmbedding:
    map: np.ndarray  # H/16 x W/16 x D
    source_hw: tuple[int, int]


@dataclass(frozen=True)
class FeaturePyramid:
    levels: dict[int, np.ndarray]  # stride -> H/s x W/s x C_f

    def __getitem__(self, stride: int) -> np.ndarray:
        return self.levels[stride]


@dataclass(frozen=True)
class EncoderBlock:
    wq: LinearMap
    wk: LinearMap
    wv: LinearMap
    wo: LinearMap
    fc1: LinearMap
    fc2: LinearMap


@dataclass(frozen=True)
class EncoderParams:
    embed: LinearMap  # 3*16*16 -> D
    blocks: tuple[EncoderBlock, ...]
    use_position: bool = True

    @property
    def dim(self) -> int:
        return self.embed.out_dim


@dataclass(frozen=True)
class PyramidParams:
    # stride 32 is a parameter-free maxpool, stride 16 the identity
    up8: TConvKernel
    up4: tuple[TConvKernel, TConvKernel]
    laterals: dict[int, ConvKernel]  # 1x1, D -> C_f, keyed by stride
    smooth: dict[int, ConvKernel]  # 3x3 at strides 16, 8, 4; the last maps to C_i

    @property
    def out_channels(self) -> int:
        return self.smooth[4].out_ch


def make_encoder_params(seed: int, dim: int = 64, depth: int = 2, mlp_ratio: int = 2,
                        use_position: bool = True) -> EncoderParams:
    rng = philox(seed, 0x454E43)
    embed = init_linear(rng, 3 * PATCH * PATCH, dim)
    blocks = tuple(
        EncoderBlock(
            wq=init_linear(rng, dim, dim),
            wk=init_linear(rng, dim, dim),
            wv=init_linear(rng, dim, dim),
            wo=init_linear(rng, dim, dim),
            fc1=init_linear(rng, dim, dim * mlp_ratio),
            fc2=init_linear(rng, dim * mlp_ratio, dim),
        )
        for _ in range(depth)
    )
    return EncoderParams(embed, blocks, use_position)


def make_pyramid_params(seed: int, dim: int = 64, c_f: int = 32, c_i: int = 32) -> PyramidParams:
    rng = philox(seed, 0x46504E)
    return PyramidParams(
        up8=init_tconv(rng, dim, dim),
        up4=(init_tconv(rng, dim, dim), init_tconv(rng, dim, dim)),
        laterals={s: init_conv(rng, dim, c_f, 1) for s in STRIDES},
        smooth={16: init_conv(rng, c_f, c_f, 3), 8: init_conv(rng, c_f, c_f, 3), 4: init_conv(rng, c_f, c_i, 3)},
    )


def position_code(gh: int, gw: int, dim: int) -> np.ndarray:
    """2-D sinusoidal code: first half of channels encodes rows, second columns."""
    if dim % 4:
        raise ShapeError(f"position code needs dim divisible by 4, got {dim}")
    quarter = dim // 4
    freqs = 1.0 / (10000.0 ** (np.arange(quarter) / quarter))
    rows = np.arange(gh)[:, None] * freqs
    cols = np.arange(gw)[:, None] * freqs
    row_code = np.concatenate([np.sin(rows), np.cos(rows)], axis=1)  # gh x dim/2
    col_code = np.concatenate([np.sin(cols), np.cos(cols)], axis=1)  # gw x dim/2
    code = np.concatenate([
        np.broadcast_to(row_code[:, None, :], (gh, gw, dim // 2)),
        np.broadcast_to(col_code[None, :, :], (gh, gw, dim // 2)),
    ], axis=-1)
    return code.reshape(gh * gw, dim)


def patchify(image: np.ndarray, patch: int = PATCH) -> np.ndarray:
    h, w, c = image.shape
    gh, gw = h // patch, w // patch
    return image.reshape(gh, patch, gw, patch, c).transpose(0, 2, 1, 3, 4).reshape(gh * gw, patch * patch * c)


def _block(x: np.ndarray, b: EncoderBlock) -> np.ndarray:
    y = layer_norm(x)
    x = x + b.wo(attention(b.wq(y), b.wk(y), b.wv(y)))
    return x + b.fc2(gelu(b.fc1(layer_norm(x))))


def encode_tokens(tokens: np.ndarray, params: EncoderParams, grid: tuple[int, int]) -> np.ndarray:
    x = params.embed(tokens)
    if params.use_position:
        x = x + position_code(grid[0], grid[1], params.dim)
    for b in params.blocks:
        x = _block(x, b)
    return x


def encode_stub(image, params: EncoderParams) -> ImageEmbedding:
    """Encode an ``H x W x 3`` image (0..255) into a stride-16 embedding."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"image must be H x W x 3, got {image.shape}")
    h, w, _ = image.shape
    if h % PATCH or w % PATCH or h == 0 or w == 0:
        raise ShapeError(f"image dims {h}x{w} must be positive multiples of {PATCH}")
    gh, gw = h // PATCH, w // PATCH
    tokens = patchify(image / 255.0 - 0.5)
    x = encode_tokens(tokens, params, (gh, gw))
    return ImageEmbedding(x.reshape(gh, gw, params.dim), (h, w))


def build_pyramid(e: ImageEmbedding, params: PyramidParams) -> FeaturePyramid:
    m = e.map
    raw = {
        32: maxpool2(m),
        16: m,
        8: tconv2(m, params.up8),
        4: tconv2(tconv2(m, params.up4[0]), params.up4[1]),
    }
    return FeaturePyramid({s: conv2d(raw[s], params.laterals[s]) for s in STRIDES})


def merge_pyramid(p: FeaturePyramid, params: PyramidParams) -> np.ndarray:
    """Coarse-to-fine accumulation ending at stride 4 with ``C_i`` channels."""
    running = p[32]
    for s in STRIDES[1:]:
        running = conv2d(nearest_up2(running) + p[s], params.smooth[s])
    return running


def image_features(image, enc: EncoderParams, pyr: PyramidParams) -> np.ndarray:
    """Image -> stride-4 feature ``F_i``."""
    return merge_pyramid(build_pyramid(encode_stub(image, enc), pyr), pyr)
