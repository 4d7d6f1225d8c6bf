"""Shared-weight retrieval encoder: a four-stage ConvNeXt at desk scale.

The stem patchifies with a 4x4 non-overlapping convolution, each block is
a depthwise 7x7 followed by an inverted bottleneck (4x hidden width, GELU,
layer norm), and stride-2 downsamplers sit only between stages. One
parameter set serves both the panorama and the overhead view; the head
pools, normalizes and projects to a unit-norm embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import arraycore as ac
from ..arraycore import Array
from .params import ParamSet, trunc_normal


@dataclass(frozen=True)
class ConvNeXtConfig:
    stage_blocks: tuple = (1, 1, 3, 1)
    stage_channels: tuple = (16, 32, 64, 128)
    patch_size: int = 4
    dw_kernel: int = 7
    expansion: int = 4
    embed_dim: int = 64

    def __post_init__(self):
        if len(self.stage_blocks) != 4 or len(self.stage_channels) != 4:
            raise ValueError("encoder uses exactly four stages")
        if self.expansion != 4:
            raise ValueError("hidden layer must be four times the input width")
        if self.patch_size != 4:
            raise ValueError("stem uses a 4x4 non-overlapping convolution")

    @property
    def total_stride(self) -> int:
        return self.patch_size * 2 ** (len(self.stage_channels) - 1)


def _to_cl(x: Array) -> Array:
    """Channels-first feature map -> channels-last."""
    axes = (1, 2, 0) if x.ndim == 3 else (0, 2, 3, 1)
    return ac.transpose(x, axes)


def _to_cf(x: Array) -> Array:
    axes = (2, 0, 1) if x.ndim == 3 else (0, 3, 1, 2)
    return ac.transpose(x, axes)


def channel_layer_norm(x: Array, gamma: Array, beta: Array, eps: float = 1e-6) -> Array:
    """Layer norm over the channel axis of a channels-first feature map."""
    return _to_cf(ac.layer_norm(_to_cl(x), gamma, beta, eps=eps))


def patchify_stem(image: Array, params: dict, patch_size: int = 4) -> Array:
    """Non-overlapping patch embedding: strided conv then layer norm."""
    h, w = image.shape[-2], image.shape[-1]
    if h % patch_size or w % patch_size:
        raise ValueError(f"input {h}x{w} must be divisible by the patch size {patch_size}")
    x = ac.conv2d(image, params["conv"], stride=patch_size)
    return channel_layer_norm(x, params["norm.gamma"], params["norm.beta"])


def convnext_block(x: Array, params: dict) -> Array:
    """Depthwise 7x7 -> LN -> 4x expand -> GELU -> project, with residual."""
    c = x.shape[-3]
    dw = params["dw"]
    if dw.shape[0] != c:
        raise ValueError(f"block expects {dw.shape[0]} channels, feature map has {c}")
    y = ac.conv2d(x, dw, stride=1, padding=dw.shape[-1] // 2, groups=c)
    y = ac.layer_norm(_to_cl(y), params["norm.gamma"], params["norm.beta"])
    y = ac.linear(y, params["expand.w"], params["expand.b"])
    y = ac.gelu(y)
    y = ac.linear(y, params["project.w"], params["project.b"])
    return x + _to_cf(y)


def init_convnext_params(cfg: ConvNeXtConfig, seed: int, dtype=np.float32) -> ParamSet:
    """Deterministic initialization: trunc-normal weights, unit norms, zero biases."""
    rng = np.random.default_rng(seed)
    ps = ParamSet()
    ch = cfg.stage_channels

    ps.add("stem.conv", trunc_normal(rng, (ch[0], 3, cfg.patch_size, cfg.patch_size), dtype=dtype))
    ps.add("stem.norm.gamma", np.ones(ch[0], dtype=dtype))
    ps.add("stem.norm.beta", np.zeros(ch[0], dtype=dtype))

    for s, (blocks, c) in enumerate(zip(cfg.stage_blocks, ch)):
        if s > 0:
            ps.add(f"down.{s}.norm.gamma", np.ones(ch[s - 1], dtype=dtype))
            ps.add(f"down.{s}.norm.beta", np.zeros(ch[s - 1], dtype=dtype))
            ps.add(f"down.{s}.conv", trunc_normal(rng, (c, ch[s - 1], 2, 2), dtype=dtype))
        hidden = cfg.expansion * c
        for b in range(blocks):
            p = f"stages.{s}.blocks.{b}"
            ps.add(f"{p}.dw", trunc_normal(rng, (c, 1, cfg.dw_kernel, cfg.dw_kernel), dtype=dtype))
            ps.add(f"{p}.norm.gamma", np.ones(c, dtype=dtype))
            ps.add(f"{p}.norm.beta", np.zeros(c, dtype=dtype))
            ps.add(f"{p}.expand.w", trunc_normal(rng, (c, hidden), dtype=dtype))
            ps.add(f"{p}.expand.b", np.zeros(hidden, dtype=dtype))
            ps.add(f"{p}.project.w", trunc_normal(rng, (hidden, c), dtype=dtype))
            ps.add(f"{p}.project.b", np.zeros(c, dtype=dtype))

    ps.add("head.norm.gamma", np.ones(ch[-1], dtype=dtype))
    ps.add("head.norm.beta", np.zeros(ch[-1], dtype=dtype))
    ps.add("head.proj.w", trunc_normal(rng, (ch[-1], cfg.embed_dim), dtype=dtype))
    ps.add("head.proj.b", np.zeros(cfg.embed_dim, dtype=dtype))
    return ps


def convnext_encode(image: Array, cfg: ConvNeXtConfig, params: ParamSet) -> Array:
    """Embed one [3,H,W] image (or an [N,3,H,W] batch) to unit norm.

    The network is fully convolutional, so the same parameter set accepts
    panorama (H x 2H) and overhead (H x H) inputs alike.
    """
    h, w = image.shape[-2], image.shape[-1]
    stride = cfg.total_stride
    if h % stride or w % stride:
        raise ValueError(
            f"input {h}x{w} is incompatible: both sides must be divisible by {stride} "
            f"(patch {cfg.patch_size} plus three stride-2 downsamplers)"
        )
    x = patchify_stem(image, params.view("stem"), cfg.patch_size)
    for s, blocks in enumerate(cfg.stage_blocks):
        if s > 0:
            dp = params.view(f"down.{s}")
            x = channel_layer_norm(x, dp["norm.gamma"], dp["norm.beta"])
            x = ac.conv2d(x, dp["conv"], stride=2)
        for b in range(blocks):
            x = convnext_block(x, params.view(f"stages.{s}.blocks.{b}"))
    x = ac.global_avg_pool(x)
    x = ac.layer_norm(x, params["head.norm.gamma"], params["head.norm.beta"])
    x = ac.linear(x, params["head.proj.w"], params["head.proj.b"])
    return ac.l2_normalize(x)
