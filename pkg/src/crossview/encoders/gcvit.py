"""Windowed-attention classifier backbone with global query tokens.

Four stages alternate local and global self-attention in non-overlapping
windows. Local blocks derive queries from their own window; global blocks
query every window with stage-wide tokens produced by a strided downsample
path, which is what extends the receptive field past the window. Channels
double and resolution halves between stages. The damage classifier runs
two disjoint branches (street / overhead) and fuses their pooled features
through a single linear head.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import arraycore as ac
from ..arraycore import Array
from .convnext import _to_cf, _to_cl, channel_layer_norm
from .params import ParamSet, trunc_normal


@dataclass(frozen=True)
class GCViTConfig:
    stage_depths: tuple = (1, 1, 1, 1)  # (local, global) pair count per stage
    window: int = 4
    heads: tuple = (1, 2, 4, 8)
    stage_channels: tuple = (16, 32, 64, 128)
    mlp_expansion: int = 4
    num_classes: int = 3
    patch_size: int = 4

    def __post_init__(self):
        if len(self.stage_depths) != 4 or len(self.stage_channels) != 4 or len(self.heads) != 4:
            raise ValueError("backbone uses exactly four stages")
        for s in range(1, 4):
            if self.stage_channels[s] != 2 * self.stage_channels[s - 1]:
                raise ValueError("channels must double at every stage boundary")
        for c, h in zip(self.stage_channels, self.heads):
            if c % h:
                raise ValueError(f"heads {h} must divide channels {c}")
        if self.window < 1 or self.window & (self.window - 1):
            raise ValueError(f"window side must be a power of two, got {self.window}")

    def stage_window(self, side: int) -> int:
        # late stages can shrink below the configured window; clamp so the
        # side stays divisible and the side/window quotient a power of two
        return min(self.window, side)

    @property
    def feature_dim(self) -> int:
        return self.stage_channels[-1]


@dataclass
class RelPosTable:
    """Learned attention bias indexed by (row, col) token offset."""

    table: Array  # [(2b-1)^2, heads]
    window: int

    def bias(self) -> Array:
        """Dense [heads, T, T] bias for window-token attention."""
        t = self.window * self.window
        heads = self.table.shape[1]
        idx = _rel_pos_index(self.window)
        b = ac.take(self.table, idx)  # [T*T, heads]
        b = ac.reshape(b, (t, t, heads))
        return ac.transpose(b, (2, 0, 1))


@lru_cache(maxsize=None)
def _rel_pos_index(window: int) -> tuple:
    """Flat lookup indices mapping token-pair offsets into the bias table."""
    coords = np.stack(np.meshgrid(np.arange(window), np.arange(window), indexing="ij"), axis=0)
    flat = coords.reshape(2, -1)  # [2, T]
    rel = flat[:, :, None] - flat[:, None, :]  # offsets in [-(w-1), w-1]
    idx = (rel[0] + window - 1) * (2 * window - 1) + (rel[1] + window - 1)
    return tuple(idx.reshape(-1).tolist())


def window_partition(x: Array, window: int) -> Array:
    """Split a [C,H,W] map into [nW, window*window, C] row-major token groups."""
    c, h, w = x.shape
    if h % window or w % window:
        raise ValueError(f"feature map {h}x{w} is not divisible by window {window}")
    cl = _to_cl(x)  # [H,W,C]
    t = ac.reshape(cl, (h // window, window, w // window, window, c))
    t = ac.transpose(t, (0, 2, 1, 3, 4))
    return ac.reshape(t, ((h // window) * (w // window), window * window, c))


def window_merge(windows: Array, c: int, h: int, w: int) -> Array:
    """Inverse of :func:`window_partition`."""
    nw, t, cw = windows.shape
    window = int(round(t**0.5))
    if window * window != t or cw != c or nw != (h // window) * (w // window):
        raise ValueError(f"window tensor {windows.shape} does not tile a {c}x{h}x{w} map")
    x = ac.reshape(windows, (h // window, w // window, window, window, c))
    x = ac.transpose(x, (0, 2, 1, 3, 4))
    return _to_cf(ac.reshape(x, (h, w, c)))


def _partition_batched(x_cl: Array, window: int) -> Array:
    """[N,H,W,C] -> [nW*N, T, C], window-major so global tokens can repeat."""
    n, h, w, c = x_cl.shape
    t = ac.reshape(x_cl, (n, h // window, window, w // window, window, c))
    t = ac.transpose(t, (1, 3, 0, 2, 4, 5))
    return ac.reshape(t, ((h // window) * (w // window) * n, window * window, c))


def _merge_batched(wins: Array, n: int, h: int, w: int, c: int, window: int) -> Array:
    t = ac.reshape(wins, (h // window, w // window, n, window, window, c))
    t = ac.transpose(t, (2, 0, 3, 1, 4, 5))
    return ac.reshape(t, (n, h, w, c))


def _attention_core(q: Array, k: Array, v: Array, bias, num_heads: int, scale=None) -> Array:
    """Multi-head scaled dot-product attention over [B,T,C] token stacks."""
    b, tq, c = q.shape
    tk = k.shape[1]
    if tk == 0:
        raise ValueError("attention requires at least one key/value token")
    if c % num_heads:
        raise ValueError(f"channels {c} not divisible into {num_heads} heads")
    hd = c // num_heads
    if scale is None:
        scale = float(hd)
    if scale <= 0:
        raise ValueError(f"attention scale must be positive, got {scale}")

    def split(x, t):
        return ac.transpose(ac.reshape(x, (b, t, num_heads, hd)), (0, 2, 1, 3))

    qh, kh, vh = split(q, tq), split(k, tk), split(v, tk)
    logits = ac.matmul(qh, ac.transpose(kh, (0, 1, 3, 2))) / float(scale) ** 0.5
    if bias is not None:
        logits = logits + bias
    attn = ac.softmax(logits, axis=-1)
    out = ac.matmul(attn, vh)  # [B, heads, Tq, hd]
    return ac.reshape(ac.transpose(out, (0, 2, 1, 3)), (b, tq, c))


def _as_token_stack(x: Array) -> tuple[Array, bool]:
    if x.ndim == 2:
        return ac.reshape(x, (1,) + tuple(x.shape)), True
    return x, False


def global_attention(g_q: Array, k: Array, v: Array, p, num_heads: int = 1, scale=None, out_w=None, out_b=None) -> Array:
    """Attention with externally supplied query tokens and window keys/values."""
    q3, squeeze = _as_token_stack(g_q)
    k3, _ = _as_token_stack(k)
    v3, _ = _as_token_stack(v)
    bias = None
    if p is not None:
        bias = ac.repeat_leading(p.bias() if isinstance(p, RelPosTable) else p, q3.shape[0])
    out = _attention_core(q3, k3, v3, bias, num_heads, scale)
    if out_w is not None:
        out = ac.linear(out, out_w, out_b)
    return ac.reshape(out, tuple(out.shape[1:])) if squeeze else out


def local_attention(tokens: Array, params: dict, p, num_heads: int = 1, scale=None) -> Array:
    """Windowed self-attention: queries from the window's own tokens."""
    t3, squeeze = _as_token_stack(tokens)
    q = ac.linear(t3, params["q.w"], params["q.b"])
    k = ac.linear(t3, params["k.w"], params["k.b"])
    v = ac.linear(t3, params["v.w"], params["v.b"])
    bias = None
    if p is not None:
        bias = ac.repeat_leading(p.bias() if isinstance(p, RelPosTable) else p, t3.shape[0])
    out = _attention_core(q, k, v, bias, num_heads, scale)
    out = ac.linear(out, params["out.w"], params["out.b"])
    return ac.reshape(out, tuple(out.shape[1:])) if squeeze else out


def global_token_generator(stage_input: Array, window: int, params: dict) -> Array:
    """Distill a stage's map into window-sized query tokens.

    Applies log2(side/window) downsample units (depthwise 3x3 stride-2,
    GELU, pointwise mix), then flattens the window-sized map to tokens.
    Accepts [C,H,W] or [N,C,H,W]; returns [T,C] or [N,T,C].
    """
    squeeze = stage_input.ndim == 3
    x = ac.reshape(stage_input, (1,) + tuple(stage_input.shape)) if squeeze else stage_input
    n, c, h, w = x.shape
    if h != w:
        raise ValueError(f"global token generator needs a square map, got {h}x{w}")
    ratio = h // window
    if ratio * window != h or ratio & (ratio - 1):
        raise ValueError(f"side {h} over window {window} must be a power of two")
    units = int(ratio).bit_length() - 1
    for u in range(units):
        x = ac.conv2d(x, params[f"{u}.dw"], stride=2, padding=1, groups=c)
        x = ac.gelu(x)
        x = _to_cf(ac.linear(_to_cl(x), params[f"{u}.pw.w"], params[f"{u}.pw.b"]))
    tokens = ac.reshape(_to_cl(x), (n, window * window, c))
    return ac.reshape(tokens, (window * window, c)) if squeeze else tokens


def _mlp(tokens: Array, params: dict) -> Array:
    h = ac.linear(tokens, params["fc1.w"], params["fc1.b"])
    return ac.linear(ac.gelu(h), params["fc2.w"], params["fc2.b"])


def _attn_block(x_cl: Array, params: dict, window: int, num_heads: int, global_tokens=None) -> Array:
    """Pre-norm attention + pre-norm MLP, both residual, on a [N,H,W,C] map."""
    n, h, w, c = x_cl.shape
    nw = (h // window) * (w // window)
    normed = ac.layer_norm(x_cl, params["norm1.gamma"], params["norm1.beta"])
    win = _partition_batched(normed, window)  # [nW*N, T, C]
    if global_tokens is None:
        q = ac.linear(win, params["q.w"], params["q.b"])
    else:
        gq = ac.linear(global_tokens, params["q.w"], params["q.b"])  # [N, T, C]
        q = ac.reshape(ac.repeat_leading(gq, nw), (nw * n, window * window, c))
    k = ac.linear(win, params["k.w"], params["k.b"])
    v = ac.linear(win, params["v.w"], params["v.b"])
    rel = RelPosTable(params["relpos"], window)
    bias = ac.repeat_leading(rel.bias(), nw * n)
    att = _attention_core(q, k, v, bias, num_heads)
    att = ac.linear(att, params["out.w"], params["out.b"])
    x_cl = x_cl + _merge_batched(att, n, h, w, c, window)
    normed2 = ac.layer_norm(x_cl, params["norm2.gamma"], params["norm2.beta"])
    mlp_params = {k2[4:]: v2 for k2, v2 in params.items() if k2.startswith("mlp.")}
    return x_cl + _mlp(normed2, mlp_params)


def _nearest_valid_side(side: int, patch: int) -> int:
    target = max(1, round(np.log2(max(side // patch, 1))))
    return patch * (2**target)


def init_gcvit_params(cfg: GCViTConfig, seed: int, dtype=np.float32, side0: int = 16) -> ParamSet:
    """Parameters for one branch; ``side0`` is the post-stem square side."""
    rng = np.random.default_rng(seed)
    ps = ParamSet()
    ch = cfg.stage_channels

    ps.add("stem.conv", trunc_normal(rng, (ch[0], 3, cfg.patch_size, cfg.patch_size), dtype=dtype))
    ps.add("stem.norm.gamma", np.ones(ch[0], dtype=dtype))
    ps.add("stem.norm.beta", np.zeros(ch[0], dtype=dtype))

    side = side0
    for s, (depth, c, heads) in enumerate(zip(cfg.stage_depths, ch, cfg.heads)):
        if s > 0:
            ps.add(f"down.{s}.norm.gamma", np.ones(ch[s - 1], dtype=dtype))
            ps.add(f"down.{s}.norm.beta", np.zeros(ch[s - 1], dtype=dtype))
            ps.add(f"down.{s}.conv", trunc_normal(rng, (c, ch[s - 1], 2, 2), dtype=dtype))
            side //= 2
        w_eff = cfg.stage_window(side)
        units = int(side // w_eff).bit_length() - 1
        for u in range(units):
            ps.add(f"stages.{s}.gen.{u}.dw", trunc_normal(rng, (c, 1, 3, 3), dtype=dtype))
            ps.add(f"stages.{s}.gen.{u}.pw.w", trunc_normal(rng, (c, c), dtype=dtype))
            ps.add(f"stages.{s}.gen.{u}.pw.b", np.zeros(c, dtype=dtype))
        hidden = cfg.mlp_expansion * c
        table = (2 * w_eff - 1) ** 2
        for d in range(depth):
            for kind in ("local", "global"):
                p = f"stages.{s}.blocks.{d}.{kind}"
                for nm in ("norm1", "norm2"):
                    ps.add(f"{p}.{nm}.gamma", np.ones(c, dtype=dtype))
                    ps.add(f"{p}.{nm}.beta", np.zeros(c, dtype=dtype))
                for proj in ("q", "k", "v", "out"):
                    ps.add(f"{p}.{proj}.w", trunc_normal(rng, (c, c), dtype=dtype))
                    ps.add(f"{p}.{proj}.b", np.zeros(c, dtype=dtype))
                ps.add(f"{p}.relpos", np.zeros((table, heads), dtype=dtype))
                ps.add(f"{p}.mlp.fc1.w", trunc_normal(rng, (c, hidden), dtype=dtype))
                ps.add(f"{p}.mlp.fc1.b", np.zeros(hidden, dtype=dtype))
                ps.add(f"{p}.mlp.fc2.w", trunc_normal(rng, (hidden, c), dtype=dtype))
                ps.add(f"{p}.mlp.fc2.b", np.zeros(c, dtype=dtype))

    ps.add("head.norm.gamma", np.ones(ch[-1], dtype=dtype))
    ps.add("head.norm.beta", np.zeros(ch[-1], dtype=dtype))
    return ps


def gcvit_encode(image: Array, cfg: GCViTConfig, params: ParamSet) -> Array:
    """Pooled [F] features for a [3,H,W] image (or [N,F] for a batch).

    Square inputs pass straight through; 1:2 panoramas are width-pooled to
    square right after the stem so every stage stays window-aligned.
    """
    squeeze = image.ndim == 3
    x = ac.reshape(image, (1,) + tuple(image.shape)) if squeeze else image
    n, _, h, w = x.shape
    if w not in (h, 2 * h):
        raise ValueError(f"input must be square or 1:2 panorama, got {h}x{w}")
    side0 = h // cfg.patch_size
    if side0 * cfg.patch_size != h or side0 & (side0 - 1) or side0 < 8:
        good = _nearest_valid_side(h, cfg.patch_size)
        raise ValueError(
            f"input height {h} unsupported: height/patch must be a power of two >= 8; nearest valid is {good}"
        )

    x = ac.conv2d(x, params["stem.conv"], stride=cfg.patch_size)
    x = channel_layer_norm(x, params["stem.norm.gamma"], params["stem.norm.beta"])
    if w == 2 * h:  # average the doubled width down to square
        cl = _to_cl(x)
        nb, hh, ww, cc = cl.shape
        cl = ac.mean(ac.reshape(cl, (nb, hh, ww // 2, 2, cc)), axis=3)
        x = _to_cf(cl)

    side = side0
    for s, depth in enumerate(cfg.stage_depths):
        if s > 0:
            dp = params.view(f"down.{s}")
            x = channel_layer_norm(x, dp["norm.gamma"], dp["norm.beta"])
            x = ac.conv2d(x, dp["conv"], stride=2)
            side //= 2
        c = cfg.stage_channels[s]
        w_eff = cfg.stage_window(side)
        gen_params = {
            k2[4:]: v2 for k2, v2 in params.view(f"stages.{s}").items() if k2.startswith("gen.")
        }
        g_tokens = global_token_generator(x, w_eff, gen_params)
        cl = _to_cl(x)
        for d in range(depth):
            cl = _attn_block(cl, params.view(f"stages.{s}.blocks.{d}.local"), w_eff, cfg.heads[s])
            cl = _attn_block(
                cl, params.view(f"stages.{s}.blocks.{d}.global"), w_eff, cfg.heads[s], global_tokens=g_tokens
            )
        x = _to_cf(cl)

    feats = ac.global_avg_pool(x)
    feats = ac.layer_norm(feats, params["head.norm.gamma"], params["head.norm.beta"])
    return ac.reshape(feats, (cfg.feature_dim,)) if squeeze else feats


def init_dual_branch_params(cfg: GCViTConfig, seed: int, dtype=np.float32, side0: int = 16):
    """Two disjoint branch parameter sets plus the fusion head."""
    branch_s = init_gcvit_params(cfg, seed, dtype=dtype, side0=side0)
    branch_a = init_gcvit_params(cfg, seed + 1, dtype=dtype, side0=side0)
    rng = np.random.default_rng(seed + 2)
    head = ParamSet()
    head.add("head.w", trunc_normal(rng, (2 * cfg.feature_dim, cfg.num_classes), dtype=dtype))
    head.add("head.b", np.zeros(cfg.num_classes, dtype=dtype))
    return branch_s, branch_a, head


def dual_branch_logits(street: Array, sat: Array, cfg: GCViTConfig, branch_s: ParamSet, branch_a: ParamSet, head: ParamSet) -> Array:
    """Class logits from independently encoded views fused by one linear layer."""
    if branch_s.aliases(branch_a):
        raise ValueError("branch parameter sets share a tensor; views must use distinct encoders")
    f_s = gcvit_encode(street, cfg, branch_s)
    f_a = gcvit_encode(sat, cfg, branch_a)
    fused = ac.concat([f_s, f_a], axis=-1)
    return ac.linear(fused, head["head.w"], head["head.b"])


def dual_branch_classify(street: Array, sat: Array, cfg: GCViTConfig, branch_s: ParamSet, branch_a: ParamSet, head: ParamSet) -> Array:
    """Damage-level probabilities (rows sum to one)."""
    return ac.softmax(dual_branch_logits(street, sat, cfg, branch_s, branch_a, head), axis=-1)
