"""Primitive differentiable operations registered in the engine's op table.

Shapes follow numpy's row-major layout. Arithmetic broadcasts only a
scalar (size-1 array) against an array; anything wider must be expressed
through explicit ops (``linear``, ``repeat_leading``).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from .engine import Array, apply, as_array_like, defop

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


def _check_scalar_pair(x: np.ndarray, y: np.ndarray, op: str):
    if x.shape != y.shape and x.size != 1 and y.size != 1:
        raise ValueError(f"{op}: shapes {x.shape} and {y.shape} differ and neither is a scalar")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    return np.sum(g).reshape(shape) if np.prod(shape) == 1 else g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def _add_fwd(x, y):
    _check_scalar_pair(x, y, "add")
    return x + y


defop("add", _add_fwd, lambda g, out, ins, attrs: (_unbroadcast(g, ins[0].shape), _unbroadcast(g, ins[1].shape)))


def _sub_fwd(x, y):
    _check_scalar_pair(x, y, "sub")
    return x - y


defop("sub", _sub_fwd, lambda g, out, ins, attrs: (_unbroadcast(g, ins[0].shape), _unbroadcast(-g, ins[1].shape)))


def _mul_fwd(x, y):
    _check_scalar_pair(x, y, "mul")
    return x * y


defop(
    "mul",
    _mul_fwd,
    lambda g, out, ins, attrs: (
        _unbroadcast(g * ins[1], ins[0].shape),
        _unbroadcast(g * ins[0], ins[1].shape),
    ),
)


def _div_fwd(x, y):
    _check_scalar_pair(x, y, "div")
    return x / y


defop(
    "div",
    _div_fwd,
    lambda g, out, ins, attrs: (
        _unbroadcast(g / ins[1], ins[0].shape),
        _unbroadcast(-g * ins[0] / (ins[1] * ins[1]), ins[1].shape),
    ),
)

defop("neg", lambda x: -x, lambda g, out, ins, attrs: (-g,))
defop("exp", np.exp, lambda g, out, ins, attrs: (g * out,))
defop("log", np.log, lambda g, out, ins, attrs: (g / ins[0],))
defop("sqrt", np.sqrt, lambda g, out, ins, attrs: (g / (2.0 * out),))
# subgradient 0 at the corner: strict inequality
defop("relu", lambda x: np.maximum(x, 0), lambda g, out, ins, attrs: (g * (ins[0] > 0),))


def _gelu_fwd(x):
    # exact form x * Phi(x), not the tanh approximation
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def _gelu_vjp(g, out, ins, attrs):
    x = ins[0]
    phi = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    return (g * (cdf + x * phi),)


defop("gelu", _gelu_fwd, _gelu_vjp)


# ---------------------------------------------------------------------------
# shape manipulation


defop(
    "reshape",
    lambda x, shape: np.reshape(x, shape),
    lambda g, out, ins, attrs: (np.reshape(g, ins[0].shape),),
)


def _transpose_vjp(g, out, ins, attrs):
    inv = np.argsort(attrs["axes"])
    return (np.transpose(g, inv),)


defop("transpose", lambda x, axes: np.ascontiguousarray(np.transpose(x, axes)), _transpose_vjp)


def _concat_fwd(*xs, axis):
    return np.concatenate(xs, axis=axis)


def _concat_vjp(g, out, ins, attrs):
    axis = attrs["axis"]
    sizes = [x.shape[axis] for x in ins]
    return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))


defop("concat", _concat_fwd, _concat_vjp)


def _repeat_leading_fwd(x, n):
    return np.ascontiguousarray(np.broadcast_to(x, (n,) + x.shape))


defop("repeat_leading", _repeat_leading_fwd, lambda g, out, ins, attrs: (g.sum(axis=0),))


def _take_fwd(x, indices):
    return np.take(x, indices, axis=0)


def _take_vjp(g, out, ins, attrs):
    dx = np.zeros_like(ins[0])
    np.add.at(dx, attrs["indices"], g)
    return (dx,)


defop("take", _take_fwd, _take_vjp)


# ---------------------------------------------------------------------------
# reductions


def _sum_fwd(x, axis, keepdims):
    return np.sum(x, axis=axis, keepdims=keepdims)


def _expand_reduced(g, x_shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, x_shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    if not keepdims:
        for ax in sorted(ax % len(x_shape) for ax in axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, x_shape)


def _sum_vjp(g, out, ins, attrs):
    return (np.ascontiguousarray(_expand_reduced(g, ins[0].shape, attrs["axis"], attrs["keepdims"])),)


defop("sum", _sum_fwd, _sum_vjp)


def _mean_fwd(x, axis, keepdims):
    return np.mean(x, axis=axis, keepdims=keepdims)


def _mean_vjp(g, out, ins, attrs):
    x = ins[0]
    n = x.size if attrs["axis"] is None else np.prod(
        [x.shape[ax] for ax in ((attrs["axis"],) if isinstance(attrs["axis"], int) else attrs["axis"])]
    )
    scaled = g / np.asarray(n, dtype=x.dtype)
    return (np.ascontiguousarray(_expand_reduced(scaled, x.shape, attrs["axis"], attrs["keepdims"])),)


defop("mean", _mean_fwd, _mean_vjp)


# ---------------------------------------------------------------------------
# linear algebra


def _matmul_fwd(x, y):
    if x.ndim < 2 or y.ndim < 2:
        raise ValueError(f"matmul: operands must be at least 2-D, got {x.ndim}-D and {y.ndim}-D")
    if x.ndim != y.ndim or x.shape[:-2] != y.shape[:-2]:
        raise ValueError(f"matmul: leading dims {x.shape[:-2]} and {y.shape[:-2]} must match")
    if x.shape[-1] != y.shape[-2]:
        raise ValueError(f"matmul: inner axes {x.shape[-1]} and {y.shape[-2]} differ")
    return x @ y


def _matmul_vjp(g, out, ins, attrs):
    x, y = ins
    return (g @ np.swapaxes(y, -1, -2), np.swapaxes(x, -1, -2) @ g)


defop("matmul", _matmul_fwd, _matmul_vjp)


def _linear_fwd(x, w, b):
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"linear: input feature axis {x.shape[-1]} does not match weight rows {w.shape[0]}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"linear: bias shape {b.shape} does not match weight cols {w.shape[1]}")
    return x @ w + b


def _linear_vjp(g, out, ins, attrs):
    x, w, b = ins
    g2 = g.reshape(-1, g.shape[-1])
    x2 = x.reshape(-1, x.shape[-1])
    return (g @ w.T, x2.T @ g2, g2.sum(axis=0))


defop("linear", _linear_fwd, _linear_vjp)


# ---------------------------------------------------------------------------
# softmax family


def _softmax_fwd(x, axis):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _softmax_vjp(g, out, ins, attrs):
    axis = attrs["axis"]
    dot = np.sum(g * out, axis=axis, keepdims=True)
    return (out * (g - dot),)


defop("softmax", _softmax_fwd, _softmax_vjp)


def _log_softmax_fwd(x, axis):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def _log_softmax_vjp(g, out, ins, attrs):
    axis = attrs["axis"]
    return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)


defop("log_softmax", _log_softmax_fwd, _log_softmax_vjp)


# ---------------------------------------------------------------------------
# normalization


def _layer_norm_fwd(x, gamma, beta, eps):
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"layer_norm: affine shapes {gamma.shape}/{beta.shape} do not match channel axis {c}")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    xhat = xc / np.sqrt(var + eps)
    return gamma * xhat + beta


def _layer_norm_vjp(g, out, ins, attrs):
    x, gamma, beta = ins
    eps = attrs["eps"]
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    lead = tuple(range(x.ndim - 1))
    dgamma = np.sum(g * xhat, axis=lead)
    dbeta = np.sum(g, axis=lead)
    gh = g * gamma
    dx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * np.mean(gh * xhat, axis=-1, keepdims=True))
    return (dx, dgamma, dbeta)


defop("layer_norm", _layer_norm_fwd, _layer_norm_vjp)


def _l2_normalize_fwd(x, eps):
    n = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    return x / (n + eps)


def _l2_normalize_vjp(g, out, ins, attrs):
    x = ins[0]
    eps = attrs["eps"]
    n = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    denom = n + eps
    dot = np.sum(g * x, axis=-1, keepdims=True)
    safe_n = np.maximum(n, np.finfo(x.dtype).tiny)
    return (g / denom - x * dot / (safe_n * denom * denom),)


defop("l2_normalize", _l2_normalize_fwd, _l2_normalize_vjp)


# ---------------------------------------------------------------------------
# convolution and pooling


def _conv_geometry(h, w, kh, kw, stride, padding):
    if h + 2 * padding < kh:
        raise ValueError(f"conv2d: padded height {h + 2 * padding} is smaller than kernel height {kh}")
    if w + 2 * padding < kw:
        raise ValueError(f"conv2d: padded width {w + 2 * padding} is smaller than kernel width {kw}")
    return (h + 2 * padding - kh) // stride + 1, (w + 2 * padding - kw) // stride + 1


def _conv2d_fwd(x, k, stride, padding, groups):
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.ndim != 4:
        raise ValueError(f"conv2d: expected [C,H,W] or [N,C,H,W] input, got {x.ndim}-D")
    n, c_in, h, w = x.shape
    c_out, cg, kh, kw = k.shape
    if c_in % groups or c_out % groups:
        raise ValueError(f"conv2d: channel axes ({c_in} in, {c_out} out) must divide groups={groups}")
    if cg != c_in // groups:
        raise ValueError(f"conv2d: kernel input axis {cg} does not equal C_in/groups = {c_in // groups}")
    oh, ow = _conv_geometry(h, w, kh, kw, stride, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]  # [N,C,oh,ow,kh,kw]
    if groups == 1:
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c_in * kh * kw)
        out = cols @ k.reshape(c_out, -1).T
        out = out.reshape(n, oh, ow, c_out).transpose(0, 3, 1, 2)
    elif groups == c_in and c_out == c_in:
        out = np.einsum("nchwij,cij->nchw", win, k[:, 0], optimize=True)
    else:
        out = np.empty((n, c_out, oh, ow), dtype=x.dtype)
        cs, os_ = c_in // groups, c_out // groups
        for gi in range(groups):
            sub = win[:, gi * cs : (gi + 1) * cs].transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, cs * kh * kw)
            res = sub @ k[gi * os_ : (gi + 1) * os_].reshape(os_, -1).T
            out[:, gi * os_ : (gi + 1) * os_] = res.reshape(n, oh, ow, os_).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    return out[0] if squeeze else out


def _scatter_cols(dcols, x_shape, kh, kw, stride, padding):
    """Inverse of the sliding-window gather: accumulate [N,oh,ow,C,kh,kw] into [N,C,H,W]."""
    n, c, h, w = x_shape
    oh, ow = dcols.shape[1], dcols.shape[2]
    dxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=dcols.dtype)
    piece = dcols.transpose(4, 5, 0, 3, 1, 2)  # [kh,kw,N,C,oh,ow]
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride] += piece[i, j]
    if padding:
        return dxp[:, :, padding : h + padding, padding : w + padding]
    return dxp


def _conv2d_vjp(g, out, ins, attrs):
    x, k = ins
    stride, padding, groups = attrs["stride"], attrs["padding"], attrs["groups"]
    squeeze = x.ndim == 3
    xb = x[None] if squeeze else x
    gb = g[None] if squeeze else g
    n, c_in, h, w = xb.shape
    c_out, cg, kh, kw = k.shape
    oh, ow = gb.shape[2], gb.shape[3]
    xp = np.pad(xb, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xb
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]

    if groups == 1:
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c_in * kh * kw)
        g2 = gb.transpose(0, 2, 3, 1).reshape(n * oh * ow, c_out)
        dk = (g2.T @ cols).reshape(k.shape)
        dcols = (g2 @ k.reshape(c_out, -1)).reshape(n, oh, ow, c_in, kh, kw)
        dx = _scatter_cols(dcols, xb.shape, kh, kw, stride, padding)
    elif groups == c_in and c_out == c_in:
        dk = np.einsum("nchwij,nchw->cij", win, gb, optimize=True)[:, None]
        dxp = np.zeros((n, c_in, h + 2 * padding, w + 2 * padding), dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride] += (
                    gb * k[:, 0, i, j][None, :, None, None]
                )
        dx = dxp[:, :, padding : h + padding, padding : w + padding] if padding else dxp
    else:
        dk = np.empty_like(k)
        dx = np.zeros_like(xb)
        cs, os_ = c_in // groups, c_out // groups
        for gi in range(groups):
            sub = win[:, gi * cs : (gi + 1) * cs].transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, cs * kh * kw)
            g2 = gb[:, gi * os_ : (gi + 1) * os_].transpose(0, 2, 3, 1).reshape(n * oh * ow, os_)
            dk[gi * os_ : (gi + 1) * os_] = (g2.T @ sub).reshape(os_, cs, kh, kw)
            dcols = (g2 @ k[gi * os_ : (gi + 1) * os_].reshape(os_, -1)).reshape(n, oh, ow, cs, kh, kw)
            dx[:, gi * cs : (gi + 1) * cs] = _scatter_cols(
                dcols, (n, cs, h, w), kh, kw, stride, padding
            )
    if squeeze:
        dx = dx[0]
    return (dx, dk)


defop("conv2d", _conv2d_fwd, _conv2d_vjp)


def _gap_fwd(x):
    if x.ndim < 3:
        raise ValueError(f"global_avg_pool: expected [...,C,H,W], got {x.ndim}-D")
    return np.mean(x, axis=(-2, -1))


def _gap_vjp(g, out, ins, attrs):
    x = ins[0]
    h, w = x.shape[-2], x.shape[-1]
    return (np.ascontiguousarray(np.broadcast_to((g / (h * w))[..., None, None], x.shape)),)


defop("global_avg_pool", _gap_fwd, _gap_vjp)


# ---------------------------------------------------------------------------
# public wrappers


def add(x, y):
    return apply("add", x, y)


def sub(x, y):
    return apply("sub", x, y)


def mul(x, y):
    return apply("mul", x, y)


def div(x, y):
    return apply("div", x, y)


def neg(x):
    return apply("neg", x)


def exp(x):
    return apply("exp", x)


def log(x):
    return apply("log", x)


def sqrt(x):
    return apply("sqrt", x)


def relu(x):
    return apply("relu", x)


def gelu(x):
    return apply("gelu", x)


def reshape(x, shape):
    return apply("reshape", x, shape=tuple(shape))


def transpose(x, axes):
    return apply("transpose", x, axes=tuple(axes))


def concat(xs, axis=0):
    return apply("concat", *xs, axis=axis)


def repeat_leading(x, n):
    return apply("repeat_leading", x, n=int(n))


def take(x, indices):
    return apply("take", x, indices=np.asarray(indices, dtype=np.int64))


def sum_(x, axis=None, keepdims=False):
    return apply("sum", x, axis=axis, keepdims=keepdims)


def mean(x, axis=None, keepdims=False):
    return apply("mean", x, axis=axis, keepdims=keepdims)


def matmul(x, y):
    return apply("matmul", x, y)


def linear(x, w, b):
    return apply("linear", x, w, b)


def softmax(x, axis=-1):
    return apply("softmax", x, axis=axis)


def log_softmax(x, axis=-1):
    return apply("log_softmax", x, axis=axis)


def layer_norm(x, gamma, beta, eps=1e-6):
    return apply("layer_norm", x, gamma, beta, eps=float(eps))


def l2_normalize(x, eps=1e-12):
    return apply("l2_normalize", x, eps=float(eps))


def conv2d(x, kernel, stride=1, padding=0, groups=1):
    return apply("conv2d", x, kernel, stride=int(stride), padding=int(padding), groups=int(groups))


def global_avg_pool(x):
    return apply("global_avg_pool", x)
