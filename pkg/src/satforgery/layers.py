"""Differentiable layer primitives on (N, H, W, C) numpy arrays.

All forward ops take and return plain ndarrays. Gradients are computed by
explicit backward functions (no autodiff graph). Convolutions use "same"
zero padding: a stride-s layer maps spatial dimension d to ceil(d / s),
with the extra padding row/column on the bottom/right when asymmetric.
"""

from dataclasses import dataclass

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

try:  # optional compiled loops for the window copy/scatter hot spots
    if os.environ.get("SATFORGERY_NO_NUMBA"):
        raise ImportError
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

if njit is not None:
    @njit(cache=True)
    def _im2col_kernel(xp, cols, s):
        n, oh, ow, kh, kw, c = cols.shape
        for b in range(n):
            for i in range(oh):
                for j in range(ow):
                    for u in range(kh):
                        for v in range(kw):
                            for ch in range(c):
                                cols[b, i, j, u, v, ch] = xp[b, i * s + u, j * s + v, ch]

    @njit(cache=True)
    def _bn_stats_kernel(x2, mean, var):
        m, c = x2.shape
        for ch in range(c):
            mean[ch] = 0.0
            var[ch] = 0.0
        for i in range(m):
            for ch in range(c):
                mean[ch] += x2[i, ch]
        for ch in range(c):
            mean[ch] /= m
        for i in range(m):
            for ch in range(c):
                d = x2[i, ch] - mean[ch]
                var[ch] += d * d
        for ch in range(c):
            var[ch] /= m

    @njit(cache=True)
    def _bn_apply_kernel(x2, mean, inv, scale, shift, out2):
        m, c = x2.shape
        for i in range(m):
            for ch in range(c):
                out2[i, ch] = scale[ch] * (x2[i, ch] - mean[ch]) * inv[ch] + shift[ch]

    @njit(cache=True)
    def _bn_grad_sums_kernel(x2, up2, mean, inv, gscale, gshift):
        m, c = x2.shape
        for ch in range(c):
            gscale[ch] = 0.0
            gshift[ch] = 0.0
        for i in range(m):
            for ch in range(c):
                gscale[ch] += up2[i, ch] * (x2[i, ch] - mean[ch]) * inv[ch]
                gshift[ch] += up2[i, ch]

    @njit(cache=True)
    def _bn_grad_input_kernel(x2, up2, mean, inv, coef, up_mean, upxhat_mean, gx2):
        # gx = scale*inv * (up - mean(up) - xhat * mean(up*xhat))
        m, c = x2.shape
        for i in range(m):
            for ch in range(c):
                xhat = (x2[i, ch] - mean[ch]) * inv[ch]
                gx2[i, ch] = coef[ch] * (up2[i, ch] - up_mean[ch] - xhat * upxhat_mean[ch])

    @njit(cache=True)
    def _col2im_kernel(gcols, gxp, s):
        n, oh, ow, kh, kw, c = gcols.shape
        for b in range(n):
            for i in range(oh):
                for j in range(ow):
                    for u in range(kh):
                        for v in range(kw):
                            for ch in range(c):
                                gxp[b, i * s + u, j * s + v, ch] += gcols[b, i, j, u, v, ch]


class ShapeError(ValueError):
    """Raised when tensor dimensions do not match a layer's parameters."""


@dataclass
class ConvParams:
    filters: np.ndarray  # (kh, kw, in_channels, out_channels)
    bias: np.ndarray     # (out_channels,)
    stride: int = 1

    def __post_init__(self):
        if self.filters.ndim != 4:
            raise ShapeError(f"filters must be rank 4, got {self.filters.shape}")
        if self.stride < 1:
            raise ValueError(f"stride must be positive, got {self.stride}")
        if self.bias.shape != (self.filters.shape[3],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match "
                f"{self.filters.shape[3]} output channels")


@dataclass
class BatchNormParams:
    scale: np.ndarray          # (C,)
    shift: np.ndarray          # (C,)
    running_mean: np.ndarray   # (C,)
    running_var: np.ndarray    # (C,)
    momentum: float = 0.99
    epsilon: float = 1e-3
    mode: str = "train"        # "train" or "eval"


def _check_tensor4(x, name="input"):
    if x.ndim != 4:
        raise ShapeError(f"{name} must be rank 4 (N, H, W, C), got {x.shape}")


def _same_pad(dim, k, s):
    """Output size and (before, after) zero padding for one spatial axis."""
    out = -(-dim // s)
    pad = max((out - 1) * s + k - dim, 0)
    return out, pad // 2, pad - pad // 2


def conv_output_shape(in_shape, params):
    n, h, w, c = in_shape
    kh, kw, cin, cout = params.filters.shape
    s = params.stride
    return (n, -(-h // s), -(-w // s), cout)


def _im2col(x, kh, kw, s):
    """Extract strided (kh, kw) windows.

    Returns (cols, padded_shape, pads) where cols has shape
    (N, OH, OW, kh, kw, C) and is a copy safe to reshape.
    """
    n, h, w, c = x.shape
    oh, pt, pb = _same_pad(h, kh, s)
    ow, pl, pr = _same_pad(w, kw, s)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    if njit is not None:
        cols = np.empty((n, oh, ow, kh, kw, c), dtype=xp.dtype)
        _im2col_kernel(xp, cols, s)
    else:
        win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (N, H', W', C, kh, kw)
        win = win[:, ::s, ::s]
        cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3))
    return cols, xp.shape, (pt, pl)


def _col2im(gcols, padded_shape, pads, in_shape, s):
    """Adjoint of _im2col: scatter-add window gradients back to the input."""
    n, h, w, c = in_shape
    _, oh, ow, kh, kw, _ = gcols.shape
    pt, pl = pads
    gxp = np.zeros(padded_shape, dtype=gcols.dtype)
    if njit is not None:
        _col2im_kernel(gcols, gxp, s)
    else:
        for i in range(kh):
            for j in range(kw):
                gxp[:, i:i + s * oh:s, j:j + s * ow:s, :] += gcols[:, :, :, i, j, :]
    return gxp[:, pt:pt + h, pl:pl + w, :]


def conv2d(x, params):
    """Same-padded strided 2-D convolution (cross-correlation)."""
    _check_tensor4(x)
    kh, kw, cin, cout = params.filters.shape
    if x.shape[3] != cin:
        raise ShapeError(f"input has {x.shape[3]} channels, filters expect {cin}")
    s = params.stride
    cols, _, _ = _im2col(x, kh, kw, s)
    n, oh, ow = cols.shape[:3]
    flat = cols.reshape(n * oh * ow, kh * kw * cin)
    out = flat @ params.filters.reshape(kh * kw * cin, cout)
    out += params.bias
    return out.reshape(n, oh, ow, cout)


def conv2d_grad(x, params, upstream, need_input=True, need_filters=True):
    """Gradients of conv2d w.r.t. input, filters and bias.

    Setting need_input/need_filters to False skips the corresponding
    computation and returns None in its place.
    """
    _check_tensor4(x)
    _check_tensor4(upstream, "upstream")
    kh, kw, cin, cout = params.filters.shape
    s = params.stride
    expected = conv_output_shape(x.shape, params)
    if upstream.shape != expected:
        raise ShapeError(f"upstream shape {upstream.shape}, expected {expected}")
    n, oh, ow = upstream.shape[:3]
    up_flat = upstream.reshape(n * oh * ow, cout)
    grad_filters = None
    if need_filters:
        cols, _, _ = _im2col(x, kh, kw, s)
        flat = cols.reshape(n * oh * ow, kh * kw * cin)
        grad_filters = (flat.T @ up_flat).reshape(kh, kw, cin, cout)
    grad_bias = upstream.sum(axis=(0, 1, 2))
    grad_input = None
    if need_input:
        _, pt, pb = _same_pad(x.shape[1], kh, s)
        _, pl, pr = _same_pad(x.shape[2], kw, s)
        padded_shape = (n, x.shape[1] + pt + pb, x.shape[2] + pl + pr, cin)
        gcols = (up_flat @ params.filters.reshape(kh * kw * cin, cout).T)
        gcols = gcols.reshape(n, oh, ow, kh, kw, cin)
        grad_input = _col2im(gcols, padded_shape, (pt, pl), x.shape, s)
    return grad_input, grad_filters, grad_bias


def _adjoint_apply(y, filters, out_shape, s):
    """Apply the adjoint of conv2d(., filters) to y, producing out_shape."""
    kh, kw, cin, cout = filters.shape
    n, oh, ow, _ = y.shape
    _, pt, pb = _same_pad(out_shape[1], kh, s)
    _, pl, pr = _same_pad(out_shape[2], kw, s)
    hp = out_shape[1] + pt + pb
    wp = out_shape[2] + pl + pr
    gcols = (y.reshape(n * oh * ow, cout) @ filters.reshape(kh * kw * cin, cout).T)
    gcols = gcols.reshape(n, oh, ow, kh, kw, cin)
    return _col2im(gcols, (n, hp, wp, cin), (pt, pl), out_shape, s)


def deconv2d(x, params):
    """Transposed convolution: maps (N, H, W, Cin) to (N, H*s, W*s, Cout).

    With zero bias and shared filter coefficients it is the exact adjoint
    of the matching same-padded conv2d.
    """
    _check_tensor4(x)
    kh, kw, cin, cout = params.filters.shape
    if x.shape[3] != cin:
        raise ShapeError(f"input has {x.shape[3]} channels, filters expect {cin}")
    s = params.stride
    n, h, w, _ = x.shape
    out_shape = (n, h * s, w * s, cout)
    fswap = params.filters.transpose(0, 1, 3, 2)  # conv filters (kh, kw, cout, cin)
    out = _adjoint_apply(x, fswap, out_shape, s)
    return out + params.bias


def deconv2d_grad(x, params, upstream, need_input=True, need_filters=True):
    """Gradients of deconv2d w.r.t. input, filters and bias.

    Setting need_input/need_filters to False skips the corresponding
    computation and returns None in its place.
    """
    _check_tensor4(x)
    _check_tensor4(upstream, "upstream")
    kh, kw, cin, cout = params.filters.shape
    s = params.stride
    n, h, w, _ = x.shape
    expected = (n, h * s, w * s, cout)
    if upstream.shape != expected:
        raise ShapeError(f"upstream shape {upstream.shape}, expected {expected}")
    fswap = params.filters.transpose(0, 1, 3, 2)
    # deconv2d is the adjoint of conv2d(., fswap): grad w.r.t. input is the
    # forward conv, grad w.r.t. filters is the conv filter gradient with the
    # roles of input/upstream exchanged.
    grad_input = None
    grad_filters = None
    if need_input or need_filters:
        cols, _, _ = _im2col(upstream, kh, kw, s)
        flat = cols.reshape(n * h * w, kh * kw * cout)
        if need_input:
            grad_input = flat @ fswap.reshape(kh * kw * cout, cin)
            grad_input = grad_input.reshape(n, h, w, cin)
        if need_filters:
            gf_swap = (flat.T @ x.reshape(n * h * w, cin)).reshape(kh, kw, cout, cin)
            grad_filters = gf_swap.transpose(0, 1, 3, 2)
    grad_bias = upstream.sum(axis=(0, 1, 2))
    return grad_input, grad_filters, grad_bias


def _channel_stats(x):
    """Per-channel mean and biased variance with 64-bit accumulation."""
    c = x.shape[3]
    if njit is not None and x.flags.c_contiguous:
        mean = np.empty(c, dtype=np.float64)
        var = np.empty(c, dtype=np.float64)
        _bn_stats_kernel(x.reshape(-1, c), mean, var)
        return mean, var
    return (x.mean(axis=(0, 1, 2), dtype=np.float64),
            x.var(axis=(0, 1, 2), dtype=np.float64))


def batchnorm(x, params, update_running=True):
    """Per-channel batch normalization.

    Train mode normalizes by batch statistics over (N, H, W) and updates
    the running averages; eval mode uses the stored running statistics.
    """
    _check_tensor4(x)
    c = params.scale.shape[0]
    if x.shape[3] != c:
        raise ShapeError(f"input has {x.shape[3]} channels, batchnorm expects {c}")
    if params.mode == "train":
        m = x.shape[0] * x.shape[1] * x.shape[2]
        if m < 2:
            raise ValueError("train-mode batchnorm needs at least 2 elements per channel")
        mean, var = _channel_stats(x)
        if update_running:
            mom = params.momentum
            params.running_mean[...] = mom * params.running_mean + (1 - mom) * mean
            params.running_var[...] = mom * params.running_var + (1 - mom) * var
    else:
        mean = np.asarray(params.running_mean, dtype=np.float64)
        var = np.asarray(params.running_var, dtype=np.float64)
    inv = 1.0 / np.sqrt(var + params.epsilon)
    mean_c = mean.astype(x.dtype)
    inv_c = inv.astype(x.dtype)
    scale_c = params.scale.astype(x.dtype, copy=False)
    shift_c = params.shift.astype(x.dtype, copy=False)
    if njit is not None and x.flags.c_contiguous:
        out = np.empty_like(x)
        _bn_apply_kernel(x.reshape(-1, c), mean_c, inv_c, scale_c, shift_c,
                         out.reshape(-1, c))
        return out
    return scale_c * (x - mean_c) * inv_c + shift_c


def batchnorm_grad(x, params, upstream):
    """Gradients of batchnorm w.r.t. input, scale and shift."""
    _check_tensor4(x)
    if upstream.shape != x.shape:
        raise ShapeError(f"upstream shape {upstream.shape} != input shape {x.shape}")
    c = params.scale.shape[0]
    if params.mode == "train":
        mean, var = _channel_stats(x)
    else:
        mean = np.asarray(params.running_mean, dtype=np.float64)
        var = np.asarray(params.running_var, dtype=np.float64)
    inv = 1.0 / np.sqrt(var + params.epsilon)
    mean_c = mean.astype(x.dtype)
    inv_c = inv.astype(x.dtype)
    scale_c = params.scale.astype(x.dtype, copy=False)
    fast = (njit is not None and x.flags.c_contiguous
            and upstream.flags.c_contiguous and upstream.dtype == x.dtype)
    if fast:
        gscale = np.empty(c, dtype=np.float64)
        gshift = np.empty(c, dtype=np.float64)
        _bn_grad_sums_kernel(x.reshape(-1, c), upstream.reshape(-1, c),
                             mean_c, inv_c, gscale, gshift)
    else:
        xhat = (x - mean_c) * inv_c
        gscale = (upstream * xhat).sum(axis=(0, 1, 2), dtype=np.float64)
        gshift = upstream.sum(axis=(0, 1, 2), dtype=np.float64)
    if params.mode == "train":
        m = x.shape[0] * x.shape[1] * x.shape[2]
        coef = (scale_c * inv_c).astype(x.dtype)
        up_mean = (gshift / m).astype(x.dtype)
        upxhat_mean = (gscale / m).astype(x.dtype)
        if fast:
            grad_input = np.empty_like(x)
            _bn_grad_input_kernel(x.reshape(-1, c), upstream.reshape(-1, c),
                                  mean_c, inv_c, coef, up_mean, upxhat_mean,
                                  grad_input.reshape(-1, c))
        else:
            xhat = (x - mean_c) * inv_c
            grad_input = coef * (upstream - up_mean - xhat * upxhat_mean)
    else:
        grad_input = upstream * (scale_c * inv_c)
    return grad_input, gscale.astype(x.dtype), gshift.astype(x.dtype)


ACTIVATIONS = ("linear", "relu", "leaky_relu", "tanh", "sigmoid")


def activation(x, kind, slope=None):
    """Elementwise activation. `slope` is only meaningful for leaky_relu."""
    if kind == "linear":
        return x
    if kind == "relu":
        return np.maximum(x, 0)
    if kind == "leaky_relu":
        if slope is None:
            raise ValueError("leaky_relu requires a slope")
        return np.where(x >= 0, x, slope * x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        # split by sign to stay overflow-free
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        e = np.exp(x[~pos])
        out[~pos] = e / (1.0 + e)
        return out
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(x, kind, upstream, slope=None):
    """Gradient of activation w.r.t. its input, given the pre-activation x."""
    if kind == "linear":
        return upstream
    if kind == "relu":
        return upstream * (x > 0)
    if kind == "leaky_relu":
        if slope is None:
            raise ValueError("leaky_relu requires a slope")
        return upstream * np.where(x >= 0, 1.0, slope)
    if kind == "tanh":
        t = np.tanh(x)
        return upstream * (1.0 - t * t)
    if kind == "sigmoid":
        s = activation(x, "sigmoid")
        return upstream * s * (1.0 - s)
    raise ValueError(f"unknown activation {kind!r}")


def max_pool(x, window, stride):
    """Per-window per-channel maximum over non-padded windows."""
    _check_tensor4(x)
    wh, ww = window
    n, h, w, c = x.shape
    if wh > h or ww > w:
        raise ShapeError(f"window {window} larger than input {(h, w)}")
    win = sliding_window_view(x, (wh, ww), axis=(1, 2))[:, ::stride, ::stride]
    return win.max(axis=(4, 5))


def dense(x, weights, bias):
    """Fully connected layer on (N, F) inputs."""
    if x.ndim != 2:
        raise ShapeError(f"dense input must be rank 2, got {x.shape}")
    if x.shape[1] != weights.shape[0]:
        raise ShapeError(f"input width {x.shape[1]} != weight rows {weights.shape[0]}")
    return x @ weights + bias


def dense_grad(x, weights, upstream):
    grad_input = upstream @ weights.T
    grad_weights = x.T @ upstream
    grad_bias = upstream.sum(axis=0)
    return grad_input, grad_weights, grad_bias
