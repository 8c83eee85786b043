"""Pure-numpy implementations of the hot data-movement kernels.

These mirror the compiled extension (densiprune.backend._kernels) exactly:
same signatures, same layouts, same scan orders. The matrix products that
dominate convolution cost happen in BLAS either way; what lives here is the
patch gathering/scattering and pooling index bookkeeping.

Layout contract shared by both backends:

  im2col   (B, C, H, W) -> (C*k*k, B*OH*OW); row index is the patch cell
           (c, ky, kx), column index is (b, oy, ox). Convolution is then a
           single (M, C*k*k) @ (C*k*k, B*OH*OW) product.
  col2im   inverse scatter-add of im2col
  maxpool_forward returns (out, argmax) where argmax holds the flat H*W
           plane index of the selected element (ties: first in row-major
           window scan order)
"""

import numpy as np

NAME = "python"


def conv_out_size(size, kernel, stride, pad):
    """Output length of a 1-D convolution/pooling sweep; 0 if degenerate."""
    span = size + 2 * pad - kernel
    if span < 0:
        return 0
    return span // stride + 1


def im2col(x, kernel, stride, pad):
    b, c, h, w = x.shape
    oh = conv_out_size(h, kernel, stride, pad)
    ow = conv_out_size(w, kernel, stride, pad)
    if oh < 1 or ow < 1:
        raise ValueError(f"degenerate output {oh}x{ow} for input {h}x{w}")
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    # One strided slice per kernel cell; cheap relative to the GEMM it feeds.
    cols = np.empty((c, kernel, kernel, b, oh, ow), dtype=x.dtype)
    for ky in range(kernel):
        y_end = ky + stride * oh
        for kx in range(kernel):
            x_end = kx + stride * ow
            cols[:, ky, kx] = x[:, :, ky:y_end:stride, kx:x_end:stride].transpose(1, 0, 2, 3)
    return cols.reshape(c * kernel * kernel, b * oh * ow)


def col2im(cols, b, c, h, w, kernel, stride, pad):
    oh = conv_out_size(h, kernel, stride, pad)
    ow = conv_out_size(w, kernel, stride, pad)
    grads = cols.reshape(c, kernel, kernel, b, oh, ow)
    padded = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ky in range(kernel):
        y_end = ky + stride * oh
        for kx in range(kernel):
            x_end = kx + stride * ow
            padded[:, :, ky:y_end:stride, kx:x_end:stride] += grads[:, ky, kx].transpose(1, 0, 2, 3)
    if pad:
        return np.ascontiguousarray(padded[:, :, pad:pad + h, pad:pad + w])
    return padded


def _pool_windows(x, window, stride):
    b, c, h, w = x.shape
    oh = conv_out_size(h, window, stride, 0)
    ow = conv_out_size(w, window, stride, 0)
    if oh < 1 or ow < 1:
        raise ValueError(f"pool window {window} too large for input {h}x{w}")
    sb, sc, sh, sw = x.strides
    views = np.lib.stride_tricks.as_strided(
        x, (b, c, oh, ow, window, window),
        (sb, sc, stride * sh, stride * sw, sh, sw))
    return views, oh, ow


def maxpool_forward(x, window, stride):
    b, c, h, w = x.shape
    views, oh, ow = _pool_windows(x, window, stride)
    flat = views.reshape(b, c, oh, ow, window * window)
    local = np.argmax(flat, axis=4)
    out = np.take_along_axis(flat, local[..., None], axis=4)[..., 0]
    dy, dx = np.divmod(local, window)
    oy = np.arange(oh, dtype=np.int64)[:, None] * stride
    ox = np.arange(ow, dtype=np.int64)[None, :] * stride
    argmax = (oy[None, None] + dy) * w + (ox[None, None] + dx)
    return np.ascontiguousarray(out), argmax.astype(np.int64)


def maxpool_backward(dout, argmax, h, w):
    b, c = dout.shape[:2]
    dx = np.zeros((b, c, h * w), dtype=dout.dtype)
    bi = np.arange(b)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]
    # Windows may overlap when stride < window, so scatter must accumulate.
    np.add.at(dx, (bi, ci, argmax), dout)
    return dx.reshape(b, c, h, w)


def relu_forward(x):
    out = np.maximum(x, 0)
    return out, int(np.count_nonzero(x > 0)), x.size
