# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled data-movement kernels for the training engine.

Same contract as the pure-numpy fallback (see _kernels_py): im2col/col2im
produce/consume (C*k*k, B*OH*OW) patch matrices, maxpool argmax holds flat
H*W plane indices with first-in-scan-order tie breaking. The convolution
GEMMs stay in BLAS; these loops only gather, scatter, and pool, with loop
order chosen so reads and writes both stream.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

NAME = "cython"

ctypedef fused floating:
    float
    double


cdef inline Py_ssize_t _out_size(Py_ssize_t size, Py_ssize_t kernel,
                                 Py_ssize_t stride, Py_ssize_t pad) noexcept nogil:
    # Number of valid window positions; 0 when the window does not fit.
    cdef Py_ssize_t n = size + 2 * pad - kernel
    if n < 0:
        return 0
    return n // stride + 1


def conv_out_size(Py_ssize_t size, Py_ssize_t kernel, Py_ssize_t stride, Py_ssize_t pad):
    return _out_size(size, kernel, stride, pad)


cdef inline Py_ssize_t _span_lo(Py_ssize_t offset, Py_ssize_t stride) noexcept nogil:
    # Smallest o >= 0 with o*stride + offset >= 0.
    cdef Py_ssize_t lo = 0
    while lo * stride + offset < 0:
        lo += 1
    return lo


cdef inline Py_ssize_t _span_hi(Py_ssize_t offset, Py_ssize_t stride,
                                Py_ssize_t limit, Py_ssize_t out_max) noexcept nogil:
    # Largest o <= out_max with o*stride + offset < limit.
    cdef Py_ssize_t hi = out_max
    while hi >= 0 and hi * stride + offset >= limit:
        hi -= 1
    return hi


def im2col(floating[:, :, :, ::1] x, Py_ssize_t kernel, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = _out_size(h, kernel, stride, pad)
    cdef Py_ssize_t ow = _out_size(w, kernel, stride, pad)
    if oh < 1 or ow < 1:
        raise ValueError(f"degenerate output {oh}x{ow} for input {h}x{w}")
    dtype = np.float32 if floating is float else np.float64
    out = np.zeros((c * kernel * kernel, b * oh * ow), dtype=dtype)
    cdef floating[:, ::1] cols = out
    cdef Py_ssize_t bi, ci, oy, ox, ky, kx, iy, row, col0, src0
    cdef Py_ssize_t oy_lo, oy_hi, ox_lo, ox_hi
    with nogil:
        for ci in range(c):
            for ky in range(kernel):
                oy_lo = _span_lo(ky - pad, stride)
                oy_hi = _span_hi(ky - pad, stride, h, oh - 1)
                for kx in range(kernel):
                    row = (ci * kernel + ky) * kernel + kx
                    ox_lo = _span_lo(kx - pad, stride)
                    ox_hi = _span_hi(kx - pad, stride, w, ow - 1)
                    for bi in range(b):
                        for oy in range(oy_lo, oy_hi + 1):
                            iy = oy * stride + ky - pad
                            col0 = (bi * oh + oy) * ow
                            src0 = kx - pad
                            for ox in range(ox_lo, ox_hi + 1):
                                cols[row, col0 + ox] = x[bi, ci, iy, src0 + ox * stride]
    return out


def col2im(floating[:, ::1] cols, Py_ssize_t b, Py_ssize_t c, Py_ssize_t h,
           Py_ssize_t w, Py_ssize_t kernel, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t oh = _out_size(h, kernel, stride, pad)
    cdef Py_ssize_t ow = _out_size(w, kernel, stride, pad)
    dtype = np.float32 if floating is float else np.float64
    out = np.zeros((b, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] dx = out
    cdef Py_ssize_t bi, ci, oy, ox, ky, kx, iy, row, col0, src0
    cdef Py_ssize_t oy_lo, oy_hi, ox_lo, ox_hi
    with nogil:
        for ci in range(c):
            for ky in range(kernel):
                oy_lo = _span_lo(ky - pad, stride)
                oy_hi = _span_hi(ky - pad, stride, h, oh - 1)
                for kx in range(kernel):
                    row = (ci * kernel + ky) * kernel + kx
                    ox_lo = _span_lo(kx - pad, stride)
                    ox_hi = _span_hi(kx - pad, stride, w, ow - 1)
                    for bi in range(b):
                        for oy in range(oy_lo, oy_hi + 1):
                            iy = oy * stride + ky - pad
                            col0 = (bi * oh + oy) * ow
                            src0 = kx - pad
                            for ox in range(ox_lo, ox_hi + 1):
                                dx[bi, ci, iy, src0 + ox * stride] += cols[row, col0 + ox]
    return out


def maxpool_forward(floating[:, :, :, ::1] x, Py_ssize_t window, Py_ssize_t stride):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = _out_size(h, window, stride, 0)
    cdef Py_ssize_t ow = _out_size(w, window, stride, 0)
    if oh < 1 or ow < 1:
        raise ValueError(f"pool window {window} too large for input {h}x{w}")
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.empty((b, c, oh, ow), dtype=dtype)
    idx_arr = np.empty((b, c, oh, ow), dtype=np.int64)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, :, ::1] argmax = idx_arr
    cdef Py_ssize_t bi, ci, oy, ox, dy, dx, iy, ix, best_idx
    cdef floating best
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        best = x[bi, ci, oy * stride, ox * stride]
                        best_idx = oy * stride * w + ox * stride
                        for dy in range(window):
                            iy = oy * stride + dy
                            for dx in range(window):
                                ix = ox * stride + dx
                                if x[bi, ci, iy, ix] > best:
                                    best = x[bi, ci, iy, ix]
                                    best_idx = iy * w + ix
                        out[bi, ci, oy, ox] = best
                        argmax[bi, ci, oy, ox] = best_idx
    return out_arr, idx_arr


def maxpool_backward(floating[:, :, :, ::1] dout, cnp.int64_t[:, :, :, ::1] argmax,
                     Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t b = dout.shape[0], c = dout.shape[1]
    cdef Py_ssize_t oh = dout.shape[2], ow = dout.shape[3]
    dtype = np.float32 if floating is float else np.float64
    out = np.zeros((b, c, h * w), dtype=dtype)
    cdef floating[:, :, ::1] dx = out
    cdef Py_ssize_t bi, ci, oy, ox
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        dx[bi, ci, argmax[bi, ci, oy, ox]] += dout[bi, ci, oy, ox]
    return out.reshape(b, c, h, w)


def relu_forward(floating[:, :, :, ::1] x):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.empty((b, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t bi, ci, iy, ix
    cdef long long nonzero = 0
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for iy in range(h):
                    for ix in range(w):
                        if x[bi, ci, iy, ix] > 0:
                            out[bi, ci, iy, ix] = x[bi, ci, iy, ix]
                            nonzero += 1
                        else:
                            out[bi, ci, iy, ix] = 0
    return out_arr, int(nonzero), b * c * h * w
