"""Backend contract: the compiled and pure-numpy kernels are interchangeable."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densiprune.backend import BACKEND_NAME, get_kernels

PYTHON = get_kernels("python")
try:
    CYTHON = get_kernels("cython")
    BOTH = [PYTHON, CYTHON]
except ImportError:
    CYTHON = None
    BOTH = [PYTHON]

needs_cython = pytest.mark.skipif(CYTHON is None,
                                  reason="compiled extension not built")


def random_input(shape, dtype=np.float32, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape).astype(dtype)


CONV_CASES = [
    ((2, 3, 7, 6), 3, 1, 1),
    ((2, 3, 7, 6), 3, 2, 0),
    ((1, 1, 4, 4), 1, 1, 0),
    ((3, 2, 8, 8), 2, 2, 1),
    ((2, 4, 5, 5), 3, 2, 1),
    ((1, 2, 9, 9), 3, 3, 0),
]


@needs_cython
@pytest.mark.parametrize("shape,k,s,p", CONV_CASES)
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_im2col_backends_identical(shape, k, s, p, dtype):
    x = random_input(shape, dtype)
    assert np.array_equal(CYTHON.im2col(x, k, s, p), PYTHON.im2col(x, k, s, p))


@needs_cython
@pytest.mark.parametrize("shape,k,s,p", CONV_CASES)
def test_col2im_backends_agree(shape, k, s, p):
    b, c, h, w = shape
    cols_shape = PYTHON.im2col(random_input(shape), k, s, p).shape
    g = np.ascontiguousarray(random_input(cols_shape, seed=1))
    a = CYTHON.col2im(g, b, c, h, w, k, s, p)
    d = PYTHON.col2im(g, b, c, h, w, k, s, p)
    np.testing.assert_allclose(a, d, atol=1e-5)


@needs_cython
def test_maxpool_backends_identical():
    x = random_input((3, 4, 9, 7))
    for window, stride in [(2, 2), (3, 3), (2, 1), (3, 2)]:
        oa, ia = CYTHON.maxpool_forward(x, window, stride)
        ob, ib = PYTHON.maxpool_forward(x, window, stride)
        assert np.array_equal(oa, ob)
        assert np.array_equal(ia, ib)
        d = np.ascontiguousarray(random_input(oa.shape, seed=2))
        assert np.array_equal(CYTHON.maxpool_backward(d, ia, 9, 7),
                              PYTHON.maxpool_backward(d, ib, 9, 7))


@needs_cython
def test_relu_backends_identical():
    x = random_input((2, 3, 5, 5))
    oa, na, ta = CYTHON.relu_forward(x)
    ob, nb, tb = PYTHON.relu_forward(x)
    assert np.array_equal(oa, ob)
    assert (na, ta) == (nb, tb)


@pytest.mark.parametrize("kern", BOTH, ids=lambda k: k.NAME)
class TestKernelSemantics:
    def test_im2col_identity_kernel(self, kern):
        # 1x1 kernel, stride 1: cols is just channels-by-pixels.
        x = random_input((2, 3, 4, 4))
        cols = kern.im2col(x, 1, 1, 0)
        assert cols.shape == (3, 2 * 16)
        expected = x.transpose(1, 0, 2, 3).reshape(3, -1)
        assert np.array_equal(cols, expected)

    def test_im2col_matches_naive_gather(self, kern):
        x = random_input((2, 2, 5, 4), seed=5)
        k, s, p = 3, 2, 1
        cols = kern.im2col(x, k, s, p)
        b, c, h, w = x.shape
        oh = (h + 2 * p - k) // s + 1
        ow = (w + 2 * p - k) // s + 1
        for ci in range(c):
            for ky in range(k):
                for kx in range(k):
                    row = (ci * k + ky) * k + kx
                    for bi in range(b):
                        for oy in range(oh):
                            for ox in range(ow):
                                iy, ix = oy * s + ky - p, ox * s + kx - p
                                want = x[bi, ci, iy, ix] if 0 <= iy < h and 0 <= ix < w else 0.0
                                assert cols[row, (bi * oh + oy) * ow + ox] == want

    def test_col2im_adjoint_of_im2col(self, kern):
        # <im2col(x), g> == <x, col2im(g)> since scatter is the exact adjoint.
        x = random_input((2, 3, 6, 6), np.float64, seed=3)
        k, s, p = 3, 2, 1
        cols = kern.im2col(x, k, s, p)
        g = np.ascontiguousarray(random_input(cols.shape, np.float64, seed=4))
        lhs = float((cols * g).sum())
        rhs = float((x * kern.col2im(g, 2, 3, 6, 6, k, s, p)).sum())
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_maxpool_tie_takes_first_in_scan_order(self, kern):
        x = np.zeros((1, 1, 2, 2), dtype=np.float32)
        out, argmax = kern.maxpool_forward(x, 2, 2)
        assert out[0, 0, 0, 0] == 0.0
        assert argmax[0, 0, 0, 0] == 0

    def test_maxpool_basic(self, kern):
        x = np.array([[[[1, 2], [3, 4]]]], dtype=np.float32)
        out, argmax = kern.maxpool_forward(x, 2, 2)
        assert out[0, 0, 0, 0] == 4.0
        assert argmax[0, 0, 0, 0] == 3
        dout = np.ones((1, 1, 1, 1), dtype=np.float32)
        dx = kern.maxpool_backward(dout, argmax, 2, 2)
        assert np.array_equal(dx, [[[[0, 0], [0, 1]]]])

    def test_degenerate_shapes_rejected(self, kern):
        x = random_input((1, 1, 2, 2))
        with pytest.raises(ValueError):
            kern.im2col(x, 3, 1, 0)
        with pytest.raises(ValueError):
            kern.maxpool_forward(x, 3, 1)


@given(st.integers(1, 8), st.integers(1, 3), st.integers(1, 2), st.integers(0, 1))
@settings(max_examples=60, deadline=None)
def test_out_size_matches_scan(size, kernel, stride, pad):
    # conv_out_size equals the number of valid window start positions.
    count = 0
    pos = -pad
    while pos + kernel <= size + pad:
        count += 1
        pos += stride
    assert PYTHON.conv_out_size(size, kernel, stride, pad) == count


def test_selected_backend_is_exposed():
    assert BACKEND_NAME in ("python", "cython")


@needs_cython
def test_layers_follow_backend_switch():
    # Layer outputs must be equivalent whichever backend is active.
    from densiprune import backend
    from densiprune.layers import ConvLayer

    x = random_input((2, 3, 8, 8), seed=9)
    outputs = {}
    try:
        for name in ("python", "cython"):
            backend.set_backend(name)
            conv = ConvLayer(3, 4, kernel=3, padding=1,
                             rng=np.random.default_rng(1))
            outputs[name] = conv.forward(x)
    finally:
        backend.set_backend("auto")
    np.testing.assert_allclose(outputs["python"], outputs["cython"], atol=1e-6)
