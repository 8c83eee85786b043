"""Dense-tensor layer primitives: forward, backward, and SGD updates.

Everything operates on plain numpy arrays, float32 for training with a
float64 mode for finite-difference verification. Each layer instance caches
what its own backward pass needs; training is single-writer per model.
"""

import numpy as np

from densiprune import backend


class LayerParams:
    """Trainable state of one layer: weights, optional bias, grads, momentum."""

    def __init__(self, weights, bias=None):
        self.weights = weights
        self.bias = bias
        self.grad_weights = np.zeros_like(weights)
        self.grad_bias = None if bias is None else np.zeros_like(bias)
        self.vel_weights = np.zeros_like(weights)
        self.vel_bias = None if bias is None else np.zeros_like(bias)

    def num_params(self, include_bias=True):
        n = self.weights.size
        if include_bias and self.bias is not None:
            n += self.bias.size
        return n


def kaiming_uniform(rng, shape, fan_in, dtype):
    """ReLU-gain uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in))."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class ConvLayer:
    """2-D cross-correlation, NCHW, square kernel."""

    def __init__(self, in_channels, out_channels, kernel=3, stride=1, padding=1,
                 bias=True, rng=None, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        if rng is None:
            rng = np.random.default_rng(0)
        fan_in = in_channels * kernel * kernel
        w = kaiming_uniform(rng, (out_channels, in_channels, kernel, kernel), fan_in, dtype)
        b = np.zeros(out_channels, dtype=dtype) if bias else None
        self.params = LayerParams(w, b)
        self._cache = None

    def out_size(self, size):
        return backend.kernels.conv_out_size(size, self.kernel, self.stride, self.padding)

    def forward(self, x):
        if x.shape[1] != self.in_channels:
            raise ValueError(
                f"conv expects {self.in_channels} input channels, got {x.shape[1]}")
        b, _, h, w = x.shape
        oh, ow = self.out_size(h), self.out_size(w)
        if oh < 1 or ow < 1:
            raise ValueError(f"conv output collapsed to {oh}x{ow} from input {h}x{w}")
        cols = backend.kernels.im2col(np.ascontiguousarray(x), self.kernel, self.stride, self.padding)
        w_mat = self.params.weights.reshape(self.out_channels, -1)
        out = w_mat @ cols                       # (M, B*OH*OW)
        if self.params.bias is not None:
            out += self.params.bias[:, None]
        self._cache = (cols, x.shape)
        return np.ascontiguousarray(out.reshape(self.out_channels, b, oh, ow)
                                    .transpose(1, 0, 2, 3))

    def backward(self, dout):
        if self._cache is None:
            raise RuntimeError("conv backward called before forward")
        cols, in_shape = self._cache
        b, c, h, w = in_shape
        dout_mat = dout.transpose(1, 0, 2, 3).reshape(self.out_channels, -1)
        self.params.grad_weights += (dout_mat @ cols.T).reshape(self.params.weights.shape)
        if self.params.bias is not None:
            self.params.grad_bias += dout_mat.sum(axis=1)
        w_mat = self.params.weights.reshape(self.out_channels, -1)
        dcols = np.ascontiguousarray(w_mat.T @ dout_mat)
        return backend.kernels.col2im(dcols, b, c, h, w, self.kernel, self.stride, self.padding)


class ReLULayer:
    """max(0, x). Counts strictly-positive activations when asked.

    The count is exact integer bookkeeping: nonzero is #{x : x > 0}, no
    epsilon, so densities derived from it are exact ratios.
    """

    def __init__(self, measured=False):
        self.measured = measured
        self.last_nonzero = 0
        self.last_total = 0
        self._mask = None

    def forward(self, x, count=False):
        count = count and self.measured
        if count and x.ndim == 4:
            x = np.ascontiguousarray(x)
            out, nonzero, total = backend.kernels.relu_forward(x)
            self.last_nonzero, self.last_total = nonzero, total
        else:
            out = np.maximum(x, 0)
            if count:
                self.last_nonzero = int(np.count_nonzero(x > 0))
                self.last_total = x.size
        self._mask = x > 0
        return out

    def backward(self, dout):
        if self._mask is None:
            raise RuntimeError("relu backward called before forward")
        return dout * self._mask


def relu_forward(x):
    """Functional form: returns (output, nonzero_count, total_count)."""
    out = np.maximum(x, 0)
    return out, int(np.count_nonzero(x > 0)), int(x.size)


class MaxPoolLayer:
    """Max pooling; trailing rows/cols that do not fill a window are dropped.

    Gradient routes to the argmax position only; ties go to the first
    element in row-major window scan order.
    """

    def __init__(self, window, stride=None):
        if window < 1:
            raise ValueError(f"invalid pool window {window}")
        self.window = window
        self.stride = window if stride is None else stride
        self._cache = None

    def forward(self, x):
        x = np.ascontiguousarray(x)
        out, argmax = backend.kernels.maxpool_forward(x, self.window, self.stride)
        self._cache = (argmax, x.shape)
        return out

    def backward(self, dout):
        if self._cache is None:
            raise RuntimeError("maxpool backward called before forward")
        argmax, (b, c, h, w) = self._cache
        return backend.kernels.maxpool_backward(np.ascontiguousarray(dout), argmax, h, w)


class FCLayer:
    """Affine map on flattened input: (B, F) -> (B, C)."""

    def __init__(self, in_features, out_features, bias=True, rng=None, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            rng = np.random.default_rng(0)
        w = kaiming_uniform(rng, (out_features, in_features), in_features, dtype)
        b = np.zeros(out_features, dtype=dtype) if bias else None
        self.params = LayerParams(w, b)
        self._cache = None

    def forward(self, x):
        in_shape = x.shape
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.in_features:
            raise ValueError(
                f"fc expects {self.in_features} features, got {flat.shape[1]}")
        out = flat @ self.params.weights.T
        if self.params.bias is not None:
            out += self.params.bias
        self._cache = (flat, in_shape)
        return out

    def backward(self, dout):
        if self._cache is None:
            raise RuntimeError("fc backward called before forward")
        flat, in_shape = self._cache
        self.params.grad_weights += dout.T @ flat
        if self.params.bias is not None:
            self.params.grad_bias += dout.sum(axis=0)
        return (dout @ self.params.weights).reshape(in_shape)


def softmax_xent(logits, labels):
    """Mean cross-entropy over the batch and its gradient wrt logits.

    grad = (softmax - onehot) / B, which sums to zero across classes for
    every sample.
    """
    b = logits.shape[0]
    # Diverged logits (inf/nan) propagate into the loss where the training
    # loop detects them; suppress the intermediate numpy warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        probs = exp / exp.sum(axis=1, keepdims=True)
        log_probs = shifted - np.log(exp.sum(axis=1, keepdims=True))
        loss = -log_probs[np.arange(b), labels].mean()
    grad = probs.copy()
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return float(loss), grad.astype(logits.dtype)


class OptimizerConfig:
    """SGD hyperparameters with a multiplicative epoch-indexed lr schedule.

    schedule entries (epoch, multiplier) compound: from each listed epoch
    onward the learning rate is multiplied by that factor.
    """

    def __init__(self, learning_rate=0.01, momentum=0.9, weight_decay=5e-4,
                 schedule=()):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        schedule = tuple((int(e), float(m)) for e, m in schedule)
        epochs = [e for e, _ in schedule]
        if epochs != sorted(set(epochs)):
            raise ValueError("schedule epochs must be strictly increasing")
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.schedule = schedule

    def lr_at(self, epoch):
        lr = self.learning_rate
        for at_epoch, mult in self.schedule:
            if epoch >= at_epoch:
                lr *= mult
        return lr


def sgd_step(params_list, opt, epoch):
    """v <- momentum*v + grad + weight_decay*w; w <- w - lr(epoch)*v.

    Gradients are cleared after the update.
    """
    lr = opt.lr_at(epoch)
    for p in params_list:
        np.multiply(p.vel_weights, opt.momentum, out=p.vel_weights)
        p.vel_weights += p.grad_weights
        if opt.weight_decay:
            p.vel_weights += opt.weight_decay * p.weights
        p.weights -= lr * p.vel_weights
        p.grad_weights[...] = 0
        if p.bias is not None:
            np.multiply(p.vel_bias, opt.momentum, out=p.vel_bias)
            p.vel_bias += p.grad_bias
            if opt.weight_decay:
                p.vel_bias += opt.weight_decay * p.bias
            p.bias -= lr * p.vel_bias
            p.grad_bias[...] = 0
