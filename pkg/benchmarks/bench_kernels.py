"""Benchmark the compiled kernel backend against the pure-numpy fallback.

Times the raw data-movement kernels (im2col, col2im, maxpool), a single
convolution layer's forward+backward, and one full training step of the
vgg-lite network, under each available backend. The convolution GEMMs run
in BLAS either way, so the spread between columns is the cost of patch
gathering/scattering and pooling alone.

Usage:
    python benchmarks/bench_kernels.py [--repeat N] [--batch B] [--json]
"""

import argparse
import json
import time

import numpy as np

from densiprune import backend
from densiprune.arch import builtin_arch
from densiprune.layers import ConvLayer, OptimizerConfig, sgd_step, softmax_xent
from densiprune.network import instantiate


def timeit(fn, repeat):
    fn()  # warmup
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1000.0


def kernel_cases(batch):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((batch, 32, 28, 28)).astype(np.float32)
    kern = backend.kernels
    cols = kern.im2col(x, 3, 1, 1)
    grad = np.ascontiguousarray(rng.standard_normal(cols.shape).astype(np.float32))
    pooled, argmax = kern.maxpool_forward(x, 2, 2)
    dout = np.ascontiguousarray(rng.standard_normal(pooled.shape).astype(np.float32))
    return {
        "im2col 3x3 s1 p1": lambda: backend.kernels.im2col(x, 3, 1, 1),
        "col2im 3x3 s1 p1": lambda: backend.kernels.col2im(
            grad, batch, 32, 28, 28, 3, 1, 1),
        "maxpool 2x2 fwd": lambda: backend.kernels.maxpool_forward(x, 2, 2),
        "maxpool 2x2 bwd": lambda: backend.kernels.maxpool_backward(
            dout, argmax, 28, 28),
    }


def conv_layer_case(batch):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((batch, 32, 28, 28)).astype(np.float32)
    conv = ConvLayer(32, 32, kernel=3, stride=1, padding=1,
                     rng=np.random.default_rng(2))
    dout = rng.standard_normal((batch, 32, 28, 28)).astype(np.float32)

    def step():
        conv.forward(x)
        conv.backward(dout)
        conv.params.grad_weights[...] = 0
        conv.params.grad_bias[...] = 0

    return {"conv 32->32 28x28 fwd+bwd": step}


def training_step_case(batch):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((batch, 1, 28, 28)).astype(np.float32)
    labels = rng.integers(0, 10, size=batch)
    model = instantiate(builtin_arch("vgg-lite", (1, 28, 28), 10), seed=4)
    opt = OptimizerConfig(learning_rate=0.001)

    def step():
        logits = model.forward(x, count=True)
        _, dlogits = softmax_xent(logits, labels)
        model.backward(dlogits)
        sgd_step(model.param_layers(), opt, 0)

    return {"vgg-lite training step": step}


def available_backends():
    names = ["python"]
    try:
        backend.get_kernels("cython")
        names.append("cython")
    except ImportError:
        pass
    return names


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args()

    names = available_backends()
    results = {}
    for name in names:
        backend.set_backend(name)
        cases = {}
        cases.update(kernel_cases(args.batch))
        cases.update(conv_layer_case(args.batch))
        cases.update(training_step_case(args.batch))
        results[name] = {label: timeit(fn, args.repeat)
                         for label, fn in cases.items()}
    backend.set_backend("auto")

    if args.json:
        print(json.dumps(results, indent=2, sort_keys=True))
        return

    labels = list(next(iter(results.values())))
    width = max(len(label) for label in labels)
    header = f"{'case':<{width}}  " + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(f"batch={args.batch} repeat={args.repeat} (best-of, ms)")
    print(header)
    print("-" * len(header))
    for label in labels:
        row = f"{label:<{width}}  "
        row += "".join(f"{results[n][label]:>12.2f}" for n in names)
        if len(names) == 2:
            row += f"{results['python'][label] / results['cython'][label]:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
