"""Instantiation of architecture specs into trainable models.

A Model is an ordered list of layer nodes wired per ArchSpec. Weights are
drawn from a single seeded generator in construction order, so identical
(arch, seed) pairs produce bitwise-identical parameters and nothing is ever
inherited from a previous network.
"""

import numpy as np

from densiprune.arch import propagate_shapes, residual_block_spec
from densiprune.layers import ConvLayer, FCLayer, MaxPoolLayer, ReLULayer


class ResidualBlockNode:
    """conv-relu-conv plus shortcut, summed before a final relu.

    The shortcut is the identity when shapes allow, otherwise a 1x1
    projection conv (stride-matched). Both inner relus are density
    measurement sites; the second sits after the addition.
    """

    def __init__(self, in_channels, block, rng, dtype):
        self.conv1 = ConvLayer(in_channels, block.conv1_channels, kernel=3,
                               stride=block.stride, padding=1, rng=rng, dtype=dtype)
        self.relu1 = ReLULayer(measured=True)
        self.conv2 = ConvLayer(block.conv1_channels, block.conv2_channels,
                               kernel=3, stride=1, padding=1, rng=rng, dtype=dtype)
        self.projection = None
        if block.projection:
            self.projection = ConvLayer(in_channels, block.conv2_channels,
                                        kernel=1, stride=block.stride, padding=0,
                                        rng=rng, dtype=dtype)
        self.relu2 = ReLULayer(measured=True)

    def forward(self, x, count=False):
        h = self.relu1.forward(self.conv1.forward(x), count=count)
        h = self.conv2.forward(h)
        shortcut = self.projection.forward(x) if self.projection is not None else x
        return self.relu2.forward(h + shortcut, count=count)

    def backward(self, dout):
        d = self.relu2.backward(dout)
        dx_main = self.conv1.backward(self.relu1.backward(self.conv2.backward(d)))
        dx_short = self.projection.backward(d) if self.projection is not None else d
        return dx_main + dx_short

    def param_layers(self):
        layers = [self.conv1.params, self.conv2.params]
        if self.projection is not None:
            layers.append(self.projection.params)
        return layers

    def measured_relus(self):
        return [self.relu1, self.relu2]


class Model:
    """Trainable network instantiated from an ArchSpec."""

    def __init__(self, arch, seed, dtype=np.float32):
        self.arch = arch
        self.seed = seed
        self.dtype = dtype
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        shapes = propagate_shapes(arch)
        self.nodes = []
        self._measured = []
        self._params = []
        for spec, (in_shape, _) in zip(arch.layers, shapes):
            in_c, in_h, in_w = in_shape
            if spec.kind == "conv":
                node = ConvLayer(in_c, spec.out_channels, kernel=spec.kernel,
                                 stride=spec.stride, padding=spec.padding,
                                 rng=rng, dtype=dtype)
                self._params.append(node.params)
            elif spec.kind == "relu":
                node = ReLULayer(measured=spec.measure_ae)
                if spec.measure_ae:
                    self._measured.append(node)
            elif spec.kind == "maxpool":
                node = MaxPoolLayer(spec.kernel, spec.stride)
            elif spec.kind == "fc":
                node = FCLayer(in_c * in_h * in_w, spec.out_channels,
                               rng=rng, dtype=dtype)
                self._params.append(node.params)
            else:
                block = residual_block_spec(in_c, spec)
                node = ResidualBlockNode(in_c, block, rng, dtype)
                self._params.extend(node.param_layers())
                self._measured.extend(node.measured_relus())
            self.nodes.append((spec.kind, node))

    def forward(self, x, count=False):
        """Full forward pass. With count=True, measured relus record their
        positive-activation counts for density accumulation."""
        out = x.astype(self.dtype, copy=False)
        for kind, node in self.nodes:
            if kind in ("relu", "residual_block"):
                out = node.forward(out, count=count)
            else:
                out = node.forward(out)
        return out

    def backward(self, dout):
        for _, node in reversed(self.nodes):
            dout = node.backward(dout)
        return dout

    def param_layers(self):
        return list(self._params)

    def num_params(self, include_bias=True):
        return sum(p.num_params(include_bias) for p in self._params)

    def measured_counts(self):
        """(nonzero, total) per measured relu, in prunable-slot order."""
        return [(r.last_nonzero, r.last_total) for r in self._measured]

    def num_measured(self):
        return len(self._measured)

    def flat_params(self):
        arrays = []
        for p in self._params:
            arrays.append(p.weights.ravel())
            if p.bias is not None:
                arrays.append(p.bias.ravel())
        return np.concatenate(arrays).astype(np.float32)

    def load_flat_params(self, flat):
        offset = 0
        for p in self._params:
            for arr in (p.weights, p.bias):
                if arr is None:
                    continue
                n = arr.size
                if offset + n > flat.size:
                    raise ValueError("parameter blob too short for architecture")
                arr[...] = flat[offset:offset + n].reshape(arr.shape).astype(arr.dtype)
                offset += n
        if offset != flat.size:
            raise ValueError(
                f"parameter blob has {flat.size} values, architecture needs {offset}")


def instantiate(arch, seed, dtype=np.float32):
    """Fresh random model for an architecture; deterministic in (arch, seed)."""
    return Model(arch, seed, dtype=dtype)
