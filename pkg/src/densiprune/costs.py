"""Per-layer MAC and parameter accounting plus chained training-cost metrics.

Conventions: a convolution with N input channels, M output channels, k x k
kernel and O x O output costs O^2 * N * k^2 * M multiply-accumulates and
carries N * M * k^2 weights. Fully-connected layers count as 1x1
convolutions on a 1x1 map. Bias, relu, pooling and softmax are excluded so
reduction ratios stay self-consistent. All arithmetic is exact integers
until the final ratio.
"""

from dataclasses import dataclass

from densiprune.arch import propagate_shapes, residual_block_spec


def layer_macs(n, m, k, o):
    """Multiply-accumulates of one conv layer: O^2 * N * k^2 * M."""
    if min(n, m, k, o) < 1:
        raise ValueError("all cost arguments must be >= 1")
    return o * o * n * k * k * m


def layer_params(n, m, k):
    """Weight count of one conv layer: N * M * k^2 (bias excluded)."""
    if min(n, m, k) < 1:
        raise ValueError("all cost arguments must be >= 1")
    return n * m * k * k


@dataclass(frozen=True)
class LayerCost:
    layer_index: int
    label: str
    n: int          # input channels
    m: int          # output channels
    k: int          # kernel size
    in_size: int    # input spatial extent
    out_size: int   # output spatial extent
    macs: int
    params: int


@dataclass(frozen=True)
class CostReport:
    arch_name: str
    per_layer: tuple
    total_macs: int
    total_params: int

    def as_dict(self):
        return {
            "arch": self.arch_name,
            "total_macs": self.total_macs,
            "total_params": self.total_params,
            "layers": [vars(c) for c in self.per_layer],
        }


def network_cost(arch, include_bias=False):
    """Cost of every compute layer in an architecture.

    Covers plain convs, both convs of each residual block, projection
    shortcut convs (real compute even though they are never rescaled), and
    the classifier. Pooling and relu contribute nothing.
    """
    shapes = propagate_shapes(arch)
    entries = []
    for i, (spec, (in_shape, out_shape)) in enumerate(zip(arch.layers, shapes)):
        in_c, in_h, _ = in_shape
        out_c, out_h, _ = out_shape
        if spec.kind == "conv":
            entries.append(_cost_entry(i, "conv", in_c, out_c, spec.kernel,
                                       in_h, out_h, include_bias))
        elif spec.kind == "fc":
            features = in_shape[0] * in_shape[1] * in_shape[2]
            entries.append(_cost_entry(i, "fc", features, spec.out_channels, 1,
                                       1, 1, include_bias))
        elif spec.kind == "residual_block":
            block = residual_block_spec(in_c, spec)
            entries.append(_cost_entry(i, "block.conv1", in_c, block.conv1_channels,
                                       3, in_h, out_h, include_bias))
            entries.append(_cost_entry(i, "block.conv2", block.conv1_channels,
                                       block.conv2_channels, 3, out_h, out_h,
                                       include_bias))
            if block.projection:
                entries.append(_cost_entry(i, "block.proj", in_c, block.conv2_channels,
                                           1, in_h, out_h, include_bias))
    return CostReport(arch.name, tuple(entries),
                      sum(e.macs for e in entries),
                      sum(e.params for e in entries))


def _cost_entry(index, label, n, m, k, in_size, out_size, include_bias):
    params = layer_params(n, m, k)
    if include_bias:
        params += m
    return LayerCost(index, label, n, m, k, in_size, out_size,
                     layer_macs(n, m, k, out_size), params)


def ops_reduction(baseline, pruned):
    """baseline MACs / pruned MACs; 1.0 means no change, higher is smaller."""
    if baseline.total_macs <= 0 or pruned.total_macs <= 0:
        raise ValueError("both reports need positive MAC totals")
    return baseline.total_macs / pruned.total_macs


def params_reduction(baseline, pruned):
    if baseline.total_params <= 0 or pruned.total_params <= 0:
        raise ValueError("both reports need positive parameter totals")
    return baseline.total_params / pruned.total_params


def training_complexity(stages):
    """Sum over training rounds of epochs weighted by inverse compute reduction.

    stages: sequence of (reduction, epochs) pairs, one per successively
    trained network; reduction is relative to the unpruned baseline. With
    OPS reductions this measures compute cost; fed parameter reductions
    instead it measures the memory cost of the same schedule.
    """
    stages = list(stages)
    if not stages:
        raise ValueError("need at least one (reduction, epochs) stage")
    total = 0.0
    for reduction, epochs in stages:
        if reduction <= 0:
            raise ValueError(f"reduction must be > 0, got {reduction}")
        if epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {epochs}")
        total += epochs / reduction
    return total


def training_memory_complexity(stages):
    """training_complexity with parameter reductions in place of OPS ones."""
    return training_complexity(stages)


def iterations_to_epochs(iterations, batch_size, train_size):
    """Epoch-equivalent of an iteration count: iterations * batch / dataset."""
    if iterations < 0 or batch_size < 1 or train_size < 1:
        raise ValueError("iterations >= 0, batch_size and train_size >= 1 required")
    return iterations * batch_size / train_size
