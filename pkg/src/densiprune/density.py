"""Activation-density accumulation across training epochs.

Density (activation energy) of a layer over an epoch is the exact ratio of
strictly-positive post-ReLU activations to total activations, accumulated
as 64-bit integers over every training batch and divided once at epoch end.
The network-wide density is count-weighted: summed nonzeros over summed
totals, which keeps it inside [min layer density, max layer density].
"""

import csv
from dataclasses import dataclass


class DensityAccumulator:
    """Integer counters per measured layer, reset at each epoch boundary."""

    def __init__(self, num_layers, epoch=0):
        if num_layers < 1:
            raise ValueError("need at least one measured layer")
        self.num_layers = num_layers
        self.epoch = epoch
        self.nonzero = [0] * num_layers
        self.total = [0] * num_layers

    def record(self, layer, nonzero, total):
        """Add one batch's counts for one layer. Order-independent."""
        if not 0 <= layer < self.num_layers:
            raise IndexError(f"layer {layer} out of range")
        if total <= 0:
            raise ValueError("total must be > 0")
        if not 0 <= nonzero <= total:
            raise ValueError(f"nonzero {nonzero} outside [0, {total}]")
        self.nonzero[layer] += int(nonzero)
        self.total[layer] += int(total)

    def record_model(self, model):
        """Pull the per-layer counts left by a counted forward pass."""
        for layer, (nonzero, total) in enumerate(model.measured_counts()):
            self.record(layer, nonzero, total)

    def finalize_epoch(self, accuracy):
        """Close the epoch: compute densities, reset counters, bump epoch."""
        for layer, total in enumerate(self.total):
            if total == 0:
                raise ValueError(f"layer {layer} saw no activations this epoch")
        layer_ae = tuple(n / t for n, t in zip(self.nonzero, self.total))
        total_ae = sum(self.nonzero) / sum(self.total)
        sample = DensitySample(self.epoch, layer_ae, total_ae, float(accuracy))
        self.nonzero = [0] * self.num_layers
        self.total = [0] * self.num_layers
        self.epoch += 1
        return sample


@dataclass(frozen=True)
class DensitySample:
    epoch: int
    layer_ae: tuple
    total_ae: float
    accuracy: float


class DensityHistory:
    """Ordered per-epoch density samples for one network."""

    def __init__(self, network_index=0):
        self.network_index = network_index
        self.samples = []

    def append(self, sample):
        if self.samples and sample.epoch <= self.samples[-1].epoch:
            raise ValueError("epochs must be strictly increasing")
        self.samples.append(sample)

    def __len__(self):
        return len(self.samples)

    def total_series(self):
        return [s.total_ae for s in self.samples]

    def density_at(self, epoch):
        """Per-layer density vector recorded at the given epoch."""
        for sample in self.samples:
            if sample.epoch == epoch:
                return list(sample.layer_ae)
        raise KeyError(f"no sample for epoch {epoch}")

    def last(self):
        if not self.samples:
            raise ValueError("history is empty")
        return self.samples[-1]


CSV_FIXED_COLUMNS = ("epoch", "accuracy", "total_ae")


def write_history_csv(history, path):
    """ae_history.csv: epoch,accuracy,total_ae,ae_L0,...,ae_Ln per epoch.

    Floats are written with repr so identical runs produce identical bytes.
    """
    if not history.samples:
        raise ValueError("refusing to write an empty history")
    n_layers = len(history.samples[0].layer_ae)
    header = list(CSV_FIXED_COLUMNS) + [f"ae_L{i}" for i in range(n_layers)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for s in history.samples:
            writer.writerow([s.epoch, repr(s.accuracy), repr(s.total_ae)]
                            + [repr(v) for v in s.layer_ae])


def read_history_csv(path):
    history = DensityHistory()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[:3]) != CSV_FIXED_COLUMNS:
            raise ValueError(f"unexpected header {header[:3]}")
        for row in reader:
            history.append(DensitySample(
                int(row[0]),
                tuple(float(v) for v in row[3:]),
                float(row[2]),
                float(row[1]),
            ))
    return history
