"""Density-driven pruning during training.

The loop: train the current network epoch by epoch while accumulating
activation densities; once the network-wide density stops moving (the
saturation criterion), look at the slope of its density-vs-epoch profile.
An upward trend ends the whole process with the current network; otherwise
every prunable width is rescaled by its own density, a fresh network is
randomly instantiated at the new widths (no weight transfer), and training
restarts. The chosen network finally trains a full cycle from scratch.
"""

import math
from dataclasses import dataclass

import numpy as np

from densiprune.arch import resize_arch
from densiprune.datasets import batches, make_batch_plan
from densiprune.density import DensityAccumulator, DensityHistory
from densiprune.layers import sgd_step, softmax_xent
from densiprune.network import instantiate
from densiprune.seeding import derive_seed


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite; aborts the run with context."""


PROFILES = ("decreasing", "flat", "increasing")


@dataclass(frozen=True)
class PruneCriteria:
    rho_tolerance: float = 0.001        # max |epoch-to-epoch change| at saturation
    rho_window: int = 2                 # consecutive changes that must stay below it
    rho_min_epochs: int = 10            # never declare saturation earlier
    delta_slope_tolerance: float = 1e-4  # |slope| below this counts as flat
    delta_warmup_epochs: int = 5        # epochs excluded from the slope fit
    max_rounds: int = 3                 # hard cap on pruning events
    final_train_epochs: int = 210       # full cycle for the chosen network

    def __post_init__(self):
        if self.rho_tolerance <= 0 or self.delta_slope_tolerance <= 0:
            raise ValueError("tolerances must be > 0")
        if self.rho_window < 2:
            raise ValueError("rho_window must be >= 2")
        if min(self.rho_min_epochs, self.delta_warmup_epochs,
               self.max_rounds, self.final_train_epochs) < 0:
            raise ValueError("epoch counts and round limits must be >= 0")


@dataclass(frozen=True)
class StageRecord:
    network_index: int
    arch: object
    epochs_trained: int
    history: DensityHistory
    final_accuracy: float
    profile: str


@dataclass(frozen=True)
class PruneEvent:
    from_index: int
    ae_used: tuple
    old_sizes: tuple
    new_sizes: tuple
    epoch: int


def saturation_reached(history, criteria):
    """True once the trailing window of total-density changes is quiet.

    Requires at least rho_min_epochs samples and rho_window+1 samples so the
    window of consecutive absolute differences exists at all.
    """
    totals = history.total_series()
    if not totals:
        raise ValueError("empty history")
    if len(totals) < criteria.rho_min_epochs:
        return False
    if len(totals) < criteria.rho_window + 1:
        return False
    tail = totals[-(criteria.rho_window + 1):]
    return all(abs(b - a) < criteria.rho_tolerance
               for a, b in zip(tail, tail[1:]))


def classify_profile(history, criteria):
    """Slope class of total density vs epoch: decreasing, flat, or increasing.

    Least-squares fit over samples at epochs >= delta_warmup_epochs; the
    warmup guard exists because early-training densities swing before the
    trend settles.
    """
    points = [(s.epoch, s.total_ae) for s in history.samples
              if s.epoch >= criteria.delta_warmup_epochs]
    if len(points) < 2:
        raise ValueError(
            f"need at least {criteria.delta_warmup_epochs + 2} epochs to "
            f"classify a profile, have {len(history)}")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    xc = xs - xs.mean()
    slope = float((xc * (ys - ys.mean())).sum() / (xc * xc).sum())
    if slope > criteria.delta_slope_tolerance:
        return "increasing"
    if slope < -criteria.delta_slope_tolerance:
        return "decreasing"
    return "flat"


def evaluate_accuracy(model, dataset, batch_size=256):
    """Top-1 accuracy; forward only, densities untouched."""
    correct = 0
    for start in range(0, dataset.count, batch_size):
        xb = dataset.images[start:start + batch_size]
        yb = dataset.labels[start:start + batch_size]
        logits = model.forward(xb, count=False)
        correct += int((np.argmax(logits, axis=1) == yb).sum())
    return correct / dataset.count


def train_network(model, train_data, eval_data, optimizer, batch_size,
                  max_epochs, base_seed, stage_tag, criteria=None,
                  stop_at_saturation=False, network_index=0, progress=None):
    """Train one network for up to max_epochs, recording per-epoch densities.

    With stop_at_saturation the loop ends early once the saturation
    criterion fires. Batch order derives from (base_seed, stage_tag, epoch)
    only, so identical configs replay identically.
    """
    accumulator = DensityAccumulator(model.num_measured())
    history = DensityHistory(network_index=network_index)
    shuffle_seed = derive_seed(base_seed, "shuffle", stage_tag)
    for epoch in range(max_epochs):
        plan = make_batch_plan(train_data.count, batch_size, shuffle_seed, epoch)
        for xb, yb in batches(train_data, plan):
            logits = model.forward(xb, count=True)
            loss, dlogits = softmax_xent(logits, yb)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss ({loss}) at stage {stage_tag!r} epoch {epoch}")
            accumulator.record_model(model)
            model.backward(dlogits)
            sgd_step(model.param_layers(), optimizer, epoch)
        accuracy = evaluate_accuracy(model, eval_data, batch_size)
        sample = accumulator.finalize_epoch(accuracy)
        history.append(sample)
        if progress is not None:
            progress(stage_tag, sample)
        if stop_at_saturation and saturation_reached(history, criteria):
            break
    return history


def prune_step(stage, seed, name=None):
    """Rescale a trained stage's architecture by its last density vector and
    instantiate the smaller network from scratch."""
    densities = tuple(stage.history.last().layer_ae)
    old_sizes = tuple(stage.arch.prunable_sizes())
    new_arch = resize_arch(stage.arch, densities,
                           name=name or f"{stage.arch.name}")
    new_sizes = tuple(new_arch.prunable_sizes())
    model = instantiate(new_arch, seed)
    event = PruneEvent(stage.network_index, densities, old_sizes, new_sizes,
                       stage.history.last().epoch)
    return new_arch, model, event


@dataclass
class RunResult:
    final_model: object
    final_arch: object
    stages: list
    events: list
    final_history: DensityHistory


def run_pruning_in_training(arch, train_data, eval_data, optimizer, criteria,
                            base_seed, batch_size, epochs_budget,
                            on_stage=None, on_event=None, progress=None):
    """Full prune-in-training run; see module docstring for the loop shape.

    epochs_budget caps each stage: a network that never saturates is pruned
    at the budget as if it had. Stops pruning on an increasing profile or
    after max_rounds events; the surviving architecture then trains
    final_train_epochs from a fresh seed.
    """
    stages = []
    events = []
    index = 0
    current_arch = arch
    model = instantiate(current_arch, derive_seed(base_seed, "init", 0))
    while True:
        history = train_network(
            model, train_data, eval_data, optimizer, batch_size,
            epochs_budget, base_seed, ("stage", index), criteria=criteria,
            stop_at_saturation=True, network_index=index, progress=progress)
        try:
            profile = classify_profile(history, criteria)
        except ValueError:
            # Too short to judge a trend; keep pruning until something
            # measurable emerges or the round limit ends the run.
            profile = "decreasing"
        stage = StageRecord(index, current_arch, len(history), history,
                            history.last().accuracy, profile)
        stages.append(stage)
        if on_stage is not None:
            on_stage(stage)
        if profile == "increasing" or len(events) >= criteria.max_rounds:
            final_arch = current_arch
            break
        next_arch, model, event = prune_step(
            stage, derive_seed(base_seed, "init", index + 1))
        events.append(event)
        if on_event is not None:
            on_event(event)
        current_arch = next_arch
        index += 1
        if len(events) >= criteria.max_rounds:
            final_arch = current_arch
            break
    final_model = instantiate(final_arch, derive_seed(base_seed, "final"))
    final_history = train_network(
        final_model, train_data, eval_data, optimizer, batch_size,
        criteria.final_train_epochs, base_seed, ("final",),
        network_index=len(stages), progress=progress)
    return RunResult(final_model, final_arch, stages, events, final_history)
