"""Image-classification dataset ingestion, normalization, and batching.

Two canonical binary formats are supported:

  IDX:   big-endian; image files start with magic 0x00000803 followed by
         [count, rows, cols] int32, then row-major unsigned bytes; label
         files start with 0x00000801 followed by [count], then label bytes.
  CIFAR: 3073-byte records = 1 label byte + 1024 red + 1024 green +
         1024 blue bytes, row-major per channel, 32x32.

Raw bytes are scaled to [0, 1] and normalized per channel; loading is
deterministic (same files -> byte-identical tensors).
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from densiprune.seeding import derive_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073

GRAYSCALE_MEAN = (0.1307,)
GRAYSCALE_STD = (0.3081,)
CIFAR_MEAN = (0.4914, 0.4822, 0.4465)
CIFAR_STD = (0.2470, 0.2435, 0.2616)


@dataclass
class Dataset:
    images: np.ndarray    # (count, channels, height, width) float32, normalized
    labels: np.ndarray    # (count,) int64 class indices
    num_classes: int
    name: str
    mean: tuple
    std: tuple

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.num_classes):
            raise ValueError("labels outside [0, num_classes)")
        if not np.isfinite(self.images).all():
            raise ValueError("non-finite pixel values after normalization")

    @property
    def count(self):
        return self.images.shape[0]


def normalize(unit_pixels, mean, std):
    """Per-channel affine normalization of [0,1] pixels: (x - mean) / std."""
    mean = np.asarray(mean, dtype=np.float32).reshape(1, -1, 1, 1)
    std = np.asarray(std, dtype=np.float32).reshape(1, -1, 1, 1)
    return (unit_pixels - mean) / std


def denormalize(pixels, mean, std):
    mean = np.asarray(mean, dtype=np.float32).reshape(1, -1, 1, 1)
    std = np.asarray(std, dtype=np.float32).reshape(1, -1, 1, 1)
    return pixels * std + mean


def _read_idx_header(data, path, expected_magic, n_dims, what):
    if len(data) < 4:
        raise ValueError(f"{path}: truncated {what} header")
    magic = struct.unpack(">i", data[:4])[0]
    if magic != expected_magic:
        raise ValueError(
            f"{path}: bad magic 0x{magic:08x} for {what} "
            f"(expected 0x{expected_magic:08x})")
    header_len = 4 + 4 * n_dims
    if len(data) < header_len:
        raise ValueError(f"{path}: truncated {what} header")
    dims = struct.unpack(">" + "i" * n_dims, data[4:header_len])
    return dims, data[header_len:]


def load_idx(images_path, labels_path, mean=GRAYSCALE_MEAN, std=GRAYSCALE_STD,
             num_classes=None, name="idx"):
    """Load a 1-channel dataset from an IDX image/label file pair."""
    img_data = Path(images_path).read_bytes()
    (count, rows, cols), img_body = _read_idx_header(
        img_data, images_path, IDX_IMAGES_MAGIC, 3, "images")
    expected = count * rows * cols
    if len(img_body) != expected:
        raise ValueError(
            f"{images_path}: truncated image data ({len(img_body)} bytes, "
            f"expected {expected})")

    lbl_data = Path(labels_path).read_bytes()
    (lbl_count,), lbl_body = _read_idx_header(
        lbl_data, labels_path, IDX_LABELS_MAGIC, 1, "labels")
    if len(lbl_body) != lbl_count:
        raise ValueError(f"{labels_path}: truncated label data")
    if lbl_count != count:
        raise ValueError(
            f"image count {count} does not match label count {lbl_count}")

    raw = np.frombuffer(img_body, dtype=np.uint8).reshape(count, 1, rows, cols)
    labels = np.frombuffer(lbl_body, dtype=np.uint8).astype(np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 1
    images = normalize(raw.astype(np.float32) / 255.0, mean, std)
    return Dataset(images, labels, num_classes, name, tuple(mean), tuple(std))


def load_cifar_binary(paths, mean=CIFAR_MEAN, std=CIFAR_STD, num_classes=10,
                      name="cifar"):
    """Load 3-channel 32x32 records from one or more CIFAR binary files."""
    chunks = []
    label_chunks = []
    for path in paths:
        data = Path(path).read_bytes()
        if len(data) == 0 or len(data) % CIFAR_RECORD_BYTES != 0:
            raise ValueError(
                f"{path}: length {len(data)} is not a positive multiple of "
                f"{CIFAR_RECORD_BYTES}-byte records")
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        labels = records[:, 0].astype(np.int64)
        if labels.max() >= num_classes:
            raise ValueError(
                f"{path}: label byte {labels.max()} >= num_classes {num_classes}")
        chunks.append(records[:, 1:].reshape(-1, 3, 32, 32))
        label_chunks.append(labels)
    raw = np.concatenate(chunks)
    labels = np.concatenate(label_chunks)
    images = normalize(raw.astype(np.float32) / 255.0, mean, std)
    return Dataset(images, labels, num_classes, name, tuple(mean), tuple(std))


def subset(dataset, n_per_class, seed):
    """Class-balanced deterministic subset with n_per_class per class."""
    rng = derive_rng(seed, "subset")
    picks = []
    for cls in range(dataset.num_classes):
        pool = np.flatnonzero(dataset.labels == cls)
        if pool.size < n_per_class:
            raise ValueError(
                f"class {cls} has {pool.size} samples, need {n_per_class}")
        picks.append(rng.choice(pool, size=n_per_class, replace=False))
    order = np.sort(np.concatenate(picks))
    return Dataset(dataset.images[order], dataset.labels[order],
                   dataset.num_classes, f"{dataset.name}[{n_per_class}/class]",
                   dataset.mean, dataset.std)


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    order: np.ndarray     # permutation of [0, count)
    epoch_seed: int


def make_batch_plan(count, batch_size, base_seed, epoch):
    """Epoch shuffle plan; identical (base_seed, epoch) gives identical order."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = derive_rng(base_seed, "shuffle", int(epoch))
    return BatchPlan(batch_size, rng.permutation(count), epoch)


def batches(dataset, plan):
    """Yield (images, labels) batches covering every index exactly once."""
    if plan.batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = plan.order
    for start in range(0, len(order), plan.batch_size):
        idx = order[start:start + plan.batch_size]
        yield dataset.images[idx], dataset.labels[idx]
