"""Shared fixtures: synthetic datasets in the real on-disk formats.

The generators emit files in the exact IDX / CIFAR binary layouts the
loaders parse, with a learnable class structure (one low-frequency template
per class plus pixel noise) so small networks reach high accuracy within a
few epochs.
"""

import struct

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance checklist after the run, outside capture."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checklist")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def class_templates(num_classes, side, rng, block=4):
    """Low-frequency [0,1] template per class: coarse random field upsampled."""
    coarse = rng.random((num_classes, side // block, side // block)).astype(np.float32)
    return np.kron(coarse, np.ones((block, block), dtype=np.float32))


def _sample_split(n, templates, rng, noise):
    """Class-balanced noisy samples drawn around shared templates."""
    num_classes, side, _ = templates.shape
    labels = rng.permutation(np.resize(np.arange(num_classes), n))
    unit = templates[labels] + rng.normal(0, noise, (n, side, side)).astype(np.float32)
    raw = np.clip(unit * 255, 0, 255).astype(np.uint8)
    return raw, labels.astype(np.uint8)


def synth_images(n, num_classes, side, seed, noise=0.25):
    """(uint8 images (n, side, side), labels) for the template task.

    Labels are class-balanced (cycled then shuffled) so per-class subset
    selection always has enough samples.
    """
    rng = np.random.default_rng(seed)
    return _sample_split(n, class_templates(num_classes, side, rng), rng, noise)


def write_idx_pair(images, labels, images_path, labels_path):
    """Write an IDX image/label file pair (big-endian headers + raw bytes)."""
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">iiii", 0x00000803, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">ii", 0x00000801, n))
        fh.write(labels.tobytes())


def write_cifar_file(images_rgb, labels, path):
    """Write CIFAR-format records: label byte + 3072 channel-major bytes."""
    with open(path, "wb") as fh:
        for img, label in zip(images_rgb, labels):
            fh.write(bytes([int(label)]))
            fh.write(img.tobytes())


def make_idx_dataset_dir(tmp_path, n_train=256, n_test=64, num_classes=10,
                         side=28, seed=7, noise=0.25):
    """Synthetic IDX train/test pair on disk; returns the four paths.

    Both splits share the same class templates (one generator); only the
    noise and label order differ, as for a real dataset's splits.
    """
    rng = np.random.default_rng(seed)
    templates = class_templates(num_classes, side, rng)
    train_raw, train_labels = _sample_split(n_train, templates, rng, noise)
    test_raw, test_labels = _sample_split(n_test, templates, rng, noise)
    paths = {
        "train_images": tmp_path / "train-images.idx3",
        "train_labels": tmp_path / "train-labels.idx1",
        "test_images": tmp_path / "test-images.idx3",
        "test_labels": tmp_path / "test-labels.idx1",
    }
    write_idx_pair(train_raw, train_labels, paths["train_images"], paths["train_labels"])
    write_idx_pair(test_raw, test_labels, paths["test_images"], paths["test_labels"])
    return paths


@pytest.fixture
def idx_dataset_dir(tmp_path):
    return make_idx_dataset_dir(tmp_path)


@pytest.fixture
def tiny_idx_dataset_dir(tmp_path):
    """Small, fast-to-train variant for engine-level tests."""
    return make_idx_dataset_dir(tmp_path, n_train=120, n_test=40, num_classes=4,
                                side=12, seed=11, noise=0.15)


def write_run_config(path, dataset_paths, extra=None):
    lines = [
        "dataset.kind = idx",
        f"dataset.train_images = {dataset_paths['train_images']}",
        f"dataset.train_labels = {dataset_paths['train_labels']}",
        f"dataset.test_images = {dataset_paths['test_images']}",
        f"dataset.test_labels = {dataset_paths['test_labels']}",
    ]
    if extra:
        lines += [f"{k} = {v}" for k, v in extra.items()]
    path.write_text("\n".join(lines) + "\n")
    return path
