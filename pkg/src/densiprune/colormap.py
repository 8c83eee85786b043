"""Channel-averaged activation maps exported as grayscale images.

For one input image, the selected layers' output activations are averaged
across channels, min-max normalized to [0, 1] (a constant map exports as
all zeros), and written both as an 8-bit binary PGM (P5, maxval 255) and as
a CSV matrix.
"""

import csv

import numpy as np

VISUALIZABLE_KINDS = ("conv", "relu", "residual_block")


def capture_outputs(model, image, layer_indices):
    """Forward one image, returning {layer_index: output tensor} for the
    requested architecture positions. Indices refer to the arch layer list."""
    wanted = set(layer_indices)
    for idx in wanted:
        if not 0 <= idx < len(model.nodes):
            raise ValueError(f"layer index {idx} out of range "
                             f"(model has {len(model.nodes)} layers)")
        kind = model.nodes[idx][0]
        if kind not in VISUALIZABLE_KINDS:
            raise ValueError(
                f"layer {idx} is {kind!r}; colormaps need one of "
                f"{VISUALIZABLE_KINDS}")
    out = image[None] if image.ndim == 3 else image
    captured = {}
    for idx, (kind, node) in enumerate(model.nodes):
        if kind in ("relu", "residual_block"):
            out = node.forward(out, count=False)
        else:
            out = node.forward(out)
        if idx in wanted:
            captured[idx] = out
    return captured


def channel_mean_map(activations):
    """(1, C, H, W) or (C, H, W) -> (H, W) mean over channels."""
    arr = np.asarray(activations)
    if arr.ndim == 4:
        arr = arr[0]
    return arr.mean(axis=0)


def minmax_normalize(matrix):
    """Scale to [0, 1]; a constant matrix maps to all zeros."""
    lo = float(matrix.min())
    hi = float(matrix.max())
    if hi == lo:
        return np.zeros_like(matrix, dtype=np.float64)
    return (matrix.astype(np.float64) - lo) / (hi - lo)


def write_pgm(matrix, path):
    """Binary PGM, maxval 255; expects values already in [0, 1]."""
    h, w = matrix.shape
    gray = np.clip(np.rint(matrix * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def write_csv_matrix(matrix, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


def export_colormaps(model, image, layer_indices, out_dir, image_index=0):
    """Write layer{i}_img{j}.pgm and .csv per selected layer; returns paths."""
    from pathlib import Path
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    captured = capture_outputs(model, image, layer_indices)
    written = []
    for idx in sorted(captured):
        normalized = minmax_normalize(channel_mean_map(captured[idx]))
        stem = out_dir / f"layer{idx}_img{image_index}"
        write_pgm(normalized, stem.with_suffix(".pgm"))
        write_csv_matrix(normalized, stem.with_suffix(".csv"))
        written.append(stem)
    return written
