"""Versioned binary checkpoint container.

Layout (all integers little-endian):

  offset 0   magic, 4 bytes: b"DPCK"
  offset 4   format version, uint32 (currently 1)
  offset 8   header length H, uint32
  offset 12  header, H bytes UTF-8 JSON:
               {"arch": <architecture text>,
                "param_count": <int>,
                "payload_crc32": <int>}
  offset 12+H  payload: param_count float32 values, the model's flat
               parameters (per layer: weights then bias, ravelled in order)

The CRC is over the raw payload bytes; load refuses mismatched counts or
checksums.
"""

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from densiprune.arch import format_arch, parse_arch
from densiprune.network import instantiate

MAGIC = b"DPCK"
VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(model, path):
    flat = model.flat_params().astype("<f4")
    payload = flat.tobytes()
    header = json.dumps({
        "arch": format_arch(model.arch),
        "param_count": int(flat.size),
        "payload_crc32": zlib.crc32(payload),
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        fh.write(payload)


def load_checkpoint(path):
    """Returns (arch, flat_params). Use restore_model for a live network."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if len(data) < 12 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(data[12:12 + header_len].decode("utf-8"))
    payload = data[12 + header_len:]
    expected = header["param_count"] * 4
    if len(payload) != expected:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}")
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise CheckpointError(f"{path}: payload checksum mismatch")
    arch = parse_arch(header["arch"])
    flat = np.frombuffer(payload, dtype="<f4")
    return arch, flat


def restore_model(path):
    arch, flat = load_checkpoint(path)
    model = instantiate(arch, seed=0)
    model.load_flat_params(flat)
    return model
