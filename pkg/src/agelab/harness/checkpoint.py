"""Binary Q-network checkpoints.

Layout (all little-endian): the 4 bytes ``AGEQ``, a u32 format version, a
u32 layer count L, then L+1 u32 layer widths, then for every layer the
row-major f64 weight matrix (fan_in x fan_out) followed by its f64 bias.
The activation is not part of the format; pass it to :func:`load_checkpoint`.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..neural import QNetwork

MAGIC = b"AGEQ"
VERSION = 1


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


def encode(net: QNetwork) -> bytes:
    dims = net.layer_dims
    parts = [MAGIC, struct.pack("<II", VERSION, len(dims) - 1),
             struct.pack(f"<{len(dims)}I", *dims)]
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def decode(data: bytes, activation: str = "tanh") -> QNetwork:
    if len(data) < 4:
        raise TruncatedCheckpointError("file ends inside the magic bytes")
    if data[:4] != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, found {data[:4]!r}")
    pos = 4

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise TruncatedCheckpointError(f"file ends inside {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (version,) = struct.unpack("<I", take(4, "the version"))
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, reader supports {VERSION}")
    (n_layers,) = struct.unpack("<I", take(4, "the layer count"))
    if n_layers < 1:
        raise CheckpointError("checkpoint declares no layers")
    dims = struct.unpack(f"<{n_layers + 1}I", take(4 * (n_layers + 1), "the layer widths"))
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = np.frombuffer(take(8 * fan_in * fan_out, f"layer {i} weights"), dtype="<f8")
        b = np.frombuffer(take(8 * fan_out, f"layer {i} biases"), dtype="<f8")
        weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
        biases.append(b.astype(np.float64))
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after the last layer")
    return QNetwork(tuple(dims), weights, biases, activation)


def save_checkpoint(net: QNetwork, path) -> Path:
    path = Path(path)
    path.write_bytes(encode(net))
    return path


def load_checkpoint(path, activation: str = "tanh") -> QNetwork:
    return decode(Path(path).read_bytes(), activation)
