"""``PLMCKPT1`` binary checkpoints.

Layout (all integers little-endian int32, all reals little-endian float64)::

    b"PLMCKPT1"
    for each network (storage, then recall):
        layer_count
        layer_count x (fan_in, fan_out, activation_tag, bias_trainable)
        for each layer: weights (row-major, fan_out x fan_in), then biases

Activation tags: 0 sigmoid, 1 softmax, 2 identity. The loss kind is implied
by the output activation (softmax -> cross_entropy, otherwise MSE).
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

from .errors import FormatError, PlmError
from .nncore import (
    CROSS_ENTROPY,
    IDENTITY,
    MEAN_SQUARED_ERROR,
    SIGMOID,
    SOFTMAX,
    DenseLayer,
    Network,
)

MAGIC = b"PLMCKPT1"
_TAGS = {SIGMOID: 0, SOFTMAX: 1, IDENTITY: 2}
_KINDS = {v: k for k, v in _TAGS.items()}
_MAX_WIDTH = 1 << 20


def _write_network(buf: io.BytesIO, net: Network) -> None:
    buf.write(struct.pack("<i", len(net.layers)))
    for layer in net.layers:
        buf.write(
            struct.pack(
                "<iiii", layer.fan_in, layer.fan_out, _TAGS[layer.activation], int(layer.bias_trainable)
            )
        )
    for layer in net.layers:
        buf.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(layer.biases, dtype="<f8").tobytes())


def networks_to_bytes(nets: list[Network]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    for net in nets:
        _write_network(buf, net)
    return buf.getvalue()


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise FormatError("checkpoint is truncated")
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def ints(self, n: int) -> tuple[int, ...]:
        return struct.unpack(f"<{n}i", self.take(4 * n))

    def reals(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def _read_network(r: _Reader) -> Network:
    (n_layers,) = r.ints(1)
    if not 1 <= n_layers <= 64:
        raise FormatError(f"implausible layer count {n_layers}")
    headers = [r.ints(4) for _ in range(n_layers)]
    layers = []
    for fan_in, fan_out, tag, trainable in headers:
        if not (0 < fan_in <= _MAX_WIDTH and 0 < fan_out <= _MAX_WIDTH):
            raise FormatError(f"implausible layer shape {fan_in}x{fan_out}")
        if tag not in _KINDS or trainable not in (0, 1):
            raise FormatError("bad activation tag or bias flag")
        w = r.reals((fan_out, fan_in))
        b = r.reals((fan_out,))
        layers.append(DenseLayer(w, b, _KINDS[tag], bool(trainable)))
    loss = CROSS_ENTROPY if layers[-1].activation == SOFTMAX else MEAN_SQUARED_ERROR
    return Network(layers, loss)


def networks_from_bytes(raw: bytes, count: int) -> list[Network]:
    r = _Reader(raw)
    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError("not a PLMCKPT1 checkpoint (bad magic)")
    try:
        nets = [_read_network(r) for _ in range(count)]
    except FormatError:
        raise
    except PlmError as exc:
        raise FormatError(f"inconsistent checkpoint: {exc}") from exc
    if r.pos != len(raw):
        raise FormatError(f"{len(raw) - r.pos} trailing bytes after the last network")
    return nets


def save_networks(nets: list[Network], path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(networks_to_bytes(nets))


def load_networks(path: str | os.PathLike, count: int) -> list[Network]:
    with open(path, "rb") as fh:
        return networks_from_bytes(fh.read(), count)
