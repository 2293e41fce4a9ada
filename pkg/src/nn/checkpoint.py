# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
CFNN checkpoint container.

Layout (little-endian):
    "CFNN", version u32, dtype code u8, layer count u32
    per layer: kind u8 (0 dense, 1 residual), activation u8, in u32, out u32
    parameters in layer order, row-major, in the stored dtype
    optimizer flag u8; when set: step u64, lr/wd/beta1/beta2/eps f64, moments f64
    tagged sections: tag (4 bytes), length u32, payload; terminated by "END "
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..common.storage import ArtifactFormatError, BinaryReader, BinaryWriter, read_bytes, write_bytes
from .network import ACTIVATIONS, Dense, Layer, Network, NetworkShapeError, Residual
from .optim import AdamWState

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CFNN"
CHECKPOINT_VERSION = 1
END_TAG = b"END "
_DTYPES = {0: np.dtype(np.float32), 1: np.dtype(np.float64)}
_DTYPE_CODES = {v: k for k, v in _DTYPES.items()}


class CheckpointError(ArtifactFormatError):
    """Raised for bad magic, unsupported versions or truncated checkpoints."""

    pass


@dataclass
class Checkpoint:
    network: Network
    optimizer: AdamWState | None = None
    sections: dict[str, bytes] = field(default_factory=dict)

    def json_section(self, tag: str) -> Any:
        if tag not in self.sections:
            raise CheckpointError(f"Checkpoint has no {tag!r} section")
        return json.loads(self.sections[tag].decode("utf-8"))

    def array_section(self, tag: str) -> np.ndarray:
        if tag not in self.sections:
            raise CheckpointError(f"Checkpoint has no {tag!r} section")
        reader = BinaryReader(self.sections[tag], tag)
        (count,) = reader.unpack("I")
        values = reader.array(np.float64, count)
        reader.expect_end()
        return values


def json_payload(data: Any) -> bytes:
    return json.dumps(data, sort_keys=True).encode("utf-8")


def array_payload(values: np.ndarray) -> bytes:
    writer = BinaryWriter()
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    writer.pack("I", flat.size)
    writer.array(flat, np.float64)
    return writer.getvalue()


def _flatten_layers(layers: list[Layer]) -> list[tuple[int, Dense]]:
    """(kind, dense) pairs; a residual layer contributes its inner dense with kind 1."""
    flat = []
    for layer in layers:
        if isinstance(layer, Residual):
            flat.append((1, layer.inner))
        else:
            flat.append((0, layer))
    return flat


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    net = checkpoint.network
    dtype = np.dtype(net.dtype)
    if dtype not in _DTYPE_CODES:
        raise CheckpointError(f"Unsupported parameter dtype {dtype}")
    writer = BinaryWriter()
    writer.raw(CHECKPOINT_MAGIC)
    writer.pack("IBI", CHECKPOINT_VERSION, _DTYPE_CODES[dtype], len(net.layers))
    for kind, dense in _flatten_layers(net.layers):
        writer.pack("BBII", kind, ACTIVATIONS.index(dense.activation), dense.input_dim, dense.output_dim)
    for param in net.parameters():
        writer.array(param, dtype)

    optimizer = checkpoint.optimizer
    writer.pack("B", int(optimizer is not None))
    if optimizer is not None:
        writer.pack(
            "Qddddd",
            optimizer.step,
            optimizer.learning_rate,
            optimizer.weight_decay,
            optimizer.beta1,
            optimizer.beta2,
            optimizer.eps,
        )
        for moment in optimizer.first_moment + optimizer.second_moment:
            writer.array(moment, np.float64)

    for tag, payload in checkpoint.sections.items():
        encoded = tag.encode("ascii")
        if len(encoded) != 4 or encoded == END_TAG:
            raise CheckpointError(f"Section tags must be 4 ASCII characters, got: {tag!r}")
        writer.raw(encoded)
        writer.pack("I", len(payload))
        writer.raw(payload)
    writer.raw(END_TAG)
    return writer.getvalue()


def decode_checkpoint(payload: bytes, source: str = "<bytes>") -> Checkpoint:
    reader = BinaryReader(payload, source)
    try:
        reader.expect_magic(CHECKPOINT_MAGIC)
        reader.expect_version(CHECKPOINT_VERSION)
        dtype_code, layer_count = reader.unpack("BI")
        if dtype_code not in _DTYPES:
            raise CheckpointError(f"{source}: unknown dtype code {dtype_code}")
        dtype = _DTYPES[dtype_code]

        headers = [reader.unpack("BBII") for _ in range(layer_count)]
        layers: list[Layer] = []
        for kind, activation, fan_in, fan_out in headers:
            if activation >= len(ACTIVATIONS) or kind not in (0, 1):
                raise CheckpointError(f"{source}: bad layer header {(kind, activation)}")
            weight = reader.array(dtype, fan_out * fan_in).reshape(fan_out, fan_in)
            bias = reader.array(dtype, fan_out)
            dense = Dense(weight, bias, ACTIVATIONS[activation])
            if kind == 1:
                outer_weight = reader.array(dtype, fan_in * fan_out).reshape(fan_in, fan_out)
                outer_bias = reader.array(dtype, fan_in)
                layers.append(Residual(dense, Dense(outer_weight, outer_bias, "identity")))
            else:
                layers.append(dense)
        network = Network(layers)

        optimizer = None
        (has_optimizer,) = reader.unpack("B")
        if has_optimizer:
            step, lr, wd, beta1, beta2, eps = reader.unpack("Qddddd")
            shapes = [p.shape for p in network.parameters()]
            moments = [reader.array(np.float64, int(np.prod(s))).reshape(s) for s in shapes + shapes]
            optimizer = AdamWState(
                learning_rate=lr,
                weight_decay=wd,
                beta1=beta1,
                beta2=beta2,
                eps=eps,
                step=step,
                first_moment=moments[: len(shapes)],
                second_moment=moments[len(shapes) :],
            )

        sections: dict[str, bytes] = {}
        while True:
            tag = reader.take(4)
            if tag == END_TAG:
                break
            (length,) = reader.unpack("I")
            sections[tag.decode("ascii", errors="replace")] = reader.take(length)
        reader.expect_end()
    except CheckpointError:
        raise
    except ArtifactFormatError as e:
        raise CheckpointError(str(e)) from e
    except NetworkShapeError as e:
        raise CheckpointError(f"{source}: {e}") from e
    return Checkpoint(network=network, optimizer=optimizer, sections=sections)


def save_checkpoint(
    path: str | Path,
    network: Network,
    optimizer: AdamWState | None = None,
    sections: dict[str, bytes] | None = None,
) -> Path:
    target = write_bytes(path, encode_checkpoint(Checkpoint(network, optimizer, dict(sections or {}))))
    logger.info(f"Checkpoint written to {target}")
    return target


def load_checkpoint(path: str | Path) -> Checkpoint:
    return decode_checkpoint(read_bytes(path), str(path))
