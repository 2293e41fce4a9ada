# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Fully connected networks with analytic gradients.

Layers operate on batches shaped (batch, features). Weights are stored as
(out, in) so that a dense layer computes ``x @ W.T + b``. Gradient reductions
over the batch are accumulated in float64 and cast back to the parameter dtype.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import expit

logger = logging.getLogger(__name__)

ACTIVATIONS = ("identity", "relu", "silu", "tanh", "sigmoid")


class NetworkShapeError(ValueError):
    """Raised when inputs, gradients or layers have inconsistent dimensions."""

    pass


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0)
    if name == "silu":
        return z * expit(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return expit(z)
    raise NetworkShapeError(f"Unknown activation: {name}. Must be one of: {ACTIVATIONS}")


def activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Elementwise derivative da/dz given the pre-activation and activation."""
    if name == "identity":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "silu":
        s = expit(z)
        return s * (1 + z * (1 - s))
    if name == "tanh":
        return 1 - a * a
    if name == "sigmoid":
        return a * (1 - a)
    raise NetworkShapeError(f"Unknown activation: {name}. Must be one of: {ACTIVATIONS}")


@dataclass
class Dense:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise NetworkShapeError(
                f"Dense layer weight {self.weight.shape} and bias {self.bias.shape} do not match"
            )
        if self.activation not in ACTIVATIONS:
            raise NetworkShapeError(f"Unknown activation: {self.activation}")

    @property
    def input_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def output_dim(self) -> int:
        return int(self.weight.shape[0])

    def parameters(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Any]:
        z = x @ self.weight.T + self.bias
        a = activate(self.activation, z)
        return a, (x, z, a)

    def backward(self, cache: Any, grad: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        x, z, a = cache
        dz = grad * activation_grad(self.activation, z, a)
        dz64 = dz.astype(np.float64)
        grad_weight = (dz64.T @ x.astype(np.float64)).astype(self.weight.dtype)
        grad_bias = dz64.sum(axis=0).astype(self.bias.dtype)
        return dz @ self.weight, [grad_weight, grad_bias]


@dataclass
class Residual:
    """x + outer(inner(x)) with a SiLU inner layer and a linear outer layer."""

    inner: Dense
    outer: Dense

    def __post_init__(self) -> None:
        if self.outer.output_dim != self.inner.input_dim or self.outer.input_dim != self.inner.output_dim:
            raise NetworkShapeError("Residual branch must map the width back onto itself")

    @property
    def input_dim(self) -> int:
        return self.inner.input_dim

    @property
    def output_dim(self) -> int:
        return self.outer.output_dim

    def parameters(self) -> list[np.ndarray]:
        return self.inner.parameters() + self.outer.parameters()

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Any]:
        h, inner_cache = self.inner.forward(x)
        y, outer_cache = self.outer.forward(h)
        return x + y, (inner_cache, outer_cache)

    def backward(self, cache: Any, grad: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        inner_cache, outer_cache = cache
        grad_h, outer_grads = self.outer.backward(outer_cache, grad)
        grad_x, inner_grads = self.inner.backward(inner_cache, grad_h)
        return grad + grad_x, inner_grads + outer_grads


Layer = Dense | Residual


@dataclass
class Network:
    layers: list[Layer]

    def __post_init__(self) -> None:
        if not self.layers:
            raise NetworkShapeError("A network needs at least one layer")
        for previous, current in zip(self.layers[:-1], self.layers[1:], strict=True):
            if previous.output_dim != current.input_dim:
                raise NetworkShapeError(
                    f"Layer dimensions do not chain: {previous.output_dim} -> {current.input_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0].parameters()[0].dtype

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def _as_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise NetworkShapeError(
                f"Expected input with {self.input_dim} features, got shape {x.shape}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        single = np.ndim(x) == 1
        out, _ = self.forward_with_cache(x)
        return out[0] if single else out

    def forward_with_cache(self, x: np.ndarray) -> tuple[np.ndarray, list[Any]]:
        h = self._as_batch(x)
        caches = []
        for layer in self.layers:
            h, cache = layer.forward(h)
            caches.append(cache)
        return h, caches

    def backward(self, caches: list[Any], grad_out: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """
        Reverse-mode pass through the cached forward evaluation.

        Returns:
            (input gradient, parameter gradients aligned with ``parameters()``)
        """
        grad = np.asarray(grad_out, dtype=self.dtype)
        if grad.ndim == 1:
            grad = grad[None, :]
        if grad.shape[1] != self.output_dim:
            raise NetworkShapeError(
                f"Upstream gradient has {grad.shape[1]} features, expected {self.output_dim}"
            )
        grads: list[list[np.ndarray]] = []
        for layer, cache in zip(reversed(self.layers), reversed(caches), strict=True):
            grad, layer_grads = layer.backward(cache, grad)
            grads.append(layer_grads)
        return grad, [g for layer_grads in reversed(grads) for g in layer_grads]

    def copy(self) -> "Network":
        return Network(layers=_copy_layers(self.layers))

    def load_parameters(self, values: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(values) != len(params):
            raise NetworkShapeError(f"Expected {len(params)} parameter arrays, got {len(values)}")
        for target, value in zip(params, values, strict=True):
            if target.shape != value.shape:
                raise NetworkShapeError(f"Parameter shape {value.shape} does not match {target.shape}")
            target[...] = value


def _copy_layers(layers: list[Layer]) -> list[Layer]:
    copied: list[Layer] = []
    for layer in layers:
        if isinstance(layer, Dense):
            copied.append(Dense(layer.weight.copy(), layer.bias.copy(), layer.activation))
        else:
            copied.append(Residual(_copy_layers([layer.inner])[0], _copy_layers([layer.outer])[0]))  # type: ignore[arg-type]
    return copied


def parameter_digest(net: Network) -> str:
    digest = hashlib.sha256()
    for param in net.parameters():
        digest.update(np.ascontiguousarray(param).tobytes())
    return digest.hexdigest()


def _he_dense(
    rng: np.random.Generator, fan_in: int, fan_out: int, activation: str, dtype: Any, scale: float = 1.0
) -> Dense:
    std = scale * np.sqrt(2.0 / fan_in)
    return Dense(
        weight=(rng.normal(0.0, std, size=(fan_out, fan_in))).astype(dtype),
        bias=np.zeros(fan_out, dtype=dtype),
        activation=activation,
    )


def build_mlp(
    sizes: list[int],
    activation: str = "silu",
    output_activation: str = "identity",
    seed: int = 0,
    dtype: Any = np.float32,
    final_scale: float = 1.0,
) -> Network:
    """Plain stack of dense layers with He-style initialisation."""
    if len(sizes) < 2:
        raise NetworkShapeError(f"An MLP needs at least input and output sizes, got: {sizes}")
    rng = np.random.default_rng(seed)
    layers: list[Layer] = []
    for index, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:], strict=True)):
        last = index == len(sizes) - 2
        layers.append(
            _he_dense(
                rng,
                fan_in,
                fan_out,
                output_activation if last else activation,
                dtype,
                final_scale if last else 1.0,
            )
        )
    return Network(layers)


def build_residual_net(
    input_dim: int,
    hidden: int,
    blocks: int,
    output_dim: int,
    seed: int = 0,
    dtype: Any = np.float32,
    final_scale: float = 0.1,
    output_activation: str = "identity",
) -> Network:
    """Dense stem, ``blocks`` residual blocks and a down-scaled dense head."""
    rng = np.random.default_rng(seed)
    layers: list[Layer] = [_he_dense(rng, input_dim, hidden, "silu", dtype)]
    for _ in range(blocks):
        layers.append(
            Residual(
                inner=_he_dense(rng, hidden, hidden, "silu", dtype),
                outer=_he_dense(rng, hidden, hidden, "identity", dtype, scale=0.1),
            )
        )
    layers.append(_he_dense(rng, hidden, output_dim, output_activation, dtype, final_scale))
    return Network(layers)
