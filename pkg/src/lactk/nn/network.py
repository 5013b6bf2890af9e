"""Sequential network container and the layer-spec vocabulary."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import layers as L

__all__ = ["LayerSpec", "build_layer", "Network"]


@dataclass
class LayerSpec:
    """Declarative layer description: a kind plus kind-specific hyperparameters."""

    kind: str
    params: dict[str, Any] = field(default_factory=dict)


_NO_RNG_KINDS = {
    "relu",
    "leaky_relu",
    "sigmoid",
    "upsample2x",
    "max_over_time",
    "dropout",
    "reshape",
    "batchnorm",
}


def build_layer(spec: LayerSpec, rng: np.random.Generator, dtype=np.float32) -> L.Layer:
    kind, p = spec.kind, spec.params
    if kind == "dense":
        return L.Dense(p["in_features"], p["out_features"], rng, dtype=dtype)
    if kind == "conv1d":
        return L.Conv1d(p["window"], p["in_channels"], p["out_channels"], rng, dtype=dtype)
    if kind == "conv2d":
        return L.Conv2d(
            p["in_channels"],
            p["out_channels"],
            p["kernel_size"],
            rng,
            stride=p.get("stride", 1),
            padding=p.get("padding", 0),
            dtype=dtype,
        )
    if kind == "batchnorm":
        return L.BatchNorm(p["num_features"], dtype=dtype)
    if kind == "relu":
        return L.ReLU()
    if kind == "leaky_relu":
        return L.LeakyReLU(p.get("negative_slope", 0.2))
    if kind == "sigmoid":
        return L.Sigmoid()
    if kind == "upsample2x":
        return L.Upsample2x()
    if kind == "max_over_time":
        return L.MaxOverTime()
    if kind == "dropout":
        return L.Dropout(p["rate"])
    if kind == "reshape":
        return L.Reshape(tuple(p["tail_shape"]))
    if kind == "residual_block":
        return L.ResidualBlock(p["channels"], rng, dtype=dtype)
    raise ValueError(f"unknown layer kind {kind!r}")


class Network:
    """An ordered layer stack with explicit forward caches.

    ``forward`` returns (output, caches); ``backward`` consumes the caches in
    reverse and accumulates parameter gradients. Shape errors raised inside a
    layer are re-raised with the offending layer index.
    """

    def __init__(self, net_layers: list[L.Layer], dtype=np.float32):
        self.layers = net_layers
        self.dtype = dtype

    @classmethod
    def from_specs(cls, specs: list[LayerSpec], rng: np.random.Generator, dtype=np.float32):
        return cls([build_layer(s, rng, dtype) for s in specs], dtype=dtype)

    def forward(self, x, mode: str = "train", rng=None):
        x = np.asarray(x, dtype=self.dtype)
        caches = []
        for i, layer in enumerate(self.layers):
            try:
                x, cache = layer.forward(x, mode, rng)
            except ValueError as e:
                raise ValueError(f"layer {i} ({layer.kind}): {e}") from e
            caches.append(cache)
        return x, caches

    def backward(self, caches, gy):
        gy = np.asarray(gy, dtype=self.dtype)
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            gy = layer.backward(cache, gy)
        return gy

    def parameters(self) -> dict[str, L.Parameter]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.params().items():
                out[f"{i:02d}_{layer.kind}.{name}"] = p
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Parameters plus persistent layer state (batchnorm running stats)."""
        out = {name: p.value for name, p in self.parameters().items()}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.state().items():
                out[f"{i:02d}_{layer.kind}.{name}"] = arr
        return out

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad[...] = 0
