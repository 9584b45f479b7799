"""Sequential network container with shape checking and stale-cache detection."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .layers import ConfigurationError, Layer

_tokens = itertools.count()


@dataclass(frozen=True)
class Cache:
    token: int
    version: int
    layer_caches: tuple


class Network:
    def __init__(self, name: str, input_shape: tuple, layers: list[Layer], dtype=np.float32):
        self.name = name
        self.input_shape = tuple(int(s) for s in input_shape)
        self.layers = list(layers)
        self.dtype = np.dtype(dtype)
        self._token = next(_tokens)
        self._version = 0
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.out_shape(shape)
            except ConfigurationError as exc:
                raise ConfigurationError(f"{name} layer {i} ({layer.kind}): {exc}") from None
        self.output_shape = shape

    def init_params(self, rng: np.random.Generator) -> "Network":
        for layer in self.layers:
            layer.init_params(rng, self.dtype)
        self._version += 1
        return self

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    def set_params(self, new_params) -> None:
        new_params = list(new_params)
        current = self.params
        if len(new_params) != len(current):
            raise ConfigurationError(f"{self.name}: expected {len(current)} parameter arrays, got {len(new_params)}")
        it = iter(new_params)
        for layer in self.layers:
            updated = []
            for old in layer.params:
                arr = np.asarray(next(it), dtype=self.dtype)
                if arr.shape != old.shape:
                    raise ConfigurationError(f"{self.name}: parameter shape {arr.shape} != {old.shape}")
                updated.append(arr)
            layer.params = updated
        self._version += 1

    def spec(self) -> dict:
        return {"name": self.name, "input_shape": list(self.input_shape),
                "layers": [layer.spec() for layer in self.layers]}

    def forward(self, x) -> tuple[np.ndarray, Cache]:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ConfigurationError(
                f"{self.name} layer 0 expects input {self.input_shape}, got {x.shape[1:]}"
            )
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x)
            caches.append(c)
        return x, Cache(self._token, self._version, tuple(caches))

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: Cache, dy) -> tuple[list[np.ndarray], np.ndarray]:
        """Return (parameter gradients in ``params`` order, input gradient)."""
        if cache.token != self._token or cache.version != self._version:
            raise RuntimeError(f"{self.name}: cache is stale or from another network")
        dy = np.asarray(dy, dtype=self.dtype)
        grads = []
        for layer, c in zip(reversed(self.layers), reversed(cache.layer_caches)):
            dy, g = layer.backward(c, dy)
            grads.append(g)
        return [g for layer_grads in reversed(grads) for g in layer_grads], dy
