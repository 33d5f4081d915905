"""Fully connected ReLU network with hand-written reverse mode."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MlpCache:
    inputs: list[np.ndarray]  # input of every layer
    masks: list[np.ndarray]  # ReLU activity of every hidden layer


class Mlp:
    """``in -> hidden... -> out`` with ReLU between layers and a linear head.

    Parameters live in a flat list ``[W0, b0, W1, b1, ...]`` so optimizers
    and target updates can treat every network the same way.
    """

    def __init__(self, sizes: tuple[int, ...], rng: np.random.Generator, dtype=np.float32, head_scale: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        self.dtype = np.dtype(dtype)
        self.params: list[np.ndarray] = []
        n_layers = len(self.sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if i == n_layers - 1:
                bound *= head_scale
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)).astype(self.dtype))
            self.params.append(np.zeros(fan_out, dtype=self.dtype))

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
        h = np.asarray(x, dtype=self.dtype)
        inputs, masks = [], []
        last = self.n_layers - 1
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            inputs.append(h)
            h = h @ W
            h += b
            if i < last:
                np.maximum(h, 0, out=h)
                masks.append(h > 0)
        return h, MlpCache(inputs, masks)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(
        self, cache: MlpCache, grad_out: np.ndarray, param_grads: bool = True, input_grad: bool = True
    ) -> tuple[list[np.ndarray] | None, np.ndarray | None]:
        """Return (parameter gradients, input gradient) for ``sum(grad_out * out)``."""
        g = np.asarray(grad_out, dtype=self.dtype)
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        for i in reversed(range(self.n_layers)):
            W = self.params[2 * i]
            if param_grads:
                grads[2 * i] = cache.inputs[i].T @ g
                grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = g @ W.T
                g *= cache.masks[i - 1]
            elif input_grad:
                g = g @ W.T
            else:
                g = None
        return (grads if param_grads else None), g

    def copy(self) -> "Mlp":
        clone = object.__new__(Mlp)
        clone.sizes = self.sizes
        clone.dtype = self.dtype
        clone.params = [p.copy() for p in self.params]
        return clone

    def astype(self, dtype) -> "Mlp":
        clone = self.copy()
        clone.dtype = np.dtype(dtype)
        clone.params = [p.astype(clone.dtype) for p in clone.params]
        return clone
