"""Adam and the geometric learning-rate schedule."""

from __future__ import annotations

import numpy as np


def exponential_lr(start: float, end: float, episode: float, episodes: int) -> float:
    """Geometric interpolation from ``start`` at episode 0 to ``end`` at ``episodes``."""
    if episodes <= 0:
        return end
    frac = min(max(episode / episodes, 0.0), 1.0)
    return start * (end / start) ** frac


class Adam:
    def __init__(self, params: list[np.ndarray], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.skipped = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> bool:
        """In-place update. Returns False (and changes nothing) on a non-finite gradient."""
        if not all(np.all(np.isfinite(g)) for g in grads):
            self.skipped += 1
            return False
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        step = lr * np.sqrt(c2) / c1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            g2 = np.square(g)
            g2 *= 1.0 - b2
            v += g2
            denom = np.sqrt(v, out=g2)
            denom += self.eps
            upd = np.divide(m, denom, out=denom)
            upd *= step
            p -= upd.astype(p.dtype, copy=False)
        return True

    def state(self) -> dict[str, np.ndarray]:
        out = {"t": np.array(self.t), "skipped": np.array(self.skipped)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m{i}"] = m
            out[f"v{i}"] = v
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["t"])
        self.skipped = int(state["skipped"])
        for i in range(len(self.m)):
            self.m[i] = np.array(state[f"m{i}"], dtype=self.m[i].dtype)
            self.v[i] = np.array(state[f"v{i}"], dtype=self.v[i].dtype)
