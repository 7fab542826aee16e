"""Minimal feedforward nets: ReLU MLP with hand-rolled backprop and Adam.

Parameters live in a flat dict {"W0": ..., "b0": ..., "W1": ...}; weights
initialize uniform in +-1/sqrt(fan_in).  Everything is float64 so analytic
gradients can be checked against central finite differences tightly.
"""

from __future__ import annotations

import numpy as np

Params = dict[str, np.ndarray]


def init_params(rng: np.random.Generator, sizes: tuple[int, ...]) -> Params:
    """sizes = (in, hidden..., out)."""
    params: Params = {}
    for i in range(len(sizes) - 1):
        fan_in = sizes[i]
        bound = 1.0 / np.sqrt(fan_in)
        params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, sizes[i + 1]))
        params[f"b{i}"] = rng.uniform(-bound, bound, size=(sizes[i + 1],))
    return params


def n_layers(params: Params) -> int:
    return sum(1 for k in params if k.startswith("W"))


def forward(params: Params, x: np.ndarray) -> np.ndarray:
    y, _ = forward_cached(params, x)
    return y


def forward_cached(params: Params, x: np.ndarray):
    """Returns (output, cache); hidden layers are ReLU, the head is linear."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    depth = n_layers(params)
    activations = [x]
    h = x
    for i in range(depth):
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        h = np.maximum(z, 0.0) if i < depth - 1 else z
        activations.append(h)
    return h, activations


def backward(params: Params, cache: list[np.ndarray], grad_out: np.ndarray) -> Params:
    """Gradients of sum(output * grad_out) w.r.t. every parameter."""
    depth = n_layers(params)
    grads: Params = {}
    delta = np.asarray(grad_out, dtype=float)
    for i in reversed(range(depth)):
        h_in, h_out = cache[i], cache[i + 1]
        if i < depth - 1:
            delta = delta * (h_out > 0)
        grads[f"W{i}"] = h_in.T @ delta
        grads[f"b{i}"] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params[f"W{i}"].T
    return grads


def clone_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}


class Adam:
    """Adaptive-moment optimizer over a parameter dict."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Params = {}
        self.v: Params = {}

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict:
        return {"t": self.t, "m": clone_params(self.m), "v": clone_params(self.v)}

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        self.m = clone_params(state["m"])
        self.v = clone_params(state["v"])
