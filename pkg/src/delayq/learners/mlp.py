"""Small numpy MLP for DQN: forward, backprop, Adam, and the train step.

Two hidden ReLU layers of 128 units map the encoded inventory state to one
action value per price level (about 22k parameters at the default sizes).
A numpy implementation keeps runs bit-reproducible and lets gradient
checks run against plain finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MLP_SCHEMA_VERSION = 1


@dataclass
class MlpParams:
    weights: list
    biases: list

    @classmethod
    def init(
        cls,
        in_dim: int,
        hidden: tuple = (128, 128),
        out_dim: int = 13,
        rng: np.random.Generator | None = None,
    ) -> "MlpParams":
        """He-initialized weights, zero biases."""
        rng = rng or np.random.default_rng(0)
        dims = [in_dim, *hidden, out_dim]
        weights, biases = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)))
            biases.append(np.zeros(b))
        return cls(weights=weights, biases=biases)

    @classmethod
    def zeros(cls, in_dim: int, hidden: tuple = (128, 128), out_dim: int = 13) -> "MlpParams":
        dims = [in_dim, *hidden, out_dim]
        return cls(
            weights=[np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])],
            biases=[np.zeros(b) for b in dims[1:]],
        )

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def check_finite(self) -> None:
        for arr in (*self.weights, *self.biases):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite MLP parameters")

    def save(self, path) -> None:
        doc = {
            "schema_version": MLP_SCHEMA_VERSION,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc))

    @classmethod
    def load(cls, path) -> "MlpParams":
        doc = json.loads(Path(path).read_text())
        if doc.get("schema_version") != MLP_SCHEMA_VERSION:
            raise ValueError(f"unsupported MLP schema {doc.get('schema_version')}")
        return cls(
            weights=[np.array(w, dtype=float) for w in doc["weights"]],
            biases=[np.array(b, dtype=float) for b in doc["biases"]],
        )


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; accepts a single state or a batch."""
    params.check_finite()
    h = np.atleast_2d(np.asarray(x, dtype=float))
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    out = h @ params.weights[-1] + params.biases[-1]
    return out if np.asarray(x).ndim > 1 else out[0]


def _forward_cached(params: MlpParams, x: np.ndarray):
    h = np.atleast_2d(np.asarray(x, dtype=float))
    activations = [h]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    out = h @ params.weights[-1] + params.biases[-1]
    return out, activations


def _backward(params: MlpParams, activations: list, grad_out: np.ndarray):
    """Gradients of a scalar loss given d(loss)/d(output)."""
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    delta = grad_out
    for layer in range(len(params.weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * (activations[layer] > 0.0)
    return grads_w, grads_b


class Adam:
    """Standard Adam moments for the MLP parameter list."""

    def __init__(self, params: MlpParams, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(self, params: MlpParams, grads_w: list, grads_b: list, lr: float) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for i, g in enumerate(grads_w):
            self.m_w[i] = self.beta1 * self.m_w[i] + (1 - self.beta1) * g
            self.v_w[i] = self.beta2 * self.v_w[i] + (1 - self.beta2) * g * g
            params.weights[i] -= lr * (self.m_w[i] / b1c) / (np.sqrt(self.v_w[i] / b2c) + self.eps)
        for i, g in enumerate(grads_b):
            self.m_b[i] = self.beta1 * self.m_b[i] + (1 - self.beta1) * g
            self.v_b[i] = self.beta2 * self.v_b[i] + (1 - self.beta2) * g * g
            params.biases[i] -= lr * (self.m_b[i] / b1c) / (np.sqrt(self.v_b[i] / b2c) + self.eps)


def td_loss_gradients(
    params: MlpParams,
    target_params: MlpParams,
    batch: dict,
    gamma: float,
):
    """Mean squared TD error and its parameter gradients for one batch."""
    s, a = batch["s"], batch["a"]
    q, activations = _forward_cached(params, s)
    q_next = mlp_forward(target_params, batch["s_next"])
    bootstrap = np.where(batch["terminal"], 0.0, gamma * q_next.max(axis=1))
    y = batch["r"] + bootstrap
    n = len(a)
    td = q[np.arange(n), a] - y
    loss = float(np.mean(td**2))
    grad_out = np.zeros_like(q)
    grad_out[np.arange(n), a] = 2.0 * td / n
    grads_w, grads_b = _backward(params, activations, grad_out)
    return loss, grads_w, grads_b


def dqn_train_step(
    params: MlpParams,
    target_params: MlpParams,
    records: list,
    gamma: float,
    adam: Adam,
    encode,
    lr: float = 1e-3,
) -> float:
    """One Adam step on the mean squared TD error of a sampled batch."""
    if not records:
        raise ValueError("empty batch")
    batch = {
        "s": np.stack([encode(r.s) for r in records]),
        "a": np.array([r.a for r in records], dtype=int),
        "r": np.array([r.reward_target for r in records], dtype=float),
        "s_next": np.stack([encode(r.s_next) for r in records]),
        "terminal": np.array([r.terminal for r in records], dtype=bool),
    }
    loss, grads_w, grads_b = td_loss_gradients(params, target_params, batch, gamma)
    if lr > 0.0:
        adam.step(params, grads_w, grads_b, lr)
    return loss


def encode_inventory(inventory: int, capacity: int) -> np.ndarray:
    """Normalized inventory plus a (capacity+1)-way one-hot."""
    x = np.zeros(capacity + 2)
    x[0] = inventory / capacity
    x[1 + inventory] = 1.0
    return x
