"""Multilayer perceptron: ReLU hidden layers, softmax output, cross-entropy
loss, minibatch SGD with momentum.

Weights come from a seed-derived stream with He scaling.  Batch order is
seed-derived per epoch, so training is deterministic but (unlike RF/SVM)
documented as position-dependent.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergedError
from ..seeding import derive_rng
from .base import ClassifierModel, LabeledMatrix

DEFAULT_PARAMS = {
    "hidden": (64, 64),
    "lr": 1e-3,
    "momentum": 0.9,
    "epochs": 200,
    "batch_size": 32,
}


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward(weights, X):
    """Return activations per layer; last entry is the softmax output."""
    acts = [X]
    a = X
    for i, (W, b) in enumerate(weights):
        z = a @ W + b
        a = _softmax(z) if i == len(weights) - 1 else np.maximum(z, 0.0)
        acts.append(a)
    return acts


def _loss_and_grads(weights, X, y_onehot):
    """Mean cross-entropy and exact gradients for every weight matrix."""
    acts = _forward(weights, X)
    out = acts[-1]
    n = X.shape[0]
    loss = float(-np.sum(y_onehot * np.log(np.clip(out, 1e-300, None))) / n)
    grads = []
    delta = (out - y_onehot) / n
    for i in range(len(weights) - 1, -1, -1):
        a_prev = acts[i]
        grads.append((a_prev.T @ delta, delta.sum(axis=0)))
        if i > 0:
            delta = delta @ weights[i][0].T
            delta = delta * (acts[i] > 0.0)
    grads.reverse()
    return loss, grads


class MlpModel(ClassifierModel):
    kind = "mlp"

    def __init__(self, dim, n_classes, params, weights, loss_history=None):
        super().__init__(dim, n_classes, params)
        self.weights = weights  # list of (W, b)
        self.loss_history = loss_history or []

    def predict_proba(self, x) -> np.ndarray:
        arr, single = self._check_input(x)
        out = _forward(self.weights, arr)[-1]
        return out[0] if single else out

    # -- gradient-check hooks -------------------------------------------
    def flatten_params(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b.ravel()])
                               for W, b in self.weights])

    def set_flat_params(self, flat: np.ndarray) -> None:
        pos = 0
        for i, (W, b) in enumerate(self.weights):
            nw, nb = W.size, b.size
            self.weights[i] = (flat[pos:pos + nw].reshape(W.shape).copy(),
                               flat[pos + nw:pos + nw + nb].copy())
            pos += nw + nb

    def loss_and_flat_grad(self, X, y) -> tuple[float, np.ndarray]:
        y_onehot = np.eye(self.n_classes)[np.asarray(y, dtype=int)]
        loss, grads = _loss_and_grads(self.weights, np.asarray(X, dtype=float),
                                      y_onehot)
        flat = np.concatenate([np.concatenate([gw.ravel(), gb.ravel()])
                               for gw, gb in grads])
        return loss, flat


def init_weights(dim: int, hidden, n_classes: int, seed: int) -> list:
    """He-scaled Gaussian init from a seed-derived stream; zero biases."""
    sizes = [dim] + list(hidden) + [n_classes]
    weights = []
    for i in range(len(sizes) - 1):
        rng = derive_rng(seed, "mlp-layer", i)
        fan_in = sizes[i]
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(sizes[i], sizes[i + 1]))
        weights.append((W, np.zeros(sizes[i + 1])))
    return weights


def train_mlp(data: LabeledMatrix, params: dict | None = None, seed: int = 0) -> MlpModel:
    p = dict(DEFAULT_PARAMS)
    p.update(params or {})
    X, y = data.X, data.y
    n = data.n_rows
    y_onehot = np.eye(data.n_classes)[y]
    weights = init_weights(data.dim, p["hidden"], data.n_classes, seed)
    velocity = [(np.zeros_like(W), np.zeros_like(b)) for W, b in weights]
    lr, mu = float(p["lr"]), float(p["momentum"])
    batch = max(1, int(p["batch_size"]))
    history = []
    for epoch in range(int(p["epochs"])):
        perm = derive_rng(seed, "mlp-epoch", epoch).permutation(n)
        epoch_losses = []
        for start in range(0, n, batch):
            rows = perm[start:start + batch]
            loss, grads = _loss_and_grads(weights, X[rows], y_onehot[rows])
            if not np.isfinite(loss):
                raise DivergedError(f"loss became non-finite at epoch {epoch}")
            epoch_losses.append(loss)
            for i, ((gW, gb), (vW, vb)) in enumerate(zip(grads, velocity)):
                vW = mu * vW - lr * gW
                vb = mu * vb - lr * gb
                velocity[i] = (vW, vb)
                W, b = weights[i]
                weights[i] = (W + vW, b + vb)
        history.append(float(np.mean(epoch_losses)))
    return MlpModel(data.dim, data.n_classes, p, weights, history)
