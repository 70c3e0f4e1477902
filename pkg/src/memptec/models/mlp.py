"""Feed-forward network: ReLU hidden layers, sigmoid output, Adam updates."""

from __future__ import annotations

import numpy as np

from .base import log_loss, sigmoid


def init_params(sizes, rng) -> list:
    """He-initialised (W, b) per layer for layer widths ``sizes``."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params, X):
    """Output probabilities and the activations kept for backprop."""
    acts = [X]
    h = X
    for W, b in params[:-1]:
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    W, b = params[-1]
    z = (h @ W + b).ravel()
    return sigmoid(z), z, acts


def loss_and_grad(params, X, y, l2: float = 0.0):
    """Mean cross-entropy (+ l2/2 * sum of squared weights) and its gradient."""
    _, z, acts = forward(params, X)
    n = len(y)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W, _ in params)
    delta = ((sigmoid(z) - y) / n)[:, None]
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        gW = acts[i].T @ delta + l2 * W
        gb = delta.sum(axis=0)
        grads[i] = (gW, gb)
        if i:
            delta = (delta @ W.T) * (acts[i] > 0)
    return loss, grads


def fit_mlp(X, y, Xva, yva, hp, seed):
    """Mini-batch Adam; stops after ``patience`` epochs without validation gain
    and restores the best-by-validation weights."""
    rng = np.random.default_rng(seed)
    n, d = X.shape
    params = init_params([d, *hp["hidden"], 1], rng)
    m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    lr, bs = hp["learning_rate"], hp["batch_size"]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    best_loss, best_params, stale = np.inf, params, 0
    history = []
    for epoch in range(hp["epochs"]):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            _, grads = loss_and_grad(params, X[idx], y[idx], hp["l2"])
            t += 1
            new = []
            for i, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
                mW, mb = m[i]
                vW, vb = v[i]
                mW = beta1 * mW + (1 - beta1) * gW
                mb = beta1 * mb + (1 - beta1) * gb
                vW = beta2 * vW + (1 - beta2) * gW * gW
                vb = beta2 * vb + (1 - beta2) * gb * gb
                m[i], v[i] = (mW, mb), (vW, vb)
                c1, c2 = 1 - beta1 ** t, 1 - beta2 ** t
                W = W - lr * (mW / c1) / (np.sqrt(vW / c2) + eps)
                b = b - lr * (mb / c1) / (np.sqrt(vb / c2) + eps)
                new.append((W, b))
            params = new
        if Xva is not None:
            loss = log_loss(forward(params, Xva)[0], yva)
            history.append(loss)
            if loss < best_loss - 1e-9:
                best_loss, best_params, stale = loss, params, 0
            else:
                stale += 1
                if stale >= hp["patience"]:
                    break
    if Xva is not None:
        params = best_params
    return {"layers": [{"W": W, "b": b} for W, b in params]}, {"epochs_run": epoch + 1, "valid_loss": history}


def _unpack(parameters):
    return [(layer["W"], layer["b"]) for layer in parameters["layers"]]


def proba_mlp(parameters, X):
    return forward(_unpack(parameters), X)[0]
