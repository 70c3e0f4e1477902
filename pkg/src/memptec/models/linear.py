"""Logistic regression (glm) and linear hinge-loss SVM with Platt calibration."""

from __future__ import annotations

import warnings

import numpy as np

from .base import log_loss, sigmoid


def fit_glm(X, y, Xva, yva, hp, seed):
    """Full-batch gradient descent on mean log-loss + (l2/2)|w|^2; bias unpenalised.

    The weights with the lowest validation loss are kept; training stops after
    ``patience`` epochs without improvement.
    """
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    lr, l2 = hp["learning_rate"], hp["l2"]
    best = (np.inf, w.copy(), b)
    stale = 0
    history = []
    for epoch in range(hp["epochs"]):
        p = sigmoid(X @ w + b)
        err = p - y
        w -= lr * (X.T @ err / n + l2 * w)
        b -= lr * float(err.mean())
        if Xva is not None:
            loss = log_loss(sigmoid(Xva @ w + b), yva)
            history.append(loss)
            if loss < best[0] - 1e-12:
                best, stale = (loss, w.copy(), b), 0
            else:
                stale += 1
                if stale >= hp["patience"]:
                    break
    if Xva is not None:
        _, w, b = best
    return {"weights": w, "bias": float(b)}, {"epochs_run": epoch + 1, "valid_loss": history}


def proba_glm(params, X):
    return sigmoid(X @ params["weights"] + params["bias"])


def fit_platt(scores, y, iters: int = 100):
    """Fit p = sigmoid(a*s + b) by damped Newton steps on smoothed targets."""
    n_pos = float(y.sum())
    n_neg = float(len(y) - n_pos)
    t = np.where(y > 0, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))

    def loss(a, b):
        z = a * scores + b
        return float(np.sum(np.logaddexp(0, z) - t * z))

    a, b = 0.0, float(np.log((n_pos + 1) / (n_neg + 1)))
    current = loss(a, b)
    for _ in range(iters):
        p = sigmoid(a * scores + b)
        g = np.array([np.dot(p - t, scores), np.sum(p - t)])
        w = p * (1 - p)
        H = np.array([[np.dot(w, scores * scores), np.dot(w, scores)],
                      [np.dot(w, scores), w.sum()]]) + 1e-12 * np.eye(2)
        step = np.linalg.solve(H, g)
        scale = 1.0
        while scale > 1e-8:
            trial = loss(a - scale * step[0], b - scale * step[1])
            if trial <= current:
                break
            scale /= 2
        else:
            break
        a, b = a - scale * step[0], b - scale * step[1]
        improvement = current - trial
        current = trial
        if improvement < 1e-12:
            break
    return float(a), float(b)


def fit_svm(X, y, Xva, yva, hp, seed):
    """Mini-batch Pegasos on hinge loss with lambda = 1/(C n); iterate averaging.

    The bias rides along as a constant input column. Scores are mapped to
    probabilities by a logistic fit on validation scores (training scores if
    no validation rows are given).
    """
    n, d = X.shape
    rng = np.random.default_rng(seed)
    lam = 1.0 / (hp["C"] * n)
    Xb = np.hstack([X, np.ones((n, 1))])
    ys = 2.0 * y - 1.0
    w = np.zeros(d + 1)
    avg = np.zeros(d + 1)
    n_avg = 0
    bs = hp["batch_size"]
    t = 0
    radius = 1.0 / np.sqrt(lam)
    half = hp["epochs"] // 2
    for epoch in range(hp["epochs"]):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            t += 1
            idx = order[start:start + bs]
            margin = ys[idx] * (Xb[idx] @ w)
            viol = margin < 1
            eta = 1.0 / (lam * t)
            grad = lam * w - (ys[idx][viol] @ Xb[idx][viol]) / len(idx)
            w = w - eta * grad
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
            if epoch >= half:
                n_avg += 1
                avg += (w - avg) / n_avg
    w = avg if n_avg else w
    if Xva is not None and len(np.unique(yva)) == 2:
        cal_X, cal_y = Xva, yva
    else:
        warnings.warn("svm: calibrating on training scores (no two-class validation set)")
        cal_X, cal_y = X, y
    a, b = fit_platt(cal_X @ w[:-1] + w[-1], cal_y)
    return {"weights": w[:-1], "bias": float(w[-1]), "platt_a": a, "platt_b": b}, {"iterations": t}


def svm_scores(params, X):
    return X @ params["weights"] + params["bias"]


def proba_svm(params, X):
    return sigmoid(params["platt_a"] * svm_scores(params, X) + params["platt_b"])
