"""Independent oracles the tests check the implementation against.

Everything here must stay decoupled from the code paths under test: the
centroid classifier is plain numpy distance arithmetic, gradients come
from central differences, and the metric tally recounts decisions by hand.
"""

from __future__ import annotations

import numpy as np


def zscore_fit(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)
    return mu, sd


def nearest_centroid_cv(X: np.ndarray, y: np.ndarray, folds: int = 5, seed: int = 0) -> float:
    """Mean k-fold accuracy of a z-scored nearest-centroid classifier."""
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=int)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = np.arange(len(idx)) % folds
    accs = []
    for f in range(folds):
        tr, te = fold != f, fold == f
        mu, sd = zscore_fit(X[tr])
        Z, Zt = (X[tr] - mu) / sd, (X[te] - mu) / sd
        centroids = np.array([Z[y[tr] == c].mean(axis=0) for c in np.unique(y)])
        classes = np.unique(y)
        d = ((Zt[:, None, :] - centroids[None]) ** 2).sum(axis=-1)
        pred = classes[np.argmin(d, axis=1)]
        accs.append(float(np.mean(pred == y[te])))
    return float(np.mean(accs))


def numerical_gradients(fn, params: dict, eps: float = 1e-3) -> dict:
    """Central finite differences of a scalar function of a param dict."""
    grads = {}
    for key, value in params.items():
        g = np.zeros_like(value)
        flat = value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = fn(params)
            flat[i] = orig - eps
            lo = fn(params)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        grads[key] = g
    return grads


def tally_metrics(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int = 5):
    """Recount accuracy/precision/recall from raw decisions, one by one."""
    correct = sum(1 for t, p in zip(y_true, y_pred) if t == p)
    accuracy = correct / len(y_true)
    precision, recall = [], []
    for c in range(n_classes):
        tp = sum(1 for t, p in zip(y_true, y_pred) if p == c and t == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if p == c and t != c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if p != c and t == c)
        precision.append(tp / (tp + fp) if tp + fp else 0.0)
        recall.append(tp / (tp + fn) if tp + fn else 0.0)
    return accuracy, np.array(precision), np.array(recall)


def fir_frequency_response(taps: np.ndarray, freq_hz: float, rate: float = 250.0) -> complex:
    """Direct DTFT of the tap values at one frequency."""
    n = np.arange(len(taps))
    return complex(np.sum(taps * np.exp(-2j * np.pi * freq_hz * n / rate)))
