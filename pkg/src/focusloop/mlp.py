"""Five-state attention classifier: one-hidden-layer MLP trained from
scratch with mini-batch Adam, cross-entropy loss and early stopping.

Everything is plain numpy and deterministic for a given (dataset, config,
seed): weight init, the stratified split and batch shuffling all come from
one seeded generator, so retraining writes a bit-identical model file.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import DegenerateDataset, EmptyDataset, ModelContractError
from .states import ALL_STATES, AttentionState, N_STATES
from .features import FEATURE_NAMES

MODEL_FORMAT = "focusloop-mlp"
MODEL_VERSION = 1
Z_CLAMP = 5.0


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 32
    batch_size: int = 32
    learning_rate: float = 1e-3
    max_epochs: int = 500
    patience: int = 10
    val_fraction: float = 0.2
    seed: int = 0


@dataclass
class MlpModel:
    w1: np.ndarray  # (input_dim, hidden)
    b1: np.ndarray
    w2: np.ndarray  # (hidden, 5)
    b2: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    feature_names: tuple[str, ...]
    degenerate_features: tuple[int, ...] = ()  # zero-variance columns, std forced to 1
    seed: int = 0
    config: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]


@dataclass(frozen=True)
class Classification:
    state: AttentionState
    probs: tuple[float, ...]
    window_end_us: int
    latency_us: float


def forward(model: MlpModel, features: np.ndarray, window_end_us: int = 0) -> Classification:
    """Single-vector inference; ties in the softmax go to the lowest class
    index (np.argmax picks the first maximum)."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.input_dim,):
        raise ModelContractError(
            f"feature dim {features.shape} does not match model input {model.input_dim}"
        )
    t0 = time.perf_counter_ns()
    probs = kernels.mlp_forward(
        features, model.mean, model.std, model.w1, model.b1, model.w2, model.b2
    )
    latency_us = (time.perf_counter_ns() - t0) / 1000.0
    idx = int(np.argmax(probs))
    return Classification(
        state=AttentionState.from_index(idx),
        probs=tuple(float(p) for p in probs),
        window_end_us=window_end_us,
        latency_us=latency_us,
    )


def _normalize(X: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return np.clip((X - mean) / std, -Z_CLAMP, Z_CLAMP)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def batch_probs(params: dict, Z: np.ndarray) -> np.ndarray:
    h = np.maximum(Z @ params["w1"] + params["b1"], 0.0)
    return _softmax(h @ params["w2"] + params["b2"])


def cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(np.clip(probs[np.arange(len(y)), y], 1e-300, None))))


def loss_and_grads(params: dict, Z: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
    """Mean cross-entropy and its analytic gradients for one batch.

    The gradient-check suite differentiates this same function numerically,
    so keep it free of side effects.
    """
    n = len(y)
    a1 = Z @ params["w1"] + params["b1"]
    h = np.maximum(a1, 0.0)
    probs = _softmax(h @ params["w2"] + params["b2"])
    loss = cross_entropy(probs, y)
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = {
        "w2": h.T @ delta,
        "b2": delta.sum(axis=0),
    }
    dh = delta @ params["w2"].T
    dh[a1 <= 0.0] = 0.0
    grads["w1"] = Z.T @ dh
    grads["b1"] = dh.sum(axis=0)
    return loss, grads


def _stratified_split(y: np.ndarray, val_fraction: float,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    train_idx, val_idx = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        n_val = max(1, int(round(len(idx) * val_fraction)))
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return np.sort(np.array(train_idx)), np.sort(np.array(val_idx))


@dataclass
class TrainingReport:
    train_losses: list[float]
    val_losses: list[float]
    best_epoch: int
    val_accuracy: float
    confusion: np.ndarray
    n_train: int
    n_val: int


def train(X: np.ndarray, y: np.ndarray, config: Optional[TrainConfig] = None,
          feature_names: Optional[tuple[str, ...]] = None) -> tuple[MlpModel, TrainingReport]:
    """Fit the classifier; early stopping restores the best-validation
    weights. Normalization stats come from the training split only."""
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) < 50:
        raise DegenerateDataset(f"need at least 50 examples, got {len(X)}")
    if len(np.unique(y)) < 2:
        raise DegenerateDataset("dataset holds a single class")
    if y.min() < 0 or y.max() >= N_STATES:
        raise DegenerateDataset("labels must be in 0..4")

    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = _stratified_split(y, config.val_fraction, rng)
    X_train, y_train = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    # constant columns can land at ~1e-16 instead of exactly zero
    degenerate_mask = std <= 1e-12 * (np.abs(mean) + 1.0)
    degenerate = tuple(int(i) for i in np.flatnonzero(degenerate_mask))
    std = np.where(degenerate_mask, 1.0, std)
    Z_train = _normalize(X_train, mean, std)
    Z_val = _normalize(X_val, mean, std)

    d, hdim = X.shape[1], config.hidden
    params = {
        "w1": rng.normal(0.0, np.sqrt(2.0 / d), size=(d, hdim)),
        "b1": np.zeros(hdim),
        "w2": rng.normal(0.0, np.sqrt(2.0 / hdim), size=(hdim, N_STATES)),
        "b2": np.zeros(N_STATES),
    }
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_val = np.inf
    best_epoch = 0
    best_params = {k: v.copy() for k, v in params.items()}
    train_losses: list[float] = []
    val_losses: list[float] = []
    stale = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(Z_train))
        epoch_loss = 0.0
        for i0 in range(0, len(order), config.batch_size):
            batch = order[i0 : i0 + config.batch_size]
            loss, grads = loss_and_grads(params, Z_train[batch], y_train[batch])
            epoch_loss += loss * len(batch)
            step += 1
            for k in params:
                adam_m[k] = beta1 * adam_m[k] + (1 - beta1) * grads[k]
                adam_v[k] = beta2 * adam_v[k] + (1 - beta2) * grads[k] ** 2
                m_hat = adam_m[k] / (1 - beta1**step)
                v_hat = adam_v[k] / (1 - beta2**step)
                params[k] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        train_losses.append(epoch_loss / len(Z_train))
        val_loss = cross_entropy(batch_probs(params, Z_val), y_val)
        val_losses.append(val_loss)
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    model = MlpModel(
        w1=best_params["w1"],
        b1=best_params["b1"],
        w2=best_params["w2"],
        b2=best_params["b2"],
        mean=mean,
        std=std,
        feature_names=tuple(feature_names or FEATURE_NAMES[: X.shape[1]]),
        degenerate_features=degenerate,
        seed=config.seed,
        config=asdict(config),
    )
    val_pred = np.argmax(batch_probs(best_params, Z_val), axis=1)
    report = TrainingReport(
        train_losses=train_losses,
        val_losses=val_losses,
        best_epoch=best_epoch,
        val_accuracy=float(np.mean(val_pred == y_val)),
        confusion=confusion_matrix(y_val, val_pred),
        n_train=len(y_train),
        n_val=len(y_val),
    )
    return model, report


def predict(model: MlpModel, X: np.ndarray) -> np.ndarray:
    Z = _normalize(np.asarray(X, dtype=np.float64), model.mean, model.std)
    params = {"w1": model.w1, "b1": model.b1, "w2": model.w2, "b2": model.b2}
    return np.argmax(batch_probs(params, Z), axis=1)


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    cm = np.zeros((N_STATES, N_STATES), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        cm[int(t), int(p)] += 1
    return cm


@dataclass
class EvalMetrics:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    confusion: np.ndarray
    n: int


def evaluate(model: MlpModel, X: np.ndarray, y: np.ndarray) -> EvalMetrics:
    """Argmax-decision metrics over a labeled dataset."""
    if len(X) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    y = np.asarray(y, dtype=np.int64)
    pred = predict(model, X)
    cm = confusion_matrix(y, pred)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(cm.sum(axis=0) > 0, np.diag(cm) / cm.sum(axis=0), 0.0)
        recall = np.where(cm.sum(axis=1) > 0, np.diag(cm) / cm.sum(axis=1), 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return EvalMetrics(
        accuracy=float(np.mean(pred == y)),
        precision=precision,
        recall=recall,
        f1=f1,
        confusion=cm,
        n=len(y),
    )


def cross_validate(X: np.ndarray, y: np.ndarray, folds: int = 5,
                   config: Optional[TrainConfig] = None) -> list[float]:
    """Stratified k-fold accuracies, deterministic per config seed."""
    config = config or TrainConfig()
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = np.arange(len(idx)) % folds
    accs = []
    for f in range(folds):
        test_mask = fold_of == f
        model, _ = train(X[~test_mask], y[~test_mask], config)
        accs.append(evaluate(model, X[test_mask], y[test_mask]).accuracy)
    return accs


def model_doc(model: MlpModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "classes": [s.wire_name for s in ALL_STATES],
        "feature_names": list(model.feature_names),
        "mean": model.mean.tolist(),
        "std": model.std.tolist(),
        "degenerate_features": list(model.degenerate_features),
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
        "seed": model.seed,
        "config": model.config,
    }


def model_fingerprint(model: MlpModel) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(model_doc(model)).encode("utf-8")).hexdigest()


def save_model(model: MlpModel, path) -> None:
    """Versioned JSON layout; float lists round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_doc(model), fh)
        fh.write("\n")


def load_model(path) -> MlpModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ModelContractError(f"not a {MODEL_FORMAT} file: {path}")
    if doc.get("version") != MODEL_VERSION:
        raise ModelContractError(f"unsupported model version {doc.get('version')}")
    model = MlpModel(
        w1=np.array(doc["w1"], dtype=np.float64),
        b1=np.array(doc["b1"], dtype=np.float64),
        w2=np.array(doc["w2"], dtype=np.float64),
        b2=np.array(doc["b2"], dtype=np.float64),
        mean=np.array(doc["mean"], dtype=np.float64),
        std=np.array(doc["std"], dtype=np.float64),
        feature_names=tuple(doc["feature_names"]),
        degenerate_features=tuple(doc["degenerate_features"]),
        seed=int(doc["seed"]),
        config=doc.get("config", {}),
    )
    if not np.all(np.isfinite(model.w1)) or not np.all(np.isfinite(model.w2)):
        raise ModelContractError("model weights contain non-finite values")
    if np.any(model.std <= 0):
        raise ModelContractError("normalization std entries must be positive")
    return model
