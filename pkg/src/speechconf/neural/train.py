"""Generic training loop: weighted sampling, early stopping, best-epoch restore."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from speechconf.errors import EmptyTrainingSet
from speechconf.neural.losses import cross_entropy, softmax
from speechconf.neural.model import MlpModel
from speechconf.neural.optim import AdamW
from speechconf.neural.sampler import SamplerConfig, sampler_config_from_labels, weighted_sample


@dataclass
class EarlyStop:
    metric: str = "val_loss"   # val_loss (min) or val_macro_f1 (max)
    patience: int = 10

    @property
    def maximize(self) -> bool:
        return self.metric != "val_loss"


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_metric: float = float("nan")


def _macro_f1(preds: np.ndarray, labels: np.ndarray, n_classes: int = 3) -> float:
    f1s = []
    for c in range(n_classes):
        tp = np.sum((preds == c) & (labels == c))
        fp = np.sum((preds == c) & (labels != c))
        fn = np.sum((preds != c) & (labels == c))
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(f1s))


def evaluate(model: MlpModel, x: np.ndarray, y: np.ndarray,
             class_weights: np.ndarray | None = None) -> dict:
    logits = model.forward(x, train=False)
    loss, _ = cross_entropy(logits, y, class_weights=class_weights)
    preds = np.argmax(logits, axis=1)
    return {
        "loss": loss,
        "macro_f1": _macro_f1(preds, y, logits.shape[1]),
        "accuracy": float(np.mean(preds == y)),
    }


def train_loop(
    model: MlpModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    optimizer: AdamW,
    epochs: int,
    batch_size: int = 32,
    early_stop: EarlyStop | None = None,
    sampler: SamplerConfig | None = None,
    class_weights: np.ndarray | None = None,
    sample_weights: np.ndarray | None = None,
) -> TrainResult:
    """Epoch loop with weighted batch sampling and best-epoch restoration.

    Batches are drawn with replacement using inverse-class-frequency weights
    so every batch is class-balanced in expectation. The model returned in
    place holds the weights of the best validation epoch; with zero epochs
    the initial model and an empty history are returned.
    """
    if len(x_train) == 0:
        raise EmptyTrainingSet("no training samples")
    result = TrainResult()
    if epochs == 0:
        return result

    early = early_stop or EarlyStop()
    sampler = sampler or sampler_config_from_labels(y_train)
    rng = np.random.default_rng(sampler.seed)
    steps = max(1, int(np.ceil(len(x_train) / batch_size)))
    best_state = None
    best = -np.inf if early.maximize else np.inf
    stale = 0

    for epoch in range(1, epochs + 1):
        model.train()
        epoch_loss = 0.0
        for _ in range(steps):
            idx = weighted_sample(sampler, y_train, batch_size, rng=rng)
            logits = model.forward(x_train[idx])
            sw = sample_weights[idx] if sample_weights is not None else None
            loss, dlogits = cross_entropy(logits, y_train[idx], sample_weights=sw,
                                          class_weights=class_weights)
            model.backward(dlogits)
            optimizer.step()
            epoch_loss += loss
        val = evaluate(model, x_val, y_val, class_weights) if len(x_val) else {
            "loss": float("nan"), "macro_f1": float("nan"), "accuracy": float("nan")}
        entry = {
            "epoch": epoch,
            "train_loss": epoch_loss / steps,
            "val_loss": val["loss"],
            "val_macro_f1": val["macro_f1"],
            "val_accuracy": val["accuracy"],
        }
        result.history.append(entry)

        metric = entry[early.metric]
        improved = metric > best if early.maximize else metric < best
        if improved or best_state is None:
            best = metric
            best_state = model.get_state()
            result.best_epoch = epoch
            result.best_metric = float(metric)
            stale = 0
        else:
            stale += 1
            if stale >= early.patience:
                break

    if best_state is not None:
        model.set_state(best_state)
    model.eval()
    return result


def predict_proba(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return softmax(model.forward(x, train=False))
