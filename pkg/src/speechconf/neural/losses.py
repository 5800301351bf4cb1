"""Cross-entropy with per-sample and per-class weights, weighted-mean reduction."""

from __future__ import annotations

import numpy as np

from speechconf.errors import AllWeightsZero


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy(
    logits: np.ndarray,
    labels: np.ndarray,
    sample_weights: np.ndarray | None = None,
    class_weights: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Weighted-mean cross-entropy and its analytic gradient.

    loss = sum_i c_i * nll_i / sum_i c_i with c_i = w_i * omega_{y_i}.
    The weighted-mean reduction keeps loss magnitude comparable across batch
    compositions when source boosts vary; gradients still scale per sample
    with c_i.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError("labels out of range")
    w = np.ones(n) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    if class_weights is not None:
        w = w * np.asarray(class_weights, dtype=np.float64)[labels]
    total = w.sum()
    if total <= 0.0:
        raise AllWeightsZero("all effective sample weights are zero")

    logp = log_softmax(logits)
    nll = -logp[np.arange(n), labels]
    loss = float(np.sum(w * nll) / total)

    probs = np.exp(logp)
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits *= (w / total)[:, None]
    return loss, dlogits
