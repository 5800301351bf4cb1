"""Central finite-difference verification of every analytic gradient."""

from __future__ import annotations

import numpy as np

from speechconf.neural.layers import Dropout
from speechconf.neural.losses import cross_entropy
from speechconf.neural.model import MlpModel


def grad_check(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    h: float = 1e-5,
    sample_weights: np.ndarray | None = None,
    class_weights: np.ndarray | None = None,
) -> float:
    """Max relative error between analytic and numeric gradients.

    Runs the model in a deterministic configuration: dropout is disabled and
    batch-norm pinned to its running stats for the duration of the check,
    otherwise the two loss evaluations of each central difference would
    disagree by construction.
    """
    model.freeze_stats(True)
    saved_p = [(lay, lay.p) for lay in model.layers if isinstance(lay, Dropout)]
    for lay, _ in saved_p:
        lay.p = 0.0

    def loss_at() -> float:
        logits = model.forward(x, train=True)
        loss, _ = cross_entropy(logits, y, sample_weights, class_weights)
        return loss

    logits = model.forward(x, train=True)
    _, dlogits = cross_entropy(logits, y, sample_weights, class_weights)
    model.backward(dlogits)

    worst = 0.0
    for _, p in model.params():
        analytic = p.grad.copy()
        flat = p.value.reshape(-1)
        num = np.zeros_like(flat)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = loss_at()
            flat[j] = orig - h
            down = loss_at()
            flat[j] = orig
            num[j] = (up - down) / (2.0 * h)
        num = num.reshape(p.value.shape)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(num)), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - num) / denom)))
    for lay, p in saved_p:
        lay.p = p
    model.freeze_stats(False)
    return worst
