"""Adam/AdamW with per-group learning rates and cosine annealing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from speechconf.errors import ShapeMismatch, StepOutOfRange
from speechconf.neural.layers import Param


@dataclass
class CosineSchedule:
    lr_max: float
    total_steps: int
    lr_min: float = 0.0

    def lr(self, step: int) -> float:
        if not 0 <= step <= self.total_steps:
            raise StepOutOfRange(f"step {step} outside [0, {self.total_steps}]")
        cos = np.cos(np.pi * step / self.total_steps)
        return self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + cos)


def cosine_lr(sched: CosineSchedule, step: int) -> float:
    return sched.lr(step)


class AdamW:
    """Adam with optional decoupled weight decay.

    Groups are dicts {"params": [(name, Param)], "lr": float, optional
    "weight_decay", "schedule": CosineSchedule}. With weight_decay 0 this is
    exactly Adam.
    """

    def __init__(
        self,
        groups: list[dict],
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.groups = groups
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        for g in groups:
            for name, p in g["params"]:
                self.m[name] = np.zeros_like(p.value)
                self.v[name] = np.zeros_like(p.value)

    @classmethod
    def single_group(cls, params: list[tuple[str, Param]], lr: float,
                     weight_decay: float = 0.0, **kw) -> "AdamW":
        return cls([{"params": params, "lr": lr, "weight_decay": weight_decay}], **kw)

    def step(self) -> None:
        """One update from each Param's .grad; schedules override group lr."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for g in self.groups:
            sched: CosineSchedule | None = g.get("schedule")
            lr = sched.lr(min(self.t, sched.total_steps)) if sched else g["lr"]
            wd = g.get("weight_decay", 0.0)
            for name, p in g["params"]:
                grad = p.grad
                if grad.shape != p.value.shape:
                    raise ShapeMismatch(f"grad shape {grad.shape} != param {p.value.shape}")
                m = self.m[name]
                v = self.v[name]
                m *= b1
                m += (1 - b1) * grad
                v *= b2
                v += (1 - b2) * grad * grad
                update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
                if wd:
                    update = update + wd * p.value
                p.value -= lr * update
