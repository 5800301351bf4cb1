"""Inverse-class-frequency weighted sampling with replacement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from speechconf.errors import EmptyClass


@dataclass
class SamplerConfig:
    class_counts: dict[int, int]
    seed: int = 0
    replacement: bool = True  # always true; minority oversampling needs it

    def __post_init__(self):
        if any(c < 1 for c in self.class_counts.values()):
            raise EmptyClass("every class must have at least one sample")


def sampler_config_from_labels(labels: np.ndarray, seed: int = 0) -> SamplerConfig:
    vals, counts = np.unique(np.asarray(labels, dtype=np.int64), return_counts=True)
    return SamplerConfig(class_counts={int(v): int(c) for v, c in zip(vals, counts)}, seed=seed)


def sample_weights(cfg: SamplerConfig, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    for lab in np.unique(labels):
        if int(lab) not in cfg.class_counts:
            raise EmptyClass(f"label {lab} missing from class_counts")
    counts = np.array([cfg.class_counts[int(lab)] for lab in labels], dtype=np.float64)
    return 1.0 / counts


def weighted_sample(cfg: SamplerConfig, labels: np.ndarray, n_draws: int,
                    rng: np.random.Generator | None = None) -> np.ndarray:
    """I.i.d. index draws with replacement, P(i) proportional to 1/count(class_i)."""
    w = sample_weights(cfg, labels)
    p = w / w.sum()
    rng = rng or np.random.default_rng(cfg.seed)
    return rng.choice(len(p), size=n_draws, replace=True, p=p)
