"""Feature-only MLP labeller and uncertainty-filtered pseudo-label generation.

The labeller never sees embeddings or audio: it scores the unlabelled pool
from the 94-dim feature vectors alone, and only predictions whose
(optionally temperature-calibrated) max probability clears tau survive.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from speechconf.calibration import apply_temperature, fit_temperature
from speechconf.errors import (
    ClassAbsent,
    DegenerateLabels,
    EmptyPseudoSet,
    LeakageDetected,
    PoolOverlapsGroundTruth,
)
from speechconf.folds import stratified_split
from speechconf.neural.model import MlpModel, mlp_specs
from speechconf.neural.optim import AdamW
from speechconf.neural.sampler import SamplerConfig, sampler_config_from_labels
from speechconf.neural.train import EarlyStop, evaluate, train_loop

N_CLASSES = 3
FEATURE_DIM = 94


@dataclass
class LabellerConfig:
    hidden_dims: tuple[int, int] = (128, 64)
    activation: str = "relu"
    dropout: float = 0.3
    lr: float = 0.001
    epochs: int = 80
    batch_size: int = 32
    patience: int = 10
    internal_folds: int = 5
    val_fraction: float = 0.2
    seed: int = 0


@dataclass
class PseudoLabelConfig:
    tau: float = 0.8
    calibrate_before_filter: bool = True

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


@dataclass
class Labeller:
    """Trained labeller plus everything pseudo-label generation needs."""

    model: MlpModel
    temperature: float
    report: dict
    train_ids: list[str]
    val_ids: list[str]

    def checkpoint_hash(self) -> str:
        h = hashlib.sha256()
        for k in sorted(state := self.model.get_state()):
            h.update(k.encode())
            h.update(state[k].tobytes())
        return h.hexdigest()[:16]


@dataclass
class PseudoSet:
    samples: list[tuple[str, int, float, int]]  # (clip_id, label, max_prob, fold)
    provenance: str
    pool_size: int
    tau: float
    fold: int

    @property
    def retained(self) -> int:
        return len(self.samples)

    def ids(self) -> set[str]:
        return {s[0] for s in self.samples}

    def class_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for _, lab, _, _ in self.samples:
            hist[lab] = hist.get(lab, 0) + 1
        return hist


def _build_labeller_model(cfg: LabellerConfig, seed: int) -> MlpModel:
    specs = mlp_specs(FEATURE_DIM, list(cfg.hidden_dims), N_CLASSES,
                      activation=cfg.activation, dropout=cfg.dropout)
    return MlpModel(specs, seed=seed)


def _fit_once(x_tr, y_tr, x_val, y_val, cfg: LabellerConfig, seed: int) -> MlpModel:
    model = _build_labeller_model(cfg, seed)
    opt = AdamW.single_group(model.params(), lr=cfg.lr)
    train_loop(
        model, x_tr, y_tr, x_val, y_val, opt,
        epochs=cfg.epochs, batch_size=cfg.batch_size,
        early_stop=EarlyStop("val_loss", cfg.patience),
        sampler=sampler_config_from_labels(y_tr, seed=seed),
    )
    return model


def train_labeller(
    ids: list[str],
    x: np.ndarray,
    y: np.ndarray,
    cfg: LabellerConfig | None = None,
    forbidden_ids: set[str] | frozenset[str] = frozenset(),
) -> Labeller:
    """Train the feature-only labeller with an internal cross-validation report.

    `forbidden_ids` is the fold's held-out test set; any overlap with the
    inputs is a hard LeakageDetected, enforced here rather than assumed.
    """
    cfg = cfg or LabellerConfig()
    leaked = set(ids) & set(forbidden_ids)
    if leaked:
        raise LeakageDetected(f"labeller input contains held-out ids: {sorted(leaked)[:5]}")
    y = np.asarray(y, dtype=np.int64)
    present = set(np.unique(y).tolist())
    if present != set(range(N_CLASSES)):
        raise ClassAbsent(f"labeller training needs all {N_CLASSES} classes, found {sorted(present)}")

    # internal k-fold report on the ground-truth features
    k = cfg.internal_folds
    rng = np.random.default_rng(cfg.seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for lab in np.unique(y):
        idx = np.nonzero(y == lab)[0]
        rng.shuffle(idx)
        fold_of[idx] = np.arange(len(idx)) % k
    fold_scores, per_class = [], []
    for fold in range(k):
        tr, te = fold_of != fold, fold_of == fold
        model = _fit_once(x[tr], y[tr], x[te], y[te], cfg, seed=cfg.seed + 101 + fold)
        stats = evaluate(model, x[te], y[te])
        fold_scores.append(stats["macro_f1"])
        per_class.append(_per_class_f1(model, x[te], y[te]))

    # final model on a stratified train/val split; temperature from the val split
    tr_idx, val_idx = stratified_split(y, cfg.val_fraction, cfg.seed)
    model = _fit_once(x[tr_idx], y[tr_idx], x[val_idx], y[val_idx], cfg, seed=cfg.seed)
    logits_val = model.forward(x[val_idx], train=False)
    try:
        temperature = fit_temperature(logits_val, y[val_idx]).temperature
    except DegenerateLabels:
        temperature = 1.0

    report = {
        "internal_folds": k,
        "fold_macro_f1": [float(v) for v in fold_scores],
        "mean_macro_f1": float(np.mean(fold_scores)),
        "per_class_f1": [float(v) for v in np.mean(per_class, axis=0)],
        "n_train": int(len(tr_idx)),
        "n_val": int(len(val_idx)),
    }
    return Labeller(
        model=model,
        temperature=temperature,
        report=report,
        train_ids=[ids[i] for i in tr_idx],
        val_ids=[ids[i] for i in val_idx],
    )


def _per_class_f1(model: MlpModel, x: np.ndarray, y: np.ndarray) -> list[float]:
    preds = np.argmax(model.forward(x, train=False), axis=1)
    out = []
    for c in range(N_CLASSES):
        tp = np.sum((preds == c) & (y == c))
        denom = 2 * tp + np.sum((preds == c) & (y != c)) + np.sum((preds != c) & (y == c))
        out.append(float(2 * tp / denom) if denom > 0 else 0.0)
    return out


def generate_pseudo_labels(
    labeller: Labeller,
    pool_ids: list[str],
    pool_x: np.ndarray,
    gt_ids: set[str],
    cfg: PseudoLabelConfig | None = None,
    fold: int = 0,
) -> PseudoSet:
    """Score the pool and retain samples with max probability >= tau.

    Deterministic for a fixed labeller checkpoint, pool and tau. The retained
    set is asserted disjoint from the ground-truth ids.
    """
    cfg = cfg or PseudoLabelConfig()
    overlap = set(pool_ids) & set(gt_ids)
    if overlap:
        raise PoolOverlapsGroundTruth(f"pool contains ground-truth ids: {sorted(overlap)[:5]}")

    logits = labeller.model.forward(pool_x, train=False)
    t = labeller.temperature if cfg.calibrate_before_filter else 1.0
    probs = apply_temperature(logits, t)
    max_prob = probs.max(axis=1)
    pred = probs.argmax(axis=1)

    samples = [
        (pool_ids[i], int(pred[i]), float(max_prob[i]), fold)
        for i in range(len(pool_ids))
        if max_prob[i] >= cfg.tau
    ]
    pseudo = PseudoSet(
        samples=samples,
        provenance=labeller.checkpoint_hash(),
        pool_size=len(pool_ids),
        tau=cfg.tau,
        fold=fold,
    )
    assert not pseudo.ids() & set(gt_ids), "pseudo set overlaps ground truth"
    assert all(p >= cfg.tau for _, _, p, _ in samples)
    return pseudo


def pseudo_class_balance(pseudo: PseudoSet, seed: int = 0) -> SamplerConfig:
    """Inverse-frequency sampler weights over the retained set; nothing is
    dropped. Warns when a class is entirely absent."""
    if not pseudo.samples:
        raise EmptyPseudoSet("no retained pseudo-labelled samples")
    hist = pseudo.class_histogram()
    for c in range(N_CLASSES):
        if c not in hist:
            warnings.warn(f"pseudo set has no samples of class {c}", stacklevel=2)
    return SamplerConfig(class_counts=hist, seed=seed)


# --- files -----------------------------------------------------------------

def save_pseudo_set(pseudo: PseudoSet, csv_path: str | Path) -> None:
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["clip_id", "label", "max_prob", "fold"])
        for cid, lab, prob, fold in pseudo.samples:
            w.writerow([cid, lab, repr(prob), fold])
    sidecar = {
        "labeller_checkpoint": pseudo.provenance,
        "tau": pseudo.tau,
        "pool_size": pseudo.pool_size,
        "retained": pseudo.retained,
        "class_histogram": {str(k): v for k, v in sorted(pseudo.class_histogram().items())},
        "fold": pseudo.fold,
    }
    csv_path.with_suffix(".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_pseudo_set(csv_path: str | Path) -> PseudoSet:
    csv_path = Path(csv_path)
    samples = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            samples.append((row[0], int(row[1]), float(row[2]), int(row[3])))
    side = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
    return PseudoSet(
        samples=samples,
        provenance=side["labeller_checkpoint"],
        pool_size=side["pool_size"],
        tau=side["tau"],
        fold=side["fold"],
    )
