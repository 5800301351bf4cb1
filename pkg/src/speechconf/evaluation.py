"""Fixed-fold cross-validation orchestration, metrics, leakage audits, and
permutation feature importance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from speechconf.errors import (
    EmptyInput,
    LeakageDetected,
    MissingStore,
    TooFewSamples,
)
from speechconf.features.vector import FeatureVector, normalizer_apply, normalizer_fit
from speechconf.folds import FoldPlan, stratified_split
from speechconf.hybrid import (
    GROUND_TRUTH,
    PSEUDO,
    EmbeddingRecord,
    HybridConfig,
    HybridModel,
    Sample,
    predict,
    train_hybrid,
)
from speechconf.neural.losses import softmax
from speechconf.neural.model import MlpModel, gated_feature_specs
from speechconf.neural.optim import AdamW, CosineSchedule
from speechconf.neural.sampler import sampler_config_from_labels, weighted_sample
from speechconf.neural.train import _macro_f1
from speechconf.pseudo import (
    LabellerConfig,
    PseudoLabelConfig,
    generate_pseudo_labels,
    train_labeller,
)

N_CLASSES = 3
ARMS = ("gt_only", "no_filter", "proposed", "fv_only", "embedding_only")


# --- metrics ----------------------------------------------------------------

def classification_metrics(
    preds: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, float, np.ndarray]:
    """(per-class F1, macro-F1, row-normalized 3x3 confusion).

    F1 is 0 where its denominator vanishes. Confusion rows are normalized by
    true-class counts; a class absent from `labels` gets a uniform row so
    emitted rows always sum to 1 (cannot happen under stratified folds).
    """
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(preds) == 0 or len(preds) != len(labels):
        raise EmptyInput("need equal-length non-empty prediction/label sequences")
    f1 = np.zeros(N_CLASSES)
    conf = np.zeros((N_CLASSES, N_CLASSES))
    for t in range(N_CLASSES):
        for p in range(N_CLASSES):
            conf[t, p] = np.sum((labels == t) & (preds == p))
    for c in range(N_CLASSES):
        tp = conf[c, c]
        fp = conf[:, c].sum() - tp
        fn = conf[c, :].sum() - tp
        denom = 2 * tp + fp + fn
        f1[c] = 2 * tp / denom if denom > 0 else 0.0
    row_sums = conf.sum(axis=1, keepdims=True)
    out = np.full((N_CLASSES, N_CLASSES), 1.0 / N_CLASSES)
    nz = row_sums[:, 0] > 0
    out[nz] = conf[nz] / row_sums[nz]
    return f1, float(f1.mean()), out


@dataclass
class FoldReport:
    fold: int
    arm: str
    per_class_f1: np.ndarray
    macro_f1: float
    confusion: np.ndarray
    n_pseudo_used: int

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "arm": self.arm,
            "f1_low": float(self.per_class_f1[0]),
            "f1_medium": float(self.per_class_f1[1]),
            "f1_high": float(self.per_class_f1[2]),
            "macro_f1": self.macro_f1,
            "confusion": [[float(v) for v in row] for row in self.confusion],
            "n_pseudo_used": self.n_pseudo_used,
        }


@dataclass
class CvSummary:
    arm: str
    macro_f1_mean: float
    macro_f1_std: float
    per_class_mean: np.ndarray
    per_class_std: np.ndarray
    reports: list[FoldReport]

    @classmethod
    def from_reports(cls, arm: str, reports: list[FoldReport]) -> "CvSummary":
        macro = np.asarray([r.macro_f1 for r in reports])
        per_class = np.stack([r.per_class_f1 for r in reports])
        ddof = 1 if len(reports) > 1 else 0
        return cls(
            arm=arm,
            macro_f1_mean=float(macro.mean()),
            macro_f1_std=float(macro.std(ddof=ddof)),
            per_class_mean=per_class.mean(axis=0),
            per_class_std=per_class.std(axis=0, ddof=ddof),
            reports=reports,
        )

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "macro_f1_mean": self.macro_f1_mean,
            "macro_f1_std": self.macro_f1_std,
            "per_class_f1_mean": [float(v) for v in self.per_class_mean],
            "per_class_f1_std": [float(v) for v in self.per_class_std],
            "folds": [r.to_dict() for r in self.reports],
        }


# --- leakage audit ------------------------------------------------------------

@dataclass
class FoldArtifacts:
    """Id sets every training stage touched, recorded for the audit."""

    fold: int
    labeller_train_ids: set[str] = field(default_factory=set)
    hybrid_train_ids: set[str] = field(default_factory=set)
    normalizer_fit_ids: set[str] = field(default_factory=set)
    pool_ids: set[str] = field(default_factory=set)


@dataclass
class AuditViolation:
    fold: int
    check: str
    ids: list[str]

    def __str__(self):
        return f"fold {self.fold}: {self.check} leaked ids {self.ids[:5]}"


@dataclass
class AuditReport:
    violations: list[AuditViolation]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [
                {"fold": v.fold, "check": v.check, "ids": sorted(v.ids)}
                for v in self.violations
            ],
        }


def leakage_audit(plan: FoldPlan, artifacts: list[FoldArtifacts]) -> AuditReport:
    """Four checks per fold: labeller inputs, hybrid inputs and normalizer
    statistics must avoid the fold's test ids; the pool must avoid every
    labelled id."""
    all_labelled = set(plan.assignments)
    violations: list[AuditViolation] = []
    for art in artifacts:
        test = plan.test_ids(art.fold)
        for check, ids in (
            ("labeller-train", art.labeller_train_ids & test),
            ("hybrid-train", art.hybrid_train_ids & test),
            ("normalizer-fit", art.normalizer_fit_ids & test),
            ("pool-exclusion", art.pool_ids & all_labelled),
        ):
            if ids:
                violations.append(AuditViolation(art.fold, check, sorted(ids)))
    return AuditReport(violations=violations)


# --- cross-validation driver ---------------------------------------------------

@dataclass
class CvData:
    """Everything run_cv reads, keyed by clip id. Features arrive raw
    (unnormalized); each fold fits its own statistics."""

    features: dict[str, FeatureVector]
    embeddings: dict[str, EmbeddingRecord]
    labels: dict[str, int]
    pool_features: dict[str, FeatureVector]
    pool_embeddings: dict[str, EmbeddingRecord]
    plan: FoldPlan

    def check(self) -> None:
        missing = set(self.plan.assignments) - set(self.features)
        if missing:
            raise MissingStore(f"features missing for {sorted(missing)[:5]}")
        missing = set(self.plan.assignments) - set(self.embeddings)
        if missing:
            raise MissingStore(f"embeddings missing for {sorted(missing)[:5]}")
        missing = set(self.plan.assignments) - set(self.labels)
        if missing:
            raise MissingStore(f"labels missing for {sorted(missing)[:5]}")
        missing = set(self.pool_features) - set(self.pool_embeddings)
        if missing:
            raise MissingStore(f"pool embeddings missing for {sorted(missing)[:5]}")


@dataclass
class CvResult:
    summaries: dict[str, CvSummary]
    audit: AuditReport
    artifacts: list[FoldArtifacts]


def _train_feature_only(
    gt: list[Sample], pseudo: list[Sample], cfg: HybridConfig
) -> MlpModel:
    """Feature-stream-only arm: same gated MLP, loss weighting and schedule
    as the hybrid's feature stream."""
    model = MlpModel(
        gated_feature_specs(94, cfg.feature_hidden, N_CLASSES, cfg.dropout),
        seed=cfg.seed + 1,
    )
    samples = list(gt) + list(pseudo)
    x = np.stack([s.feature_vector.values for s in samples])
    y = np.asarray([s.label for s in samples], dtype=np.int64)
    sw = np.asarray([cfg.gt_boost if s.source == GROUND_TRUTH else 1.0 for s in samples])
    steps = max(1, int(np.ceil(len(samples) / cfg.batch_size)))
    total = steps * cfg.epochs
    opt = AdamW([{
        "params": model.params(),
        "lr": cfg.lr_feature_stream,
        "weight_decay": cfg.weight_decay,
        "schedule": CosineSchedule(cfg.lr_feature_stream, total),
    }])
    sampler = sampler_config_from_labels(y, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    cw = np.asarray(cfg.class_weights)
    from speechconf.neural.losses import cross_entropy

    for _ in range(cfg.epochs):
        model.train()
        for _ in range(steps):
            idx = weighted_sample(sampler, y, cfg.batch_size, rng=rng)
            logits = model.forward(x[idx])
            _, dlogits = cross_entropy(logits, y[idx], sample_weights=sw[idx], class_weights=cw)
            model.backward(dlogits)
            opt.step()
    model.eval()
    return model


def run_cv(
    arms: list[str],
    data: CvData,
    hybrid_cfg: HybridConfig | None = None,
    labeller_cfg: LabellerConfig | None = None,
    pseudo_cfg: PseudoLabelConfig | None = None,
) -> CvResult:
    """Per fold and arm: fit normalizer, train labeller, emit pseudo set,
    train the arm's model, score the held-out fold; audit everything.

    Refuses to return summaries if the audit fails.
    """
    for arm in arms:
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r}; choose from {ARMS}")
    data.check()
    data.plan.verify()
    hybrid_cfg = hybrid_cfg or HybridConfig()
    labeller_cfg = labeller_cfg or LabellerConfig()
    pseudo_cfg = pseudo_cfg or PseudoLabelConfig()

    pool_ids = sorted(data.pool_features)
    reports: dict[str, list[FoldReport]] = {arm: [] for arm in arms}
    artifacts: list[FoldArtifacts] = []

    for fold in range(data.plan.k):
        test_ids = sorted(data.plan.test_ids(fold))
        trainval_ids = sorted(data.plan.trainval_ids(fold))
        y_trainval = np.asarray([data.labels[c] for c in trainval_ids], dtype=np.int64)

        # normalizer statistics come from the training part of the split only;
        # train_hybrid recomputes this split from the same label order and
        # seed, so the fit set below is exactly its training subset
        tr_idx, _ = stratified_split(y_trainval, hybrid_cfg.val_fraction, hybrid_cfg.seed)
        fit_ids = [trainval_ids[i] for i in tr_idx]
        norm = normalizer_fit([data.features[c] for c in fit_ids])

        def nfv(store: dict[str, FeatureVector], cid: str) -> FeatureVector:
            return normalizer_apply(norm, store[cid])

        art = FoldArtifacts(fold=fold, normalizer_fit_ids=set(fit_ids))
        art.pool_ids = set(pool_ids)
        artifacts.append(art)

        gt_samples = [
            Sample(
                id=cid,
                feature_vector=nfv(data.features, cid),
                embedding=data.embeddings[cid],
                label=data.labels[cid],
                source=GROUND_TRUTH,
                fold=fold,
            )
            for cid in trainval_ids
        ]
        test_samples = [
            Sample(
                id=cid,
                feature_vector=nfv(data.features, cid),
                embedding=data.embeddings[cid],
                label=data.labels[cid],
                source=GROUND_TRUTH,
                fold=fold,
            )
            for cid in test_ids
        ]
        y_test = np.asarray([data.labels[c] for c in test_ids], dtype=np.int64)

        needs_pseudo = {"no_filter", "proposed", "fv_only", "embedding_only"} & set(arms)
        pseudo_by_tau: dict[float, list[Sample]] = {}
        if needs_pseudo and pool_ids:
            x_trainval = np.stack([nfv(data.features, c).values for c in trainval_ids])
            labeller = train_labeller(
                trainval_ids, x_trainval, y_trainval, labeller_cfg,
                forbidden_ids=set(test_ids),
            )
            art.labeller_train_ids = set(trainval_ids)
            pool_x = np.stack([nfv(data.pool_features, c).values for c in pool_ids])

            def pseudo_samples(tau: float) -> list[Sample]:
                if tau in pseudo_by_tau:
                    return pseudo_by_tau[tau]
                pset = generate_pseudo_labels(
                    labeller, pool_ids, pool_x, set(data.plan.assignments),
                    PseudoLabelConfig(tau=tau, calibrate_before_filter=pseudo_cfg.calibrate_before_filter),
                    fold=fold,
                )
                by_id = {cid: (lab, prob) for cid, lab, prob, _ in pset.samples}
                samples = [
                    Sample(
                        id=cid,
                        feature_vector=nfv(data.pool_features, cid),
                        embedding=data.pool_embeddings[cid],
                        label=by_id[cid][0],
                        source=PSEUDO,
                        fold=fold,
                    )
                    for cid in sorted(by_id)
                ]
                pseudo_by_tau[tau] = samples
                return samples
        else:
            def pseudo_samples(tau: float) -> list[Sample]:
                return []

        for arm in arms:
            if arm == "gt_only":
                pseudo = []
            elif arm == "no_filter":
                pseudo = pseudo_samples(0.0)
            else:
                pseudo = pseudo_samples(pseudo_cfg.tau)

            if arm == "fv_only":
                model = _train_feature_only(gt_samples, pseudo, hybrid_cfg)
                x_te = np.stack([s.feature_vector.values for s in test_samples])
                preds = np.argmax(model.forward(x_te, train=False), axis=1)
            else:
                cfg = hybrid_cfg
                if arm == "embedding_only":
                    cfg = HybridConfig(**{**hybrid_cfg.__dict__, "lambda_fv": 0.0})
                model, _ = train_hybrid(gt_samples, pseudo, cfg, forbidden_ids=set(test_ids))
                _, preds = predict(model, test_samples)

            art.hybrid_train_ids |= {s.id for s in gt_samples} | {s.id for s in pseudo}
            per_class, macro, confusion = classification_metrics(preds, y_test)
            reports[arm].append(
                FoldReport(
                    fold=fold,
                    arm=arm,
                    per_class_f1=per_class,
                    macro_f1=macro,
                    confusion=confusion,
                    n_pseudo_used=len(pseudo),
                )
            )

    audit = leakage_audit(data.plan, artifacts)
    if not audit.passed:
        raise LeakageDetected(
            "leakage audit failed: " + "; ".join(str(v) for v in audit.violations)
        )
    summaries = {arm: CvSummary.from_reports(arm, reports[arm]) for arm in arms}
    return CvResult(summaries=summaries, audit=audit, artifacts=artifacts)


# --- permutation importance ---------------------------------------------------

def permutation_importance(
    model: HybridModel,
    samples: list[Sample],
    n_repeats: int = 10,
    seed: int = 0,
) -> np.ndarray:
    """Mean macro-F1 drop from shuffling each of the 94 feature dimensions.

    Embedding dimensions are never permuted. Returns shape (94,).
    """
    if n_repeats < 1:
        raise TooFewSamples("n_repeats must be >= 1")
    if len(samples) < 20:
        raise TooFewSamples(f"need at least 20 samples, got {len(samples)}")
    emb = np.stack([s.embedding.values for s in samples])
    fv = np.stack([s.feature_vector.values for s in samples])
    y = np.asarray([s.label for s in samples], dtype=np.int64)

    from speechconf.hybrid import hybrid_forward

    def score(fv_matrix: np.ndarray) -> float:
        fused, _, _ = hybrid_forward(model, emb, fv_matrix, train=False)
        return _macro_f1(np.argmax(softmax(fused), axis=1), y)

    baseline = score(fv)
    rng = np.random.default_rng(seed)
    importance = np.zeros(fv.shape[1])
    for j in range(fv.shape[1]):
        drops = []
        for _ in range(n_repeats):
            perm = rng.permutation(len(samples))
            shuffled = fv.copy()
            shuffled[:, j] = fv[perm, j]
            drops.append(baseline - score(shuffled))
        importance[j] = float(np.mean(drops))
    return importance
