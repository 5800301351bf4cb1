"""Two-stream late-fusion confidence classifier.

A linear projection head turns ingested encoder embeddings into logits; the
gated feature MLP turns the 94-dim feature vector into logits; the fused
prediction is emb_logits + lambda_fv * fv_logits. Training uses the
source-boosted class-weighted cross-entropy with differential learning
rates and cosine annealing.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from speechconf.errors import (
    CorruptHeader,
    DimMismatch,
    EmptyTrainingSet,
    LeakageDetected,
    NonFiniteValue,
    NormalizerMismatch,
    UnknownSource,
)
from speechconf.features.vector import FeatureVector
from speechconf.folds import stratified_split
from speechconf.neural.losses import cross_entropy, softmax
from speechconf.neural.model import MlpModel, gated_feature_specs
from speechconf.neural.optim import AdamW, CosineSchedule
from speechconf.neural.sampler import sampler_config_from_labels, weighted_sample
from speechconf.neural.train import _macro_f1

N_CLASSES = 3
FEATURE_DIM = 94

GROUND_TRUTH = "ground_truth"
PSEUDO = "pseudo"


@dataclass
class EmbeddingRecord:
    id: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.isfinite(self.values).all():
            raise NonFiniteValue(f"embedding {self.id} has non-finite entries")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass
class Sample:
    id: str
    feature_vector: FeatureVector
    embedding: EmbeddingRecord
    label: int
    source: str  # ground_truth | pseudo
    fold: int = -1

    def __post_init__(self):
        if self.source not in (GROUND_TRUTH, PSEUDO):
            raise UnknownSource(f"sample {self.id}: source {self.source!r}")
        if self.feature_vector.id != self.id or self.embedding.id != self.id:
            raise ValueError(f"sample {self.id}: feature/embedding ids do not match")


@dataclass
class HybridConfig:
    lambda_fv: float = 0.3
    gt_boost: float = 18.0
    class_weights: tuple[float, float, float] = (1.0, 1.2, 1.0)
    lr_embedding_stream: float = 2.5e-5
    lr_feature_stream: float = 1e-3
    weight_decay: float = 1e-5
    dropout: float = 0.3
    feature_hidden: tuple[int, int] = (128, 64)
    epochs: int = 40
    batch_size: int = 32
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.lambda_fv < 0:
            raise ValueError("lambda_fv must be >= 0")
        if self.gt_boost < 1:
            raise ValueError("gt_boost must be >= 1")
        if any(w <= 0 for w in self.class_weights):
            raise ValueError("class weights must be positive")


class HybridModel:
    """Projection head over embeddings + gated MLP over features, late-fused."""

    def __init__(self, embedding_dim: int, cfg: HybridConfig):
        self.cfg = cfg
        self.embedding_dim = embedding_dim
        self.embedding_stream = MlpModel(
            [{"kind": "dense", "in_dim": embedding_dim, "out_dim": N_CLASSES}],
            seed=cfg.seed,
        )
        self.feature_stream = MlpModel(
            gated_feature_specs(FEATURE_DIM, cfg.feature_hidden, N_CLASSES, cfg.dropout),
            seed=cfg.seed + 1,
        )
        self.normalizer_fp: str | None = None

    def eval(self) -> "HybridModel":
        self.embedding_stream.eval()
        self.feature_stream.eval()
        return self

    def train(self) -> "HybridModel":
        self.embedding_stream.train()
        self.feature_stream.train()
        return self

    def get_state(self) -> dict:
        return {
            "emb": self.embedding_stream.get_state(),
            "fv": self.feature_stream.get_state(),
        }

    def set_state(self, state: dict) -> None:
        self.embedding_stream.set_state(state["emb"])
        self.feature_stream.set_state(state["fv"])


def hybrid_forward(
    model: HybridModel, embeddings: np.ndarray, features: np.ndarray,
    train: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (fused_logits, embedding_logits, feature_logits).

    fused = embedding_logits + lambda_fv * feature_logits, exactly; with
    lambda_fv = 0 the fused logits are bit-identical to the embedding ones.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if embeddings.shape[1] != model.embedding_dim:
        raise DimMismatch(f"expected embedding dim {model.embedding_dim}")
    if features.shape[1] != FEATURE_DIM:
        raise DimMismatch(f"expected feature dim {FEATURE_DIM}")
    emb_logits = model.embedding_stream.forward(embeddings, train=train)
    fv_logits = model.feature_stream.forward(features, train=train)
    fused = emb_logits + model.cfg.lambda_fv * fv_logits
    return fused, emb_logits, fv_logits


def source_boosted_loss(
    fused_logits: np.ndarray,
    labels: np.ndarray,
    sources: list[str] | np.ndarray,
    cfg: HybridConfig,
) -> tuple[float, np.ndarray]:
    """Cross-entropy where ground-truth samples carry gt_boost (18x) weight
    and the medium class carries its 1.2 class weight; weighted-mean reduced."""
    weights = np.empty(len(labels))
    for i, s in enumerate(sources):
        if s == GROUND_TRUTH:
            weights[i] = cfg.gt_boost
        elif s == PSEUDO:
            weights[i] = 1.0
        else:
            raise UnknownSource(f"sample {i}: source {s!r}")
    return cross_entropy(fused_logits, labels, sample_weights=weights,
                         class_weights=np.asarray(cfg.class_weights))


def train_hybrid(
    gt: list[Sample],
    pseudo: list[Sample],
    cfg: HybridConfig | None = None,
    forbidden_ids: set[str] | frozenset[str] = frozenset(),
) -> tuple[HybridModel, list[dict]]:
    """Train on ground truth united with pseudo samples.

    A stratified 20% of the ground truth is held out for model selection on
    validation macro-F1; both optimizer groups anneal their rates with a
    cosine schedule over the full run. Returns the best-validation model and
    the per-epoch history.
    """
    cfg = cfg or HybridConfig()
    if not gt:
        raise EmptyTrainingSet("no ground-truth samples")
    leaked = ({s.id for s in gt} | {s.id for s in pseudo}) & set(forbidden_ids)
    if leaked:
        raise LeakageDetected(f"hybrid training set contains held-out ids: {sorted(leaked)[:5]}")
    for s in gt:
        if s.source != GROUND_TRUTH:
            raise UnknownSource(f"gt sample {s.id} tagged {s.source!r}")
    for s in pseudo:
        if s.source != PSEUDO:
            raise UnknownSource(f"pseudo sample {s.id} tagged {s.source!r}")

    gt_labels = np.asarray([s.label for s in gt], dtype=np.int64)
    tr_idx, val_idx = stratified_split(gt_labels, cfg.val_fraction, cfg.seed)
    train_samples = [gt[i] for i in tr_idx] + list(pseudo)
    val_samples = [gt[i] for i in val_idx]

    def stack(samples: list[Sample]):
        emb = np.stack([s.embedding.values for s in samples])
        fv = np.stack([s.feature_vector.values for s in samples])
        y = np.asarray([s.label for s in samples], dtype=np.int64)
        src = [s.source for s in samples]
        return emb, fv, y, src

    emb_tr, fv_tr, y_tr, src_tr = stack(train_samples)
    emb_val, fv_val, y_val, _ = stack(val_samples)

    model = HybridModel(embedding_dim=emb_tr.shape[1], cfg=cfg)
    fps = {s.feature_vector.norm_ref for s in train_samples + val_samples}
    model.normalizer_fp = next(iter(fps)) if len(fps) == 1 else None

    steps_per_epoch = max(1, int(np.ceil(len(train_samples) / cfg.batch_size)))
    total_steps = max(1, steps_per_epoch * cfg.epochs)
    opt = AdamW(
        [
            {
                "params": model.embedding_stream.params(),
                "lr": cfg.lr_embedding_stream,
                "weight_decay": cfg.weight_decay,
                "schedule": CosineSchedule(cfg.lr_embedding_stream, total_steps),
            },
            {
                "params": model.feature_stream.params(),
                "lr": cfg.lr_feature_stream,
                "weight_decay": cfg.weight_decay,
                "schedule": CosineSchedule(cfg.lr_feature_stream, total_steps),
            },
        ]
    )

    sampler = sampler_config_from_labels(y_tr, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    src_arr = np.asarray(src_tr)
    history: list[dict] = []
    best_state = None
    best_f1 = -np.inf

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        epoch_loss = 0.0
        for _ in range(steps_per_epoch):
            idx = weighted_sample(sampler, y_tr, cfg.batch_size, rng=rng)
            fused, _, _ = hybrid_forward(model, emb_tr[idx], fv_tr[idx], train=True)
            loss, dfused = source_boosted_loss(fused, y_tr[idx], src_arr[idx], cfg)
            model.embedding_stream.backward(dfused)
            model.feature_stream.backward(cfg.lambda_fv * dfused)
            opt.step()
            epoch_loss += loss
        model.eval()
        if len(val_samples):
            fused_val, _, _ = hybrid_forward(model, emb_val, fv_val, train=False)
            val_f1 = _macro_f1(np.argmax(fused_val, axis=1), y_val)
        else:
            val_f1 = float("nan")
        history.append({
            "epoch": epoch,
            "train_loss": epoch_loss / steps_per_epoch,
            "val_macro_f1": val_f1,
        })
        if best_state is None or (val_f1 == val_f1 and val_f1 > best_f1):
            best_f1 = val_f1
            best_state = model.get_state()

    if best_state is not None:
        model.set_state(best_state)
    model.eval()
    return model, history


def predict(
    model: HybridModel, samples: list[Sample]
) -> tuple[np.ndarray, np.ndarray]:
    """Class probabilities (softmax of fused logits) and argmax labels."""
    for s in samples:
        if model.normalizer_fp is not None and s.feature_vector.norm_ref != model.normalizer_fp:
            raise NormalizerMismatch(
                f"sample {s.id} normalized with {s.feature_vector.norm_ref}, "
                f"model expects {model.normalizer_fp}"
            )
    emb = np.stack([s.embedding.values for s in samples])
    fv = np.stack([s.feature_vector.values for s in samples])
    fused, _, _ = hybrid_forward(model, emb, fv, train=False)
    probs = softmax(fused)
    return probs, np.argmax(probs, axis=1)


# --- persistence -------------------------------------------------------------

def save_hybrid(model: HybridModel, path: str | Path, extra: dict | None = None) -> None:
    from speechconf.neural.checkpoint import save_state

    state = {}
    for prefix, stream in (("emb", model.embedding_stream), ("fv", model.feature_stream)):
        for k, v in stream.get_state().items():
            state[f"{prefix}.{k}"] = v
    meta = {
        "kind": "hybrid",
        "embedding_dim": model.embedding_dim,
        "config": {**model.cfg.__dict__},
        "normalizer_fp": model.normalizer_fp,
        "extra": extra or {},
    }
    save_state(path, meta, state)


def load_hybrid(path: str | Path) -> tuple[HybridModel, dict]:
    from speechconf.neural.checkpoint import load_state

    meta, state = load_state(path)
    if meta.get("kind") != "hybrid":
        raise CorruptHeader(f"{path}: checkpoint is not a hybrid model")
    cfg_dict = dict(meta["config"])
    cfg_dict["class_weights"] = tuple(cfg_dict["class_weights"])
    cfg_dict["feature_hidden"] = tuple(cfg_dict["feature_hidden"])
    model = HybridModel(meta["embedding_dim"], HybridConfig(**cfg_dict))
    model.normalizer_fp = meta["normalizer_fp"]
    model.set_state({
        "emb": {k[4:]: v for k, v in state.items() if k.startswith("emb.")},
        "fv": {k[3:]: v for k, v in state.items() if k.startswith("fv.")},
    })
    model.eval()
    return model, meta["extra"]


# --- embedding stores -------------------------------------------------------

EMB_MAGIC = b"EMB1"


def write_embedding_store(path: str | Path, records: list[EmbeddingRecord]) -> None:
    """Binary store: magic EMB1, u32 dim, then {u16 id-len, id, dim float32 LE}."""
    if not records:
        raise ValueError("cannot write an empty embedding store")
    dim = records[0].dim
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<I", dim))
        for rec in records:
            if rec.dim != dim:
                raise DimMismatch(f"embedding {rec.id}: dim {rec.dim} != store dim {dim}")
            ident = rec.id.encode("utf-8")
            fh.write(struct.pack("<H", len(ident)))
            fh.write(ident)
            fh.write(rec.values.astype("<f4").tobytes())


def read_embedding_store(path: str | Path) -> dict[str, EmbeddingRecord]:
    raw = Path(path).read_bytes()
    if raw[:4] != EMB_MAGIC:
        raise CorruptHeader(f"{path}: not an EMB1 store")
    (dim,) = struct.unpack_from("<I", raw, 4)
    pos = 8
    out: dict[str, EmbeddingRecord] = {}
    while pos < len(raw):
        (id_len,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        ident = raw[pos:pos + id_len].decode("utf-8")
        pos += id_len
        vals = np.frombuffer(raw, dtype="<f4", count=dim, offset=pos).astype(np.float64)
        pos += 4 * dim
        out[ident] = EmbeddingRecord(id=ident, values=vals)
    return out


def write_embedding_csv(path: str | Path, records: list[EmbeddingRecord]) -> None:
    if not records:
        raise ValueError("cannot write an empty embedding store")
    dim = records[0].dim
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"e_{i:03d}" for i in range(dim)])
        for rec in records:
            if rec.dim != dim:
                raise DimMismatch(f"embedding {rec.id}: dim {rec.dim} != store dim {dim}")
            w.writerow([rec.id] + [repr(float(v)) for v in rec.values])


def read_embedding_csv(path: str | Path) -> dict[str, EmbeddingRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if not header or header[0] != "id":
            raise CorruptHeader(f"{path}: bad embedding CSV header")
        out: dict[str, EmbeddingRecord] = {}
        for row in r:
            out[row[0]] = EmbeddingRecord(
                id=row[0], values=np.asarray([float(v) for v in row[1:]])
            )
        return out


def read_embeddings(path: str | Path) -> dict[str, EmbeddingRecord]:
    """Dispatch on content: EMB1 binary or the CSV fallback."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == EMB_MAGIC:
        return read_embedding_store(path)
    return read_embedding_csv(path)
