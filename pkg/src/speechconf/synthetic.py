"""Seeded synthetic fixtures: audio with known properties, rater panels with
known confusion matrices, and classification datasets with a controllable
corrective-signal structure (embeddings mostly right, features always right,
and an ambiguous pool slice that a confidence filter should reject)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from speechconf.annotation import CODE_VALUES, AnnotationRecord
from speechconf.audio_io import AudioClip


def sine_clip(freq: float = 220.0, duration: float = 1.0, rate: int = 16000,
              amplitude: float = 0.8, clip_id: str = "sine") -> AudioClip:
    t = np.arange(int(duration * rate)) / rate
    return AudioClip(clip_id, amplitude * np.sin(2 * np.pi * freq * t), rate)


def perturbed_sine(freq: float = 220.0, duration: float = 1.0, rate: int = 16000,
                   jitter: float = 0.0, shimmer: float = 0.0, amplitude: float = 0.8,
                   seed: int = 0, clip_id: str = "perturbed") -> AudioClip:
    """Cycle-by-cycle perturbed tone with known jitter/shimmer.

    Each cycle k has period T0*(1 + jitter*s_k) and amplitude A*(1 +
    shimmer*s'_k) with s, s' independent random signs, so the expected
    measured jitter (mean |consecutive period diff| / mean period) equals
    `jitter`, and likewise for shimmer.
    """
    rng = np.random.default_rng(seed)
    t0 = 1.0 / freq
    n_cycles = int(np.ceil(duration / t0)) + 2
    signs = rng.choice([-1.0, 1.0], size=n_cycles)
    periods = t0 * (1.0 + jitter * signs)
    amps = amplitude * (1.0 + shimmer * rng.choice([-1.0, 1.0], size=n_cycles))
    bounds = np.concatenate([[0.0], np.cumsum(periods)])
    n = int(duration * rate)
    t = np.arange(n) / rate
    k = np.clip(np.searchsorted(bounds, t, side="right") - 1, 0, n_cycles - 1)
    phase = 2 * np.pi * (t - bounds[k]) / periods[k]
    return AudioClip(clip_id, amps[k] * np.sin(phase), rate)


def noise_clip(duration: float = 1.0, rate: int = 16000, amplitude: float = 0.5,
               seed: int = 0, clip_id: str = "noise") -> AudioClip:
    rng = np.random.default_rng(seed)
    x = amplitude * rng.standard_normal(int(duration * rate))
    return AudioClip(clip_id, np.clip(x, -1.0, 1.0), rate)


def tone_in_noise(freq: float = 220.0, duration: float = 2.0, rate: int = 16000,
                  tone_amp: float = 0.05, noise_amp: float = 0.3, seed: int = 0,
                  clip_id: str = "tone_in_noise") -> AudioClip:
    """Noise throughout, tone only in the middle 60% (so quiet frames reveal
    the true noise floor to a stationary gate)."""
    rng = np.random.default_rng(seed)
    n = int(duration * rate)
    t = np.arange(n) / rate
    x = noise_amp * rng.standard_normal(n)
    a, b = int(0.2 * n), int(0.8 * n)
    x[a:b] += tone_amp * np.sin(2 * np.pi * freq * t[a:b])
    return AudioClip(clip_id, np.clip(x, -1.0, 1.0), rate)


# --- rater panels -----------------------------------------------------------

def adjacent_confusion(accuracy: float, n_classes: int = 3) -> np.ndarray:
    """Confusion matrix whose errors prefer adjacent ordinal classes 2:1."""
    conf = np.zeros((n_classes, n_classes))
    for t in range(n_classes):
        conf[t, t] = accuracy
        others = [c for c in range(n_classes) if c != t]
        w = np.array([1.0 / (1 + abs(c - t)) for c in others])
        conf[t, others] = (1 - accuracy) * w / w.sum()
    return conf


def make_rater_panel(
    n_clips: int,
    rater_confusions: dict[str, np.ndarray],
    class_priors: tuple[float, ...] = (0.3, 0.4, 0.3),
    seed: int = 0,
) -> tuple[dict[str, int], list[AnnotationRecord]]:
    """True labels + one annotation per rater per clip drawn from each
    rater's confusion matrix."""
    rng = np.random.default_rng(seed)
    priors = np.asarray(class_priors) / np.sum(class_priors)
    clip_ids = [f"clip{i:04d}" for i in range(n_clips)]
    truth = {cid: int(rng.choice(len(priors), p=priors)) for cid in clip_ids}
    records = []
    ts = 0.0
    for cid in clip_ids:
        for rater, conf in rater_confusions.items():
            vote = int(rng.choice(conf.shape[1], p=conf[truth[cid]]))
            records.append(AnnotationRecord(cid, rater, CODE_VALUES[vote], ts))
            ts += 1.0
    return truth, records


# --- classification datasets -------------------------------------------------

FEATURE_DIM = 94
INFORMATIVE_FEATURES = (0, 1, 2)


@dataclass
class SyntheticDataset:
    ids: list[str]
    features: np.ndarray      # (n, 94) raw, unnormalized
    embeddings: np.ndarray    # (n, emb_dim)
    labels: np.ndarray        # true labels
    ambiguous: np.ndarray     # bool: pool samples built to confuse the labeller


def make_corrective_dataset(
    n: int,
    seed: int = 0,
    emb_dim: int = 16,
    emb_fidelity: float = 0.8,
    feature_scale: float = 4.0,
    feature_noise: float = 0.6,
    emb_scale: float = 3.0,
    emb_noise: float = 1.0,
    ambiguous_frac: float = 0.0,
    id_prefix: str = "s",
    class_priors: tuple[float, ...] = (0.25, 0.35, 0.40),
) -> SyntheticDataset:
    """Corrective-signal generator.

    Embeddings point at the true class only with probability emb_fidelity
    (else at a wrong class, drawn uniformly), while features always carry the
    true class on three informative dimensions. An `ambiguous_frac` slice
    gets features and embeddings blended halfway toward the next class up,
    which both drags labeller confidence down and poisons its hard labels.
    """
    rng = np.random.default_rng(seed)
    priors = np.asarray(class_priors) / np.sum(class_priors)
    labels = rng.choice(3, size=n, p=priors)
    ids = [f"{id_prefix}{i:05d}" for i in range(n)]

    emb_centroids = np.zeros((3, emb_dim))
    for c in range(3):
        emb_centroids[c, c] = emb_scale
    feat_centroids = np.zeros((3, FEATURE_DIM))
    for c in range(3):
        feat_centroids[c, INFORMATIVE_FEATURES[c]] = feature_scale

    emb_label = labels.copy()
    flip = rng.random(n) >= emb_fidelity
    wrong = (labels + rng.integers(1, 3, size=n)) % 3
    emb_label[flip] = wrong[flip]

    embeddings = emb_centroids[emb_label] + emb_noise * rng.standard_normal((n, emb_dim))
    features = feat_centroids[labels] + feature_noise * rng.standard_normal((n, FEATURE_DIM))

    ambiguous = np.zeros(n, dtype=bool)
    if ambiguous_frac > 0:
        n_amb = int(round(ambiguous_frac * n))
        amb_idx = rng.choice(n, size=n_amb, replace=False)
        ambiguous[amb_idx] = True
        decoy = (labels[amb_idx] + 1) % 3
        # exact midpoint between the true class and a systematic decoy: a
        # calibrated labeller splits its probability mass between the two,
        # and an unfiltered pseudo label is a coin flip biased off-truth
        features[amb_idx] = (
            0.5 * feat_centroids[labels[amb_idx]]
            + 0.5 * feat_centroids[decoy]
            + feature_noise * rng.standard_normal((n_amb, FEATURE_DIM))
        )
        embeddings[amb_idx] = (
            0.5 * emb_centroids[labels[amb_idx]]
            + 0.5 * emb_centroids[decoy]
            + emb_noise * rng.standard_normal((n_amb, emb_dim))
        )
    return SyntheticDataset(ids, features, embeddings, labels, ambiguous)


def make_ordinal_dataset(
    n: int,
    seed: int = 0,
    emb_dim: int = 16,
    step: float = 2.0,
    noise: float = 1.0,
) -> SyntheticDataset:
    """Classes arranged along a line: low and high are two steps apart,
    medium sits between them, in both feature and embedding space. Errors
    of a trained model should therefore concentrate on adjacent classes."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 3, size=n)
    ids = [f"o{i:05d}" for i in range(n)]
    features = noise * rng.standard_normal((n, FEATURE_DIM))
    for j in INFORMATIVE_FEATURES:
        features[:, j] += labels * step
    embeddings = noise * rng.standard_normal((n, emb_dim))
    embeddings[:, 0] += labels * step
    embeddings[:, 1] += labels * step
    return SyntheticDataset(ids, features, embeddings, labels,
                            np.zeros(n, dtype=bool))


def make_blobs(n: int, seed: int = 0, scale: float = 3.0, noise: float = 0.5,
               dim: int = FEATURE_DIM) -> tuple[np.ndarray, np.ndarray]:
    """Well-separated 3-class blobs on the first three dimensions."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 3, size=n)
    centroids = np.zeros((3, dim))
    for c in range(3):
        centroids[c, c] = scale
    x = centroids[labels] + noise * rng.standard_normal((n, dim))
    return x, labels


def make_dominant_feature_data(n: int, seed: int = 0, dim: int = FEATURE_DIM,
                               dominant: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Only `dominant` carries class signal; every other dimension is noise."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 3, size=n)
    x = rng.standard_normal((n, dim))
    x[:, dominant] = labels * 3.0 + 0.3 * rng.standard_normal(n)
    return x, labels
