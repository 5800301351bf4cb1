"""94-dim feature vectors, z-score normalization, and the feature store CSV."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from speechconf.errors import (
    DimensionMismatch,
    DoubleNormalization,
    EmptyTrainingSet,
    HeaderMismatch,
    NonFiniteValue,
    ProbabilityOutOfRange,
)
from speechconf.features.functionals import EGEMAPS_LITE_88, FeatureLayout

PROSODIC_DIM = 88
TOTAL_DIM = 94
STD_FLOOR = 1e-8

DISFLUENCY_NAMES = ("block", "prolongation", "interjection", "word_repetition", "sound_repetition")
STORE_HEADER = (
    ["id"]
    + [f"f_{i:03d}" for i in range(PROSODIC_DIM)]
    + ["disf_block", "disf_prolong", "disf_interj", "disf_wordrep", "disf_soundrep", "stress"]
)


@dataclass
class FeatureVector:
    """Prosodic functionals plus auxiliary probabilities: [prosodic; d; s]."""

    id: str
    prosodic: np.ndarray            # 88, layout order
    disfluency_probs: np.ndarray    # 5, in [0,1] pre-normalization
    stress_prob: float
    normalized: bool = False
    all_unvoiced: bool = False
    norm_ref: str | None = None     # fingerprint of the Normalizer applied

    def __post_init__(self):
        self.prosodic = np.asarray(self.prosodic, dtype=np.float64)
        self.disfluency_probs = np.asarray(self.disfluency_probs, dtype=np.float64)
        if self.prosodic.shape != (PROSODIC_DIM,):
            raise DimensionMismatch(f"prosodic must have {PROSODIC_DIM} entries")
        if self.disfluency_probs.shape != (len(DISFLUENCY_NAMES),):
            raise DimensionMismatch(f"need {len(DISFLUENCY_NAMES)} disfluency probabilities")
        if not np.isfinite(self.values).all():
            raise NonFiniteValue(f"feature vector {self.id} has non-finite entries")

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.prosodic, self.disfluency_probs, [self.stress_prob]])


def assemble_feature_vector(
    id: str,
    prosodic: np.ndarray,
    disfluency_probs: np.ndarray,
    stress_prob: float,
    all_unvoiced: bool = False,
) -> FeatureVector:
    """Build the 94-dim vector; auxiliary probabilities must lie in [0, 1]."""
    probs = np.asarray(disfluency_probs, dtype=np.float64)
    aux = np.append(probs, stress_prob)
    if ((aux < 0.0) | (aux > 1.0)).any():
        raise ProbabilityOutOfRange(f"auxiliary probabilities for {id} outside [0, 1]")
    return FeatureVector(
        id=id,
        prosodic=prosodic,
        disfluency_probs=probs,
        stress_prob=float(stress_prob),
        all_unvoiced=all_unvoiced,
    )


@dataclass
class Normalizer:
    """Per-dimension z-score statistics; fit on a training partition only."""

    mean: np.ndarray
    std: np.ndarray
    fingerprint: str = field(init=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != (TOTAL_DIM,) or self.std.shape != (TOTAL_DIM,):
            raise DimensionMismatch(f"normalizer statistics must have {TOTAL_DIM} entries")
        if (self.std <= 0).any():
            raise ValueError("std entries must be positive")
        h = hashlib.sha256(self.mean.tobytes() + self.std.tobytes())
        self.fingerprint = h.hexdigest()[:16]


def normalizer_fit(train: list[FeatureVector]) -> Normalizer:
    if len(train) < 2:
        raise EmptyTrainingSet("normalizer needs at least 2 training vectors")
    mat = np.stack([fv.values for fv in train])
    return Normalizer(mean=mat.mean(axis=0), std=np.maximum(mat.std(axis=0), STD_FLOOR))


def normalizer_apply(norm: Normalizer, fv: FeatureVector) -> FeatureVector:
    if fv.normalized:
        raise DoubleNormalization(f"vector {fv.id} is already normalized")
    z = (fv.values - norm.mean) / norm.std
    out = FeatureVector.__new__(FeatureVector)
    out.id = fv.id
    out.prosodic = z[:PROSODIC_DIM]
    out.disfluency_probs = z[PROSODIC_DIM:PROSODIC_DIM + len(DISFLUENCY_NAMES)]
    out.stress_prob = float(z[-1])
    out.normalized = True
    out.all_unvoiced = fv.all_unvoiced
    out.norm_ref = norm.fingerprint
    return out


# --- feature store CSV ----------------------------------------------------

def write_feature_store(path: str | Path, vectors: list[FeatureVector]) -> None:
    """CSV with full-precision (shortest round-trip) floats, '.' decimal."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(STORE_HEADER)
        for fv in vectors:
            w.writerow([fv.id] + [repr(float(v)) for v in fv.values])


def read_feature_store(path: str | Path) -> dict[str, FeatureVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != STORE_HEADER:
            raise HeaderMismatch(f"{path}: unexpected feature store header")
        out: dict[str, FeatureVector] = {}
        for row in r:
            if len(row) != len(STORE_HEADER):
                raise DimensionMismatch(f"{path}: row for {row[0] if row else '?'} malformed")
            vals = _parse_floats(row[1:], path)
            out[row[0]] = FeatureVector(
                id=row[0],
                prosodic=vals[:PROSODIC_DIM],
                disfluency_probs=vals[PROSODIC_DIM:PROSODIC_DIM + 5],
                stress_prob=float(vals[-1]),
            )
        return out


def _parse_floats(cells: list[str], path) -> np.ndarray:
    vals = np.asarray([float(c) for c in cells], dtype=np.float64)
    if not np.isfinite(vals).all():
        raise NonFiniteValue(f"{path}: non-finite value in row")
    return vals


def ingest_external_features(
    path: str | Path, layout: FeatureLayout = EGEMAPS_LITE_88
) -> dict[str, np.ndarray]:
    """Read an externally-extracted 88-column CSV keyed by layout slot names.

    Interop path for users with a true eGeMAPS extractor: the header must be
    `id` followed by the 88 slot names in layout order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None:
            raise HeaderMismatch(f"{path}: empty file")
        if len(header) != 1 + PROSODIC_DIM:
            raise DimensionMismatch(
                f"{path}: expected {1 + PROSODIC_DIM} columns, found {len(header)}"
            )
        if header[0] != "id" or tuple(header[1:]) != layout.slots:
            raise HeaderMismatch(f"{path}: header does not match layout {layout.name!r}")
        out: dict[str, np.ndarray] = {}
        for row in r:
            if len(row) != 1 + PROSODIC_DIM:
                raise DimensionMismatch(f"{path}: row for {row[0] if row else '?'} malformed")
            out[row[0]] = _parse_floats(row[1:], path)
        return out
