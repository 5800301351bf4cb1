import warnings

import numpy as np
import pytest

from speechconf.features.vector import FeatureVector
from speechconf.hybrid import EmbeddingRecord


@pytest.fixture(autouse=True)
def _quiet_duration_warnings():
    # synthetic clips are deliberately short; the 5-12 s advisory is noise here
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*duration.*outside.*")
        warnings.filterwarnings("ignore", message=".*no voiced frames.*")
        yield


def row_to_fv(cid: str, row: np.ndarray) -> FeatureVector:
    return FeatureVector(
        id=cid,
        prosodic=row[:88],
        disfluency_probs=row[88:93],
        stress_prob=float(row[93]),
    )


def rows_to_stores(ids, features, embeddings):
    feats = {cid: row_to_fv(cid, features[i]) for i, cid in enumerate(ids)}
    embs = {cid: EmbeddingRecord(cid, embeddings[i]) for i, cid in enumerate(ids)}
    return feats, embs
