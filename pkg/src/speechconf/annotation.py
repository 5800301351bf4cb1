"""Multi-rater ordinal annotations: reliability (ICC 2,k) and consensus (Dawid-Skene).

Ordinal values are encoded low=0, medium=1, high=2. Cells can also be
NOT_CLEAR or missing; rows containing either are excluded from the ICC
complete-case set but still contribute their valid votes to consensus.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import f as f_dist

from speechconf.errors import (
    ClipWithoutValidAnnotations,
    InsufficientCompleteCases,
)

CLASS_NAMES = ("low", "medium", "high")
NOT_CLEAR = -1
MISSING = -2
N_CLASSES = 3

VALUE_CODES = {"low": 0, "medium": 1, "high": 2, "not_clear": NOT_CLEAR}
CODE_VALUES = {v: k for k, v in VALUE_CODES.items()}


@dataclass(frozen=True)
class AnnotationRecord:
    clip_id: str
    rater_id: str
    value: str  # low | medium | high | not_clear
    timestamp: float

    def __post_init__(self):
        if self.value not in VALUE_CODES:
            raise ValueError(f"invalid annotation value {self.value!r}")


@dataclass
class RaterMatrix:
    clips: list[str]
    raters: list[str]
    cells: np.ndarray  # (n_clips, n_raters) int: 0/1/2, NOT_CLEAR, MISSING

    def complete_case_rows(self) -> np.ndarray:
        """Boolean mask of rows with a valid ordinal value from every rater."""
        return (self.cells >= 0).all(axis=1)


@dataclass
class IccResult:
    icc_single: float
    icc_average: float
    f_stat: float
    df1: int
    df2: int
    ci95_low: float   # CI of the average-measures (consensus) ICC
    ci95_high: float
    n_used: int


@dataclass
class ConsensusLabels:
    clip_ids: list[str]
    posteriors: np.ndarray          # (n_clips, 3)
    rater_ids: list[str]
    confusion: dict[str, np.ndarray]  # rater -> (3, 3), rows = true class
    class_priors: np.ndarray
    iterations: int
    converged: bool
    log_likelihood: list[float] = field(default_factory=list)
    penalized_objective: list[float] = field(default_factory=list)

    def hard_labels(self) -> dict[str, int]:
        return {cid: int(np.argmax(self.posteriors[i])) for i, cid in enumerate(self.clip_ids)}


def build_rater_matrix(records: list[AnnotationRecord]) -> RaterMatrix:
    """Assemble the clips x raters matrix; duplicate (clip, rater) pairs keep
    the latest timestamp."""
    latest: dict[tuple[str, str], AnnotationRecord] = {}
    for rec in records:
        key = (rec.clip_id, rec.rater_id)
        if key not in latest or rec.timestamp >= latest[key].timestamp:
            latest[key] = rec
    clips = sorted({r.clip_id for r in latest.values()})
    raters = sorted({r.rater_id for r in latest.values()})
    cells = np.full((len(clips), len(raters)), MISSING, dtype=np.int64)
    ci = {c: i for i, c in enumerate(clips)}
    ri = {r: i for i, r in enumerate(raters)}
    for rec in latest.values():
        cells[ci[rec.clip_id], ri[rec.rater_id]] = VALUE_CODES[rec.value]
    return RaterMatrix(clips=clips, raters=raters, cells=cells)


def icc_2k(matrix: RaterMatrix) -> IccResult:
    """ICC(2,1) and ICC(2,k): two-way random effects, absolute agreement.

    Complete-case analysis; ordinal labels treated as interval-scaled reals.
    The 95% CI is the standard F-bounds interval for the single-rater ICC,
    stepped up to average measures via Spearman-Brown.
    """
    mask = matrix.complete_case_rows()
    data = matrix.cells[mask].astype(np.float64)
    n, k = data.shape
    if n < 2 or k < 2:
        raise InsufficientCompleteCases(f"complete cases {n} x raters {k}; need >= 2 x 2")

    grand = data.mean()
    rows = data.mean(axis=1)
    cols = data.mean(axis=0)
    msr = k * np.sum((rows - grand) ** 2) / (n - 1)
    msc = n * np.sum((cols - grand) ** 2) / (k - 1)
    resid = data - rows[:, None] - cols[None, :] + grand
    mse = np.sum(resid**2) / ((n - 1) * (k - 1))

    df1, df2 = n - 1, (n - 1) * (k - 1)
    if mse <= 1e-300:
        # zero residual disagreement: perfect reliability
        single = 1.0 if msr > 0 else 0.0
        return IccResult(single, single, np.inf, df1, df2, single, single, n)

    single = (msr - mse) / (msr + (k - 1) * mse + (k / n) * (msc - mse))
    average = (msr - mse) / (msr + (msc - mse) / n)
    f_stat = msr / mse

    # McGraw & Wong CI for ICC(2,1), then Spearman-Brown to ICC(2,k)
    alpha = 0.05
    fj = msc / mse
    vn = df2 * (k * single * fj + n * (1 + (k - 1) * single) - k * single) ** 2
    vd = df1 * k**2 * single**2 * fj**2 + (n * (1 + (k - 1) * single) - k * single) ** 2
    v = vn / vd
    f_lo = f_dist.ppf(1 - alpha / 2, df1, v)
    f_hi = f_dist.ppf(1 - alpha / 2, v, df1)
    lb1 = n * (msr - f_lo * mse) / (f_lo * (k * msc + (k * n - k - n) * mse) + n * msr)
    ub1 = n * (f_hi * msr - mse) / (k * msc + (k * n - k - n) * mse + n * f_hi * msr)

    def sb(x: float) -> float:
        return k * x / (1 + (k - 1) * x)

    return IccResult(
        icc_single=float(single),
        icc_average=float(average),
        f_stat=float(f_stat),
        df1=df1,
        df2=df2,
        ci95_low=float(sb(lb1)),
        ci95_high=float(sb(ub1)),
        n_used=n,
    )


# --- Dawid-Skene ----------------------------------------------------------

DS_SMOOTHING = 0.01


def _majority_posteriors(cells: np.ndarray) -> np.ndarray:
    n = cells.shape[0]
    post = np.zeros((n, N_CLASSES))
    for i in range(n):
        votes = np.bincount(cells[i][cells[i] >= 0], minlength=N_CLASSES)
        top = votes.max()
        tied = votes == top
        post[i, tied] = 1.0 / tied.sum()
    return post


def _estimate_params(cells: np.ndarray, post: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """M-step: class priors and per-rater confusion rows, additively smoothed."""
    n, k = cells.shape
    priors = (post.sum(axis=0) + DS_SMOOTHING) / (n + N_CLASSES * DS_SMOOTHING)
    conf = np.zeros((k, N_CLASSES, N_CLASSES))
    for r in range(k):
        valid = cells[:, r] >= 0
        counts = np.zeros((N_CLASSES, N_CLASSES))
        for v in range(N_CLASSES):
            sel = valid & (cells[:, r] == v)
            counts[:, v] = post[sel].sum(axis=0)
        counts += DS_SMOOTHING
        conf[r] = counts / counts.sum(axis=1, keepdims=True)
    return priors, conf


def _posteriors_given_params(
    cells: np.ndarray, priors: np.ndarray, conf: np.ndarray
) -> tuple[np.ndarray, float]:
    """E-step in log space; returns (posteriors, data log-likelihood)."""
    n, k = cells.shape
    log_post = np.tile(np.log(priors), (n, 1))
    for r in range(k):
        valid = cells[:, r] >= 0
        votes = cells[valid, r]
        log_post[valid] += np.log(conf[r][:, votes]).T
    mx = log_post.max(axis=1, keepdims=True)
    lik = np.exp(log_post - mx)
    z = lik.sum(axis=1, keepdims=True)
    ll = float(np.sum(np.log(z) + mx))
    return lik / z, ll


def _penalty(priors: np.ndarray, conf: np.ndarray) -> float:
    # Dirichlet(1 + smoothing) log-prior matching the smoothed M-step
    return DS_SMOOTHING * (float(np.sum(np.log(conf))) + float(np.sum(np.log(priors))))


def dawid_skene(matrix: RaterMatrix, max_iters: int = 100, tol: float = 1e-6) -> ConsensusLabels:
    """EM consensus over ordinal annotations.

    Initialized from per-clip majority vote (ties split uniformly); the
    M-step smooths priors and confusion rows by 0.01, so the quantity with a
    monotonicity guarantee is the penalized objective (LL + Dirichlet prior);
    both histories are recorded.
    """
    cells = matrix.cells
    valid_any = (cells >= 0).any(axis=1)
    if not valid_any.all():
        bad = [matrix.clips[i] for i in np.nonzero(~valid_any)[0]]
        raise ClipWithoutValidAnnotations(f"clips without valid annotations: {bad[:5]}")

    post = _majority_posteriors(cells)
    if cells.shape[1] == 1:
        # single rater: the model is unidentifiable (any prior/confusion pair
        # matching the vote marginal has equal likelihood) and iterating only
        # drifts toward the smoothing prior. One M/E pass keeps the no-
        # counter-evidence answer: the rater's own labels.
        priors, conf = _estimate_params(cells, post)
        post, ll = _posteriors_given_params(cells, priors, conf)
        return ConsensusLabels(
            clip_ids=list(matrix.clips),
            posteriors=post,
            rater_ids=list(matrix.raters),
            confusion={matrix.raters[0]: conf[0]},
            class_priors=priors,
            iterations=1,
            converged=True,
            log_likelihood=[ll],
            penalized_objective=[ll + _penalty(priors, conf)],
        )
    ll_hist: list[float] = []
    obj_hist: list[float] = []
    converged = False
    iters = 0
    for iters in range(1, max_iters + 1):
        priors, conf = _estimate_params(cells, post)
        new_post, ll = _posteriors_given_params(cells, priors, conf)
        ll_hist.append(ll)
        obj_hist.append(ll + _penalty(priors, conf))
        delta = float(np.max(np.abs(new_post - post)))
        post = new_post
        if delta < tol:
            converged = True
            break
    priors, conf = _estimate_params(cells, post)

    return ConsensusLabels(
        clip_ids=list(matrix.clips),
        posteriors=post,
        rater_ids=list(matrix.raters),
        confusion={r: conf[i] for i, r in enumerate(matrix.raters)},
        class_priors=priors,
        iterations=iters,
        converged=converged,
        log_likelihood=ll_hist,
        penalized_objective=obj_hist,
    )


AMBIGUOUS_POSTERIOR = 0.5


def derive_consensus_dataset(
    matrix: RaterMatrix, consensus: ConsensusLabels
) -> dict[str, dict]:
    """Hard label per clip; posteriors under 0.5 are flagged, never dropped."""
    out: dict[str, dict] = {}
    for i, cid in enumerate(consensus.clip_ids):
        p = consensus.posteriors[i]
        label = int(np.argmax(p))
        out[cid] = {
            "label": label,
            "posterior": float(p[label]),
            "ambiguous": bool(p[label] < AMBIGUOUS_POSTERIOR),
        }
    return out


# --- file formats ---------------------------------------------------------

def read_annotations_jsonl(path: str | Path) -> list[AnnotationRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            records.append(
                AnnotationRecord(
                    clip_id=d["clip_id"],
                    rater_id=d["rater_id"],
                    value=d["value"],
                    timestamp=float(d["ts"]),
                )
            )
    return records


def append_annotation_jsonl(path: str | Path, rec: AnnotationRecord) -> None:
    line = json.dumps(
        {"clip_id": rec.clip_id, "rater_id": rec.rater_id, "value": rec.value, "ts": rec.timestamp},
        sort_keys=True,
    )
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")


def matrix_csv_text(matrix: RaterMatrix) -> str:
    """Rows = clips, columns = raters; cells 0|1|2|NC| (empty = missing)."""
    cell_text = {0: "0", 1: "1", 2: "2", NOT_CLEAR: "NC", MISSING: ""}
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["clip_id"] + matrix.raters)
    for i, cid in enumerate(matrix.clips):
        w.writerow([cid] + [cell_text[int(v)] for v in matrix.cells[i]])
    return buf.getvalue()


def write_matrix_csv(matrix: RaterMatrix, path: str | Path) -> None:
    Path(path).write_text(matrix_csv_text(matrix), encoding="utf-8")
