"""Stratified fold assignment, fixed once and checksum-verified thereafter."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from speechconf.errors import ChecksumMismatch, ClassTooSmall


def _checksum(assignments: dict[str, int], k: int, seed: int) -> str:
    canon = json.dumps(
        {"k": k, "seed": seed, "assignments": sorted(assignments.items())},
        separators=(",", ":"),
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class FoldPlan:
    k: int
    assignments: dict[str, int]
    seed: int
    created_at: float
    checksum: str = field(default="")

    def __post_init__(self):
        if not self.checksum:
            self.checksum = _checksum(self.assignments, self.k, self.seed)

    def verify(self) -> None:
        if _checksum(self.assignments, self.k, self.seed) != self.checksum:
            raise ChecksumMismatch("fold plan content does not match its checksum")

    def test_ids(self, fold: int) -> set[str]:
        return {cid for cid, f in self.assignments.items() if f == fold}

    def trainval_ids(self, fold: int) -> set[str]:
        return {cid for cid, f in self.assignments.items() if f != fold}


def make_fold_plan(labels: dict[str, int], k: int = 5, seed: int = 0) -> FoldPlan:
    """Per-class round-robin assignment after a seeded shuffle.

    Stratification is exact up to remainders: fold class counts differ by at
    most one sample. Requires at least k samples of every class.
    """
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[str]] = {}
    for cid, lab in labels.items():
        by_class.setdefault(int(lab), []).append(cid)
    assignments: dict[str, int] = {}
    for lab in sorted(by_class):
        ids = sorted(by_class[lab])
        if len(ids) < k:
            raise ClassTooSmall(f"class {lab} has {len(ids)} samples; needs >= {k}")
        rng.shuffle(ids)
        for i, cid in enumerate(ids):
            assignments[cid] = i % k
    return FoldPlan(k=k, assignments=assignments, seed=seed, created_at=time.time())


def save_fold_plan(plan: FoldPlan, path: str | Path) -> None:
    doc = {
        "k": plan.k,
        "seed": plan.seed,
        "created_at": plan.created_at,
        "checksum": plan.checksum,
        "assignments": dict(sorted(plan.assignments.items())),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


def load_fold_plan(path: str | Path) -> FoldPlan:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    plan = FoldPlan(
        k=doc["k"],
        assignments={str(c): int(f) for c, f in doc["assignments"].items()},
        seed=doc["seed"],
        created_at=doc["created_at"],
        checksum=doc["checksum"],
    )
    plan.verify()
    return plan


def stratified_split(labels: np.ndarray, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """(main_idx, held_out_idx) with per-class proportions preserved."""
    rng = np.random.default_rng(seed)
    held = []
    for lab in np.unique(labels):
        idx = np.nonzero(labels == lab)[0]
        rng.shuffle(idx)
        n_held = max(1, int(round(len(idx) * fraction)))
        held.extend(idx[:n_held])
    held = np.sort(np.asarray(held, dtype=np.int64))
    main = np.setdiff1d(np.arange(len(labels)), held)
    return main, held
