#!/usr/bin/env python3
"""Generate a synthetic demo workspace for the CLI walkthrough.

Creates WAV clips, a rater panel, feature/embedding stores, labels and a
manifest + run config under the given directory, so every verb in the
README can be exercised without real data:

    python3 scripts/make_demo_workspace.py demo/
    cd demo
    speechconf aggregate --annotations ann.jsonl --out-dir agg
    speechconf foldplan --labels labels.csv --config run.cfg --out folds.json
    speechconf cv --manifest manifest.json --config run.cfg --labels labels.csv \
        --arms gt_only,no_filter,proposed --out-dir cvout
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from speechconf import audio_io, synthetic
from speechconf.annotation import append_annotation_jsonl
from speechconf.features.vector import FeatureVector, write_feature_store
from speechconf.hybrid import EmbeddingRecord, write_embedding_store


def row_to_fv(cid: str, row: np.ndarray) -> FeatureVector:
    return FeatureVector(id=cid, prosodic=row[:88], disfluency_probs=row[88:93],
                         stress_prob=float(row[93]))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", help="workspace directory to create")
    parser.add_argument("--n-labelled", type=int, default=240)
    parser.add_argument("--n-pool", type=int, default=600)
    parser.add_argument("--n-audio", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    ws = Path(args.out_dir)
    ws.mkdir(parents=True, exist_ok=True)

    # a few real WAVs for preprocess/extract and the annotation server
    audio_ids = []
    for i in range(args.n_audio):
        cid = f"aud{i:02d}"
        clip = synthetic.perturbed_sine(freq=160 + 20 * i, jitter=0.01,
                                        seed=args.seed + i, duration=1.5, clip_id=cid)
        audio_io.save_clip(clip, ws / f"{cid}.wav")
        audio_ids.append(cid)
    (ws / "audio_manifest.json").write_text(json.dumps({
        "clips": [{"id": c, "path": f"{c}.wav", "split_role": "labelled"}
                  for c in audio_ids]}, indent=2))

    # rater panel with one unreliable annotator
    confs = {f"r{i}": synthetic.adjacent_confusion(a)
             for i, a in enumerate([0.85, 0.8, 0.75, 0.7, 0.45])}
    _, records = synthetic.make_rater_panel(60, confs, seed=args.seed)
    ann = ws / "ann.jsonl"
    ann.unlink(missing_ok=True)
    for rec in records:
        append_annotation_jsonl(ann, rec)

    # corrective-signal stores for the semi-supervised pipeline
    gt = synthetic.make_corrective_dataset(args.n_labelled, seed=args.seed, id_prefix="gt")
    pool = synthetic.make_corrective_dataset(args.n_pool, seed=args.seed + 1000,
                                             id_prefix="pl", ambiguous_frac=0.3)
    vectors = [row_to_fv(c, gt.features[i]) for i, c in enumerate(gt.ids)]
    vectors += [row_to_fv(c, pool.features[i]) for i, c in enumerate(pool.ids)]
    write_feature_store(ws / "features.csv", vectors)
    embs = [EmbeddingRecord(c, gt.embeddings[i]) for i, c in enumerate(gt.ids)]
    embs += [EmbeddingRecord(c, pool.embeddings[i]) for i, c in enumerate(pool.ids)]
    write_embedding_store(ws / "embeddings.emb", embs)
    with open(ws / "labels.csv", "w", encoding="utf-8") as fh:
        fh.write("clip_id,label\n")
        for i, c in enumerate(gt.ids):
            fh.write(f"{c},{int(gt.labels[i])}\n")
    (ws / "manifest.json").write_text(json.dumps({
        "clips": ([{"id": c, "path": f"{c}.wav", "split_role": "labelled"} for c in gt.ids]
                  + [{"id": c, "path": f"{c}.wav", "split_role": "pool"} for c in pool.ids]),
        "feature_store": "features.csv",
        "embedding_store": "embeddings.emb",
        "annotations": "ann.jsonl",
        "fold_plan": "folds.json",
    }, indent=2))
    (ws / "run.cfg").write_text("\n".join([
        "# demo configuration: small synthetic scale, faster-than-paper rates",
        f"seed = {args.seed}",
        "folds.k = 3",
        f"folds.seed = {args.seed}",
        "labeller.epochs = 80",
        "labeller.internal_folds = 3",
        "hybrid.epochs = 25",
        "hybrid.lr_embedding = 0.01",
        "hybrid.lr_features = 0.005",
    ]) + "\n")

    print(f"demo workspace ready in {ws}/")
    print("next: speechconf foldplan --labels labels.csv --config run.cfg --out folds.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
