"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 validation error (bad flags, malformed inputs),
2 runtime failure. Errors go to stderr as `error: <kind>: <message>` lines.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from speechconf import annotation as ann
from speechconf import audio_io, calibration, evaluation, folds, report
from speechconf.config import DatasetManifest, load_manifest, load_run_config
from speechconf.errors import ConfigError, SpeechConfError
from speechconf.features import (
    EGEMAPS_LITE_88,
    Normalizer,
    apply_functionals,
    assemble_feature_vector,
    compute_llds,
    ingest_external_features,
    normalizer_apply,
    normalizer_fit,
    read_feature_store,
    write_feature_store,
)
from speechconf.hybrid import (
    GROUND_TRUTH,
    PSEUDO,
    Sample,
    read_embeddings,
    save_hybrid,
)
from speechconf.neural.checkpoint import load_state, save_state
from speechconf.neural.model import MlpModel
from speechconf.pseudo import (
    Labeller,
    generate_pseudo_labels,
    save_pseudo_set,
    train_labeller,
)

AUX_HEADER = ["id", "disf_block", "disf_prolong", "disf_interj",
              "disf_wordrep", "disf_soundrep", "stress"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); contract says 1
        print(f"error: usage: {message}", file=sys.stderr)
        raise SystemExit(1)


def _fail(kind: str, message: str, code: int) -> int:
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _read_labels_csv(path: Path) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames is None or "clip_id" not in r.fieldnames or "label" not in r.fieldnames:
            raise ConfigError(f"{path}: need clip_id and label columns")
        for row in r:
            out[row["clip_id"]] = int(row["label"])
    return out


def _read_aux_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != AUX_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(AUX_HEADER)}")
        return {row[0]: np.asarray([float(v) for v in row[1:]]) for row in r}


# --- verbs ---------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    manifest = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = audio_io.DenoiseConfig() if args.denoise else None
    for clip_entry in manifest.clips:
        clip = audio_io.load_clip(clip_entry.path)
        clip = audio_io.preprocess(clip)
        if cfg is not None:
            clip = audio_io.denoise(clip, cfg)
        audio_io.save_clip(clip, out_dir / f"{clip_entry.id}.wav")
    print(f"wrote {len(manifest.clips)} canonical clips to {out_dir}")
    return 0


def cmd_extract(args) -> int:
    manifest = load_manifest(args.manifest)
    aux = _read_aux_csv(Path(args.aux)) if args.aux else {}
    if not aux:
        print("warning: no auxiliary probabilities supplied; using zeros", file=sys.stderr)
    external = (
        ingest_external_features(args.external, EGEMAPS_LITE_88) if args.external else None
    )
    vectors = []
    for clip_entry in manifest.clips:
        if external is not None:
            if clip_entry.id not in external:
                return _fail("MissingStore", f"external features lack id {clip_entry.id!r}", 1)
            prosodic = external[clip_entry.id]
            all_unvoiced = False
        else:
            if not clip_entry.path.exists():
                return _fail("NotFound", f"audio for clip {clip_entry.id!r} missing", 1)
            clip = audio_io.load_clip(clip_entry.path)
            clip = audio_io.preprocess(clip)
            if args.denoise:
                clip = audio_io.denoise(clip)
            llds = compute_llds(clip)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                prosodic = apply_functionals(llds)
            all_unvoiced = not llds.voiced_flag.any()
        aux_row = aux.get(clip_entry.id, np.zeros(6))
        vectors.append(
            assemble_feature_vector(
                clip_entry.id, prosodic, aux_row[:5], float(aux_row[5]),
                all_unvoiced=all_unvoiced,
            )
        )
    write_feature_store(args.out, vectors)
    print(f"wrote {len(vectors)} feature vectors to {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    with open(args.logits, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if not header or header[0] != "id" or header[-1] != "label":
            raise ConfigError(f"{args.logits}: expected header id,z_0..z_k,label")
        ids, rows, labels = [], [], []
        for row in r:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:-1]])
            labels.append(int(row[-1]))
    logits = np.asarray(rows)
    model = calibration.fit_temperature(logits, np.asarray(labels))
    probs = calibration.apply_temperature(logits, model.temperature)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["id"] + [f"p_{i}" for i in range(probs.shape[1])])
        for i, cid in enumerate(ids):
            w.writerow([cid] + [repr(float(v)) for v in probs[i]])
    finally:
        if args.out:
            out.close()
    print(f"T = {model.temperature:.6f}  nll_before = {model.fitted_nll_before:.6f}  "
          f"nll_after = {model.fitted_nll_after:.6f}")
    return 0


def cmd_aggregate(args) -> int:
    records = ann.read_annotations_jsonl(args.annotations)
    matrix = ann.build_rater_matrix(records)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ann.write_matrix_csv(matrix, out_dir / "matrix.csv")

    icc_doc: dict | None = None
    try:
        icc = ann.icc_2k(matrix)
        icc_doc = {
            "icc_single": icc.icc_single,
            "icc_average": icc.icc_average,
            "f_stat": icc.f_stat,
            "df1": icc.df1,
            "df2": icc.df2,
            "ci95": [icc.ci95_low, icc.ci95_high],
            "n_used": icc.n_used,
        }
    except SpeechConfError as exc:
        icc_doc = {"unavailable": str(exc)}
    consensus = ann.dawid_skene(matrix)
    labels = ann.derive_consensus_dataset(matrix, consensus)

    (out_dir / "icc_report.json").write_text(
        json.dumps(icc_doc, indent=2, sort_keys=True), encoding="utf-8"
    )
    with open(out_dir / "consensus.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["clip_id", "label", "posterior", "ambiguous"])
        for cid in sorted(labels):
            row = labels[cid]
            w.writerow([cid, row["label"], repr(row["posterior"]), int(row["ambiguous"])])
    if "unavailable" in icc_doc:
        print(f"aggregated {len(labels)} clips (ICC unavailable)")
    else:
        print(f"aggregated {len(labels)} clips (ICC(2,k)={icc_doc['icc_average']:.3f})")
    return 0


def cmd_foldplan(args) -> int:
    labels = _read_labels_csv(Path(args.labels))
    cfg = load_run_config(args.config)
    k = args.k if args.k is not None else cfg["folds.k"]
    seed = args.seed if args.seed is not None else cfg["folds.seed"]
    plan = folds.make_fold_plan(labels, k=k, seed=seed)
    folds.save_fold_plan(plan, args.out)
    print(plan.checksum)
    return 0


def _load_cv_inputs(args):
    manifest = load_manifest(args.manifest)
    cfg = load_run_config(args.config)
    if manifest.feature_store is None or not manifest.feature_store.exists():
        raise ConfigError("manifest lacks a readable feature_store")
    features = read_feature_store(manifest.feature_store)
    labels = _read_labels_csv(Path(args.labels))
    if manifest.fold_plan is None or not manifest.fold_plan.exists():
        raise ConfigError("manifest lacks a readable fold_plan")
    plan = folds.load_fold_plan(manifest.fold_plan)
    return manifest, cfg, features, labels, plan


def cmd_train_labeller(args) -> int:
    manifest, cfg, features, labels, plan = _load_cv_inputs(args)
    fold = args.fold
    test_ids = plan.test_ids(fold)
    trainval = sorted(plan.trainval_ids(fold))
    y = np.asarray([labels[c] for c in trainval], dtype=np.int64)

    hybrid_cfg = cfg.hybrid_config()
    tr_idx, _ = folds.stratified_split(y, hybrid_cfg.val_fraction, hybrid_cfg.seed)
    norm = normalizer_fit([features[trainval[i]] for i in tr_idx])
    x = np.stack([normalizer_apply(norm, features[c]).values for c in trainval])

    labeller = train_labeller(trainval, x, y, cfg.labeller_config(), forbidden_ids=test_ids)
    extra = {
        "role": "labeller",
        "fold": fold,
        "temperature": labeller.temperature,
        "normalizer_mean": norm.mean.tolist(),
        "normalizer_std": norm.std.tolist(),
        "report": labeller.report,
    }
    meta = {
        "kind": "mlp",
        "layer_specs": labeller.model.layer_specs,
        "seed": labeller.model.seed,
        "extra": extra,
    }
    save_state(args.out, meta, labeller.model.get_state())
    Path(args.out).with_suffix(".report.json").write_text(
        json.dumps(labeller.report, indent=2, sort_keys=True), encoding="utf-8"
    )
    print(f"labeller fold {fold}: internal macro-F1 "
          f"{labeller.report['mean_macro_f1']:.3f} -> {args.out}")
    return 0


def cmd_pseudo(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = load_run_config(args.config)
    meta, state = load_state(args.labeller)
    extra = meta["extra"]
    model = MlpModel(meta["layer_specs"], seed=meta["seed"])
    model.set_state(state)
    model.eval()
    norm = Normalizer(np.asarray(extra["normalizer_mean"]), np.asarray(extra["normalizer_std"]))
    labeller = Labeller(model=model, temperature=extra["temperature"], report=extra["report"],
                        train_ids=[], val_ids=[])

    features = read_feature_store(manifest.feature_store)
    pool_ids = sorted(set(manifest.pool_ids()) & set(features))
    if not pool_ids:
        return _fail("MissingStore", "manifest has no pool clips with features", 1)
    pool_x = np.stack([normalizer_apply(norm, features[c]).values for c in pool_ids])
    pseudo = generate_pseudo_labels(
        labeller, pool_ids, pool_x, set(manifest.labelled_ids()),
        cfg.pseudo_config(), fold=extra["fold"],
    )
    save_pseudo_set(pseudo, args.out)
    print(f"retained {pseudo.retained}/{pseudo.pool_size} pool samples at tau={pseudo.tau}")
    return 0


def _build_cv_data(manifest: DatasetManifest, features, labels, plan) -> evaluation.CvData:
    if manifest.embedding_store is None or not manifest.embedding_store.exists():
        raise ConfigError("manifest lacks a readable embedding_store")
    embeddings = read_embeddings(manifest.embedding_store)
    labelled = set(manifest.labelled_ids())
    pool = set(manifest.pool_ids())
    return evaluation.CvData(
        features={c: features[c] for c in labelled if c in features},
        embeddings={c: embeddings[c] for c in labelled if c in embeddings},
        labels={c: labels[c] for c in labelled if c in labels},
        pool_features={c: features[c] for c in pool if c in features},
        pool_embeddings={c: embeddings[c] for c in pool if c in embeddings},
        plan=plan,
    )


def cmd_train_hybrid(args) -> int:
    manifest, cfg, features, labels, plan = _load_cv_inputs(args)
    data = _build_cv_data(manifest, features, labels, plan)
    fold = args.fold
    test_ids = plan.test_ids(fold)
    trainval = sorted(plan.trainval_ids(fold))
    y = np.asarray([labels[c] for c in trainval], dtype=np.int64)
    hybrid_cfg = cfg.hybrid_config()

    tr_idx, _ = folds.stratified_split(y, hybrid_cfg.val_fraction, hybrid_cfg.seed)
    norm = normalizer_fit([features[trainval[i]] for i in tr_idx])

    gt = [
        Sample(c, normalizer_apply(norm, features[c]), data.embeddings[c],
               labels[c], GROUND_TRUTH, fold)
        for c in trainval
    ]
    pseudo_samples = []
    if args.pseudo:
        from speechconf.pseudo import load_pseudo_set

        pset = load_pseudo_set(args.pseudo)
        for cid, lab, _prob, _f in pset.samples:
            pseudo_samples.append(
                Sample(cid, normalizer_apply(norm, data.pool_features[cid]),
                       data.pool_embeddings[cid], lab, PSEUDO, fold)
            )
    from speechconf.hybrid import train_hybrid as _train

    model, history = _train(gt, pseudo_samples, hybrid_cfg, forbidden_ids=test_ids)
    save_hybrid(model, args.out, extra={"fold": fold, "history": history,
                                        "normalizer_mean": norm.mean.tolist(),
                                        "normalizer_std": norm.std.tolist()})
    best = max((h["val_macro_f1"] for h in history), default=float("nan"))
    print(f"hybrid fold {fold}: best val macro-F1 {best:.3f} -> {args.out}")
    return 0


def cmd_cv(args) -> int:
    manifest, cfg, features, labels, plan = _load_cv_inputs(args)
    data = _build_cv_data(manifest, features, labels, plan)
    arms = [a.strip() for a in args.arms.split(",") if a.strip()]
    result = evaluation.run_cv(
        arms, data,
        hybrid_cfg=cfg.hybrid_config(),
        labeller_cfg=cfg.labeller_config(),
        pseudo_cfg=cfg.pseudo_config(),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_reports(result, out_dir, svg=not args.no_svg)
    cfg.write_resolved(out_dir / "resolved.cfg")
    provenance = {
        "fold_plan_checksum": plan.checksum,
        "store_hashes": {
            "features": _file_hash(manifest.feature_store),
            "embeddings": _file_hash(manifest.embedding_store),
        },
        "arms": arms,
        "artifacts": [
            {
                "fold": a.fold,
                "labeller_train_ids": sorted(a.labeller_train_ids),
                "hybrid_train_ids": sorted(a.hybrid_train_ids),
                "normalizer_fit_ids": sorted(a.normalizer_fit_ids),
                "pool_ids": sorted(a.pool_ids),
            }
            for a in result.artifacts
        ],
    }
    (out_dir / "artifacts.json").write_text(
        json.dumps(provenance, indent=2, sort_keys=True), encoding="utf-8"
    )
    print(f"audit: {'PASS' if result.audit.passed else 'FAIL'}")
    for arm in arms:
        s = result.summaries[arm]
        print(f"{arm}: macro-F1 {s.macro_f1_mean:.3f} +- {s.macro_f1_std:.3f}")
    return 0


def cmd_report(args) -> int:
    doc = json.loads(Path(args.cv_json).read_text(encoding="utf-8"))
    summaries = {}
    for arm, sdoc in doc["summaries"].items():
        reports = [
            evaluation.FoldReport(
                fold=r["fold"],
                arm=arm,
                per_class_f1=np.asarray([r["f1_low"], r["f1_medium"], r["f1_high"]]),
                macro_f1=r["macro_f1"],
                confusion=np.asarray(r["confusion"]),
                n_pseudo_used=r["n_pseudo_used"],
            )
            for r in sdoc["folds"]
        ]
        summaries[arm] = evaluation.CvSummary.from_reports(arm, reports)
    result = evaluation.CvResult(
        summaries=summaries,
        audit=evaluation.AuditReport(violations=[]),
        artifacts=[],
    )
    written = report.write_reports(result, args.out_dir, svg=not args.no_svg)
    print("\n".join(str(p) for p in written))
    return 0


def cmd_audit(args) -> int:
    plan = folds.load_fold_plan(args.foldplan)
    doc = json.loads(Path(args.artifacts).read_text(encoding="utf-8"))
    artifacts = [
        evaluation.FoldArtifacts(
            fold=a["fold"],
            labeller_train_ids=set(a["labeller_train_ids"]),
            hybrid_train_ids=set(a["hybrid_train_ids"]),
            normalizer_fit_ids=set(a["normalizer_fit_ids"]),
            pool_ids=set(a["pool_ids"]),
        )
        for a in doc["artifacts"]
    ]
    audit = evaluation.leakage_audit(plan, artifacts)
    if audit.passed:
        print("PASS")
        return 0
    for v in audit.violations:
        print(f"VIOLATION {v}", file=sys.stderr)
    return 2


def cmd_serve(args) -> int:
    from speechconf.server import serve

    manifest = load_manifest(args.manifest)
    serve(manifest, args.annotations, host=args.host, port=args.port,
          static_dir=args.static)
    return 0


# --- dispatch --------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="speechconf", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    sp = sub.add_parser("preprocess", help="audio -> canonical 16 kHz mono WAVs")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--denoise", action="store_true")
    sp.set_defaults(fn=cmd_preprocess)

    sp = sub.add_parser("extract", help="audio -> 94-dim feature store CSV")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--aux", help="auxiliary probabilities CSV")
    sp.add_argument("--external", help="externally extracted 88-dim CSV")
    sp.add_argument("--denoise", action="store_true")
    sp.set_defaults(fn=cmd_extract)

    sp = sub.add_parser("calibrate", help="logits CSV -> calibrated probabilities + T")
    sp.add_argument("--logits", required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_calibrate)

    sp = sub.add_parser("aggregate", help="annotations JSONL -> ICC + consensus labels")
    sp.add_argument("--annotations", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(fn=cmd_aggregate)

    sp = sub.add_parser("foldplan", help="labels CSV -> stratified fold plan JSON")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--config")
    sp.add_argument("--k", type=int, help="fold count (default: folds.k from config)")
    sp.add_argument("--seed", type=int, help="shuffle seed (default: folds.seed from config)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_foldplan)

    sp = sub.add_parser("train-labeller", help="train the fold-k feature-only labeller")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--config")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--fold", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_train_labeller)

    sp = sub.add_parser("pseudo", help="score the pool and emit the pseudo-label set")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--config")
    sp.add_argument("--labeller", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_pseudo)

    sp = sub.add_parser("train-hybrid", help="train the fold-k hybrid classifier")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--config")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--fold", type=int, required=True)
    sp.add_argument("--pseudo")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_train_hybrid)

    sp = sub.add_parser("cv", help="full multi-arm cross-validation run")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--config")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--arms", default="proposed")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--no-svg", action="store_true")
    sp.set_defaults(fn=cmd_cv)

    sp = sub.add_parser("report", help="regenerate tables/SVG from a cv report JSON")
    sp.add_argument("--cv-json", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--no-svg", action="store_true")
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("audit", help="re-run the leakage audit on recorded artifacts")
    sp.add_argument("--foldplan", required=True)
    sp.add_argument("--artifacts", required=True)
    sp.set_defaults(fn=cmd_audit)

    sp = sub.add_parser("serve", help="annotation API (and optional static UI)")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--annotations", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.add_argument("--static")
    sp.set_defaults(fn=cmd_serve)
    return p


def cli_dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except SpeechConfError as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - boundary: report, don't crash
        return _fail(type(exc).__name__, str(exc), 2)


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
