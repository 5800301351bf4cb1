"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. Synthetic fixtures are
seeded and deterministic; every tolerance is stated inline.
"""

import time

import numpy as np
import pytest
from scipy.stats import chisquare

from speechconf import synthetic
from speechconf.annotation import (
    _majority_posteriors,
    build_rater_matrix,
    dawid_skene,
    icc_2k,
)
from speechconf.calibration import apply_temperature, fit_temperature, nll
from speechconf.evaluation import (
    CvData,
    FoldArtifacts,
    leakage_audit,
    run_cv,
)
from speechconf.features import (
    EGEMAPS_LITE_88,
    apply_functionals,
    compute_llds,
    normalizer_apply,
    normalizer_fit,
)
from speechconf.folds import make_fold_plan
from speechconf.hybrid import (
    GROUND_TRUTH,
    HybridConfig,
    HybridModel,
    Sample,
    hybrid_forward,
    predict,
    train_hybrid,
)
from speechconf.neural import (
    MlpModel,
    SamplerConfig,
    grad_check,
    weighted_sample,
)
from speechconf.neural.train import _macro_f1
from speechconf.pseudo import (
    LabellerConfig,
    PseudoLabelConfig,
    generate_pseudo_labels,
    train_labeller,
)

from conftest import row_to_fv, rows_to_stores


def report(name: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}" + (f"  ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


# --- criterion: gradient correctness ------------------------------------------

def test_gradient_correctness():
    t0 = time.time()
    rng = np.random.default_rng(0)
    x = rng.standard_normal((8, 6))
    y = rng.integers(0, 3, 8)

    worst = 0.0
    specs = [
        {"kind": "sigmoid_gate", "dim": 6},
        {"kind": "dense", "in_dim": 6, "out_dim": 8},
        {"kind": "batch_norm", "dim": 8},
        {"kind": "gelu"},
        {"kind": "dense", "in_dim": 8, "out_dim": 5},
        {"kind": "relu"},
        {"kind": "dense", "in_dim": 5, "out_dim": 3},
    ]
    model = MlpModel(specs, seed=1)
    model.forward(x, train=True)  # realistic running stats before freezing
    worst = max(worst, grad_check(model, x, y))

    # source-boosted CE: gt_boost 18 with the medium class weighted 1.2
    sw = np.where(rng.random(8) < 0.5, 18.0, 1.0)
    cw = np.array([1.0, 1.2, 1.0])
    model2 = MlpModel(specs, seed=2)
    model2.forward(x, train=True)
    worst = max(worst, grad_check(model2, x, y, sample_weights=sw, class_weights=cw))

    linear = MlpModel([{"kind": "dense", "in_dim": 6, "out_dim": 3}], seed=3)
    linear_err = grad_check(linear, x, y)

    elapsed = time.time() - t0
    report(
        "gradient correctness (< 1e-4 layered, < 1e-7 linear, < 30 s)",
        worst < 1e-4 and linear_err < 1e-7 and elapsed < 30.0,
        f"layered {worst:.2e}, linear {linear_err:.2e}, {elapsed:.1f}s",
    )


# --- criterion: Dawid-Skene oracle ---------------------------------------------

def test_dawid_skene_oracle():
    t0 = time.time()
    profile = [0.85, 0.7, 0.6, 0.55, 0.4]  # includes the 0.4-accuracy rater
    confs = {f"r{i}": synthetic.adjacent_confusion(a) for i, a in enumerate(profile)}
    truth, recs = synthetic.make_rater_panel(200, confs, seed=2)
    matrix = build_rater_matrix(recs)
    cons = dawid_skene(matrix)

    tarr = np.array([truth[c] for c in matrix.clips])
    prior_w = np.bincount(tarr, minlength=3) / len(tarr)
    max_err = max(
        abs(float((np.diag(cons.confusion[f"r{i}"]) * prior_w).sum())
            - float((np.diag(confs[f"r{i}"]) * prior_w).sum()))
        for i in range(len(profile))
    )
    ll = cons.log_likelihood
    monotone = all(ll[i + 1] >= ll[i] - 1e-9 for i in range(len(ll) - 1))
    hard = np.array([cons.hard_labels()[c] for c in matrix.clips])
    mv = _majority_posteriors(matrix.cells).argmax(axis=1)
    ds_beats_mv = (hard == tarr).mean() > (mv == tarr).mean()
    elapsed = time.time() - t0
    report(
        "Dawid-Skene oracle (recovery +-0.05, monotone LL, beats majority vote, < 10 s)",
        max_err <= 0.05 and monotone and ds_beats_mv and elapsed < 10.0,
        f"max recovery err {max_err:.3f}, DS {(hard == tarr).mean():.3f} "
        f"vs MV {(mv == tarr).mean():.3f}, {elapsed:.1f}s",
    )


# --- criterion: ICC(2,k) oracle -------------------------------------------------

def test_icc_oracle():
    from test_annotation import FIXED_6x4, icc_oracle, matrix_from_array

    res = icc_2k(matrix_from_array(FIXED_6x4))
    single, avg, _ = icc_oracle(FIXED_6x4)
    oracle_ok = abs(res.icc_single - single) < 1e-9 and abs(res.icc_average - avg) < 1e-9

    ident = icc_2k(matrix_from_array(np.tile([[0], [1], [2], [1], [0]], (1, 4))))
    identical_ok = ident.icc_average == 1.0

    biased = FIXED_6x4.copy()
    biased[:, 0] += 3
    bias_ok = icc_2k(matrix_from_array(biased)).icc_average < res.icc_average

    report(
        "ICC(2,k) oracle (ANOVA match 1e-9, identical -> 1.0, bias lowers)",
        oracle_ok and identical_ok and bias_ok,
        f"impl {res.icc_average:.6f} vs oracle {avg:.6f}",
    )


# --- criterion: calibration ------------------------------------------------------

def test_calibration():
    from test_calibration import calibrated_logits, grid_search_t

    z, y = calibrated_logits(seed=1)
    model = fit_temperature(3.0 * z, y)
    t_grid = grid_search_t(3.0 * z, y)
    recovery_ok = abs(model.temperature - 3.0) / 3.0 <= 0.05
    grid_ok = abs(model.temperature - t_grid) <= 1e-3

    rng = np.random.default_rng(3)
    zr = rng.standard_normal((10000, 3)) * rng.uniform(0.1, 10, size=(10000, 1))
    base = np.argmax(zr, axis=1)
    argmax_ok = all(
        np.array_equal(np.argmax(apply_temperature(zr, t), axis=1), base)
        for t in (0.05, 0.5, 2.0, 20.0)
    )

    never_worse = True
    for seed in range(5):
        rr = np.random.default_rng(100 + seed)
        zz = rr.standard_normal((60, 3)) * rr.uniform(0.3, 6)
        yy = rr.integers(0, 3, 60)
        m = fit_temperature(zz, yy)
        never_worse &= m.fitted_nll_after <= nll(zz, yy, 1.0) + 1e-12

    report(
        "calibration (T=3 recovery +-5%, grid oracle +-1e-3, argmax invariant, NLL never worse)",
        recovery_ok and grid_ok and argmax_ok and never_worse,
        f"T {model.temperature:.4f} vs grid {t_grid:.4f}",
    )


# --- criterion: pseudo-label filter ------------------------------------------------

def test_pseudo_label_filter():
    gt = synthetic.make_corrective_dataset(240, seed=0, id_prefix="gt")
    pool = synthetic.make_corrective_dataset(1000, seed=50, id_prefix="pl",
                                             ambiguous_frac=0.3)
    feats = [row_to_fv(c, gt.features[i]) for i, c in enumerate(gt.ids)]
    norm = normalizer_fit(feats)
    x = np.stack([normalizer_apply(norm, f).values for f in feats])
    labeller = train_labeller(gt.ids, x, gt.labels,
                              LabellerConfig(epochs=50, internal_folds=3, seed=0))
    pool_x = np.stack([
        normalizer_apply(norm, row_to_fv(c, pool.features[i])).values
        for i, c in enumerate(pool.ids)
    ])

    sets = {}
    for tau in (0.0, 0.8, 0.9):
        sets[tau] = generate_pseudo_labels(labeller, pool.ids, pool_x, set(gt.ids),
                                           PseudoLabelConfig(tau=tau))
    monotone = sets[0.9].ids() <= sets[0.8].ids()
    all_retained = sets[0.0].retained == 1000
    disjoint = all(not s.ids() & set(gt.ids) for s in sets.values())
    mean_ok = all(
        np.mean([p for _, _, p, _ in s.samples]) >= s.tau for s in sets.values()
        if s.samples
    )
    report(
        "pseudo-label filter (monotone retention, tau=0 keeps all, disjoint, mean prob >= tau)",
        monotone and all_retained and disjoint and mean_ok,
        f"retained 0.8: {sets[0.8].retained}, 0.9: {sets[0.9].retained} of 1000",
    )


# --- criteria: data-strategy ordering + hybrid vs unimodal -------------------------

def _cv_fixture(seed, n_gt=240, n_pool=600, k=3):
    gt = synthetic.make_corrective_dataset(n_gt, seed=seed, id_prefix="gt")
    pool = synthetic.make_corrective_dataset(n_pool, seed=seed + 1000, id_prefix="pl",
                                             ambiguous_frac=0.30)
    feats, embs = rows_to_stores(gt.ids, gt.features, gt.embeddings)
    pfeats, pembs = rows_to_stores(pool.ids, pool.features, pool.embeddings)
    labels = {cid: int(gt.labels[i]) for i, cid in enumerate(gt.ids)}
    plan = make_fold_plan(labels, k=k, seed=seed)
    return CvData(feats, embs, labels, pfeats, pembs, plan)


SYNTH_HYBRID = dict(lr_embedding_stream=1e-2, lr_feature_stream=5e-3,
                    epochs=25, batch_size=32)


def test_data_strategy_qualitative_ordering():
    t0 = time.time()
    scores = {}
    for seed in (0, 1, 2):
        data = _cv_fixture(seed)
        res = run_cv(
            ["gt_only", "no_filter", "proposed"],
            data,
            hybrid_cfg=HybridConfig(seed=seed, **SYNTH_HYBRID),
            labeller_cfg=LabellerConfig(epochs=80, internal_folds=3, seed=seed),
            pseudo_cfg=PseudoLabelConfig(tau=0.8),
        )
        scores[seed] = {a: res.summaries[a].macro_f1_mean for a in res.summaries}
    elapsed = time.time() - t0
    beats_nofilter = all(s["proposed"] > s["no_filter"] for s in scores.values())
    near_gt = all(s["proposed"] >= s["gt_only"] - 0.02 for s in scores.values())
    report(
        "data-strategy ordering (proposed > no_filter, proposed >= gt_only - 0.02, "
        "seeds 0-2, < 180 s)",
        beats_nofilter and near_gt and elapsed < 180.0,
        "; ".join(
            f"seed {s}: gt {v['gt_only']:.3f} nf {v['no_filter']:.3f} "
            f"prop {v['proposed']:.3f}" for s, v in scores.items()
        ) + f"; {elapsed:.0f}s",
    )


def test_hybrid_beats_embedding_only():
    gaps = []
    for seed in (0, 1, 2):
        train_ds = synthetic.make_corrective_dataset(240, seed=seed, id_prefix="tr")
        test_ds = synthetic.make_corrective_dataset(150, seed=seed + 500, id_prefix="te")
        feats, embs = rows_to_stores(train_ds.ids, train_ds.features, train_ds.embeddings)
        norm = normalizer_fit(list(feats.values()))
        train = [
            Sample(c, normalizer_apply(norm, feats[c]), embs[c],
                   int(train_ds.labels[i]), GROUND_TRUTH)
            for i, c in enumerate(train_ds.ids)
        ]
        tfeats, tembs = rows_to_stores(test_ds.ids, test_ds.features, test_ds.embeddings)
        test = [
            Sample(c, normalizer_apply(norm, tfeats[c]), tembs[c],
                   int(test_ds.labels[i]), GROUND_TRUTH)
            for i, c in enumerate(test_ds.ids)
        ]
        y_test = np.asarray([s.label for s in test])
        score = {}
        for lam in (0.3, 0.0):
            model, _ = train_hybrid(train, [], HybridConfig(seed=seed, lambda_fv=lam,
                                                            **SYNTH_HYBRID))
            _, preds = predict(model, test)
            score[lam] = _macro_f1(preds, y_test)
        gaps.append(score[0.3] - score[0.0])
    mean_gap = float(np.mean(gaps))
    report(
        "hybrid vs embedding-only (mean macro-F1 gap >= 0.03 over 3 seeds)",
        mean_gap >= 0.03,
        f"gaps {[round(g, 3) for g in gaps]}, mean {mean_gap:.3f}",
    )


# --- criterion: leakage audit -------------------------------------------------------

def test_leakage_audit_and_mutation_harness():
    data = _cv_fixture(0, n_gt=120, n_pool=150, k=2)
    res = run_cv(
        ["proposed"], data,
        hybrid_cfg=HybridConfig(seed=0, epochs=8, lr_embedding_stream=1e-2,
                                lr_feature_stream=5e-3),
        labeller_cfg=LabellerConfig(epochs=20, internal_folds=2, seed=0),
        pseudo_cfg=PseudoLabelConfig(tau=0.8),
    )
    clean_pass = res.audit.passed

    injections_ok = True
    for field, check in (
        ("labeller_train_ids", "labeller-train"),
        ("hybrid_train_ids", "hybrid-train"),
        ("normalizer_fit_ids", "normalizer-fit"),
        ("pool_ids", "pool-exclusion"),
    ):
        arts = [
            FoldArtifacts(
                fold=a.fold,
                labeller_train_ids=set(a.labeller_train_ids),
                hybrid_train_ids=set(a.hybrid_train_ids),
                normalizer_fit_ids=set(a.normalizer_fit_ids),
                pool_ids=set(a.pool_ids),
            )
            for a in res.artifacts
        ]
        if field == "pool_ids":
            injected = sorted(data.plan.assignments)[0]  # any labelled id
        else:
            injected = sorted(data.plan.test_ids(0))[0]
        getattr(arts[0], field).add(injected)
        audit = leakage_audit(data.plan, arts)
        one_named = (
            len(audit.violations) == 1
            and audit.violations[0].check == check
            and audit.violations[0].ids == [injected]
        )
        injections_ok &= one_named
    report(
        "leakage audit (clean PASS; each injected id -> exactly one named violation)",
        clean_pass and injections_ok,
    )


# --- criterion: DSP sanity ------------------------------------------------------------

def test_dsp_sanity():
    slots = EGEMAPS_LITE_88.slots

    tone = compute_llds(synthetic.sine_clip(220.0))
    f0_ok = abs(tone.f0_hz[tone.voiced_flag].mean() - 220.0) <= 2.0
    d_tone = dict(zip(slots, apply_functionals(tone)))
    jitter_clean_ok = d_tone["jitter_local_amean"] < 0.001

    d_jit = dict(zip(slots, apply_functionals(
        compute_llds(synthetic.perturbed_sine(jitter=0.02, seed=7)))))
    jitter_band_ok = 0.015 <= d_jit["jitter_local_amean"] <= 0.025

    silence = compute_llds(synthetic.sine_clip(220.0, amplitude=0.0))
    silence_ok = silence.voiced_flag.sum() == 0

    from speechconf.audio_io import AudioClip, preprocess

    sr = 44100
    t = np.arange(sr) / sr
    resampled = preprocess(AudioClip("t", 0.5 * np.sin(2 * np.pi * 440 * t), sr))
    spec = np.abs(np.fft.rfft(resampled.samples))
    bin_width = 16000 / len(resampled.samples)
    peak_ok = abs(np.argmax(spec) * bin_width - 440.0) <= bin_width

    report(
        "DSP sanity (F0 220+-2, jitter bands, silence unvoiced, resample FFT peak)",
        f0_ok and jitter_clean_ok and jitter_band_ok and silence_ok and peak_ok,
        f"f0 {tone.f0_hz[tone.voiced_flag].mean():.2f}, clean jitter "
        f"{d_tone['jitter_local_amean']:.2e}, injected {d_jit['jitter_local_amean']:.4f}",
    )


# --- criterion: fold plan ----------------------------------------------------------------

def test_fold_plan_counts_and_checksum():
    labels = {}
    i = 0
    for cls, count in ((0, 90), (1, 210), (2, 300)):
        for _ in range(count):
            labels[f"c{i:04d}"] = cls
            i += 1
    a = make_fold_plan(labels, k=5, seed=7)
    b = make_fold_plan(labels, k=5, seed=7)
    counts_ok = all(
        np.bincount([labels[c] for c in a.test_ids(f)], minlength=3).tolist()
        == [18, 42, 60]
        for f in range(5)
    )
    report(
        "fold plan ({90,210,300} -> 18/42/60 per fold, checksum stable)",
        counts_ok and a.checksum == b.checksum,
        f"checksum {a.checksum[:12]}...",
    )


# --- criterion: weighted sampler ------------------------------------------------------------

def test_weighted_sampler_uniformity():
    counts = {0: 90, 1: 210, 2: 300}
    labels = np.concatenate([np.full(c, k) for k, c in counts.items()])
    idx = weighted_sample(SamplerConfig(class_counts=counts, seed=0), labels, 30000)
    freqs = np.bincount(labels[idx], minlength=3) / 30000
    stat = chisquare(np.bincount(labels[idx], minlength=3))
    report(
        "weighted sampler (class frequencies 1/3 +- 0.01, chi-square p > 0.001)",
        np.max(np.abs(freqs - 1 / 3)) < 0.01 and stat.pvalue > 0.001,
        f"freqs {np.round(freqs, 4).tolist()}, p {stat.pvalue:.3f}",
    )


# --- criterion: fusion identities --------------------------------------------------------------

def test_fusion_identities():
    rng = np.random.default_rng(0)
    emb = rng.standard_normal((64, 16))
    fv = rng.standard_normal((64, 94))

    m0 = HybridModel(16, HybridConfig(lambda_fv=0.0))
    fused0, emb_logits0, _ = hybrid_forward(m0, emb, fv)
    bit_equal = np.array_equal(fused0, emb_logits0)

    m3 = HybridModel(16, HybridConfig(lambda_fv=0.3))
    fused3, e3, f3 = hybrid_forward(m3, emb, fv)
    linear = np.max(np.abs(fused3 - (e3 + 0.3 * f3))) <= 1e-12

    report(
        "fusion identities (lambda=0 bit-equal; fused = emb + lambda*fv to 1e-12)",
        bit_equal and linear,
    )


# --- secondary-related: annotation round trip (server side) -------------------------------------

def test_annotation_round_trip_server_side():
    """3 raters x 5 clips land exactly once each (latest-wins) in the export;
    not_clear rows leave the ICC complete-case set. The whole primary suite
    above runs with no frontend built."""
    from test_server import post_label  # reuse helpers
    import json as _json

    import numpy as _np
    from fastapi.testclient import TestClient

    from speechconf import audio_io
    from speechconf.annotation import read_annotations_jsonl
    from speechconf.config import load_manifest
    from speechconf.server import create_app
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        clip_ids = [f"clip{i}" for i in range(5)]
        for cid in clip_ids:
            t = _np.arange(8000) / 16000
            audio_io.save_clip(
                audio_io.AudioClip(cid, 0.4 * _np.sin(2 * _np.pi * 220 * t), 16000),
                td / f"{cid}.wav")
        (td / "manifest.json").write_text(_json.dumps({
            "clips": [{"id": c, "path": f"{c}.wav", "split_role": "labelled"}
                      for c in clip_ids]}))
        client = TestClient(create_app(load_manifest(td / "manifest.json"),
                                       td / "ann.jsonl"))
        for rater in ("r1", "r2", "r3"):
            for i, cid in enumerate(clip_ids):
                post_label(client, cid, rater, ("low", "medium", "high")[i % 3])
        post_label(client, clip_ids[0], "r1", "high")       # resubmission
        post_label(client, clip_ids[1], "r2", "not_clear")  # flagged row

        matrix = build_rater_matrix(read_annotations_jsonl(td / "ann.jsonl"))
        exactly_once = matrix.cells.shape == (5, 3) and (matrix.cells != -2).all()
        latest_wins = matrix.cells[0, matrix.raters.index("r1")] == 2
        icc_res = icc_2k(matrix)
        not_clear_excluded = icc_res.n_used == 4

    report(
        "annotation round trip (exactly-once latest-wins export, not_clear out of ICC)",
        bool(exactly_once and latest_wins and not_clear_excluded),
        f"n_used {icc_res.n_used}",
    )
