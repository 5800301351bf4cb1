import numpy as np
import pytest

from speechconf import synthetic
from speechconf.errors import (
    DimMismatch,
    NonFiniteValue,
    NormalizerMismatch,
    UnknownSource,
)
from speechconf.features.vector import normalizer_apply, normalizer_fit
from speechconf.hybrid import (
    GROUND_TRUTH,
    PSEUDO,
    EmbeddingRecord,
    HybridConfig,
    HybridModel,
    Sample,
    hybrid_forward,
    load_hybrid,
    predict,
    read_embedding_csv,
    read_embedding_store,
    read_embeddings,
    save_hybrid,
    source_boosted_loss,
    train_hybrid,
    write_embedding_csv,
    write_embedding_store,
)

from conftest import row_to_fv


def make_samples(n=60, seed=0, source=GROUND_TRUTH, prefix="s"):
    ds = synthetic.make_corrective_dataset(n, seed=seed, id_prefix=prefix)
    feats = [row_to_fv(c, ds.features[i]) for i, c in enumerate(ds.ids)]
    norm = normalizer_fit(feats)
    samples = [
        Sample(
            id=ds.ids[i],
            feature_vector=normalizer_apply(norm, feats[i]),
            embedding=EmbeddingRecord(ds.ids[i], ds.embeddings[i]),
            label=int(ds.labels[i]),
            source=source,
        )
        for i in range(n)
    ]
    return samples, norm, ds


class TestFusion:
    def test_lambda_zero_bit_identical(self):
        cfg = HybridConfig(lambda_fv=0.0)
        model = HybridModel(16, cfg)
        rng = np.random.default_rng(0)
        emb = rng.standard_normal((7, 16))
        fv = rng.standard_normal((7, 94))
        fused, emb_logits, _ = hybrid_forward(model, emb, fv)
        assert np.array_equal(fused, emb_logits)

    def test_zero_head_pure_feature_scaling(self):
        cfg = HybridConfig(lambda_fv=0.3)
        model = HybridModel(16, cfg)
        for p in model.embedding_stream.layers[0].params():
            p.value[...] = 0.0
        rng = np.random.default_rng(1)
        fused, _, fv_logits = hybrid_forward(
            model, rng.standard_normal((5, 16)), rng.standard_normal((5, 94)))
        np.testing.assert_array_equal(fused, 0.3 * fv_logits)

    def test_recomputation_oracle(self):
        cfg = HybridConfig(lambda_fv=0.3)
        model = HybridModel(16, cfg)
        rng = np.random.default_rng(2)
        emb = rng.standard_normal((10, 16))
        fv = rng.standard_normal((10, 94))
        fused, emb_logits, fv_logits = hybrid_forward(model, emb, fv)
        np.testing.assert_allclose(fused, emb_logits + 0.3 * fv_logits, atol=1e-12)

    def test_dim_mismatch(self):
        model = HybridModel(16, HybridConfig())
        with pytest.raises(DimMismatch):
            hybrid_forward(model, np.zeros((2, 8)), np.zeros((2, 94)))
        with pytest.raises(DimMismatch):
            hybrid_forward(model, np.zeros((2, 16)), np.zeros((2, 90)))


class TestSourceBoostedLoss:
    def test_single_gt_uniform_logits_log3(self):
        cfg = HybridConfig()
        loss, _ = source_boosted_loss(np.zeros((1, 3)), np.array([1]), [GROUND_TRUTH], cfg)
        assert abs(loss - np.log(3.0)) < 1e-12

    def test_gradient_ratio_is_exactly_boost(self):
        cfg = HybridConfig(gt_boost=18.0)
        logits = np.tile(np.array([[0.5, -0.2, 0.1]]), (2, 1))
        labels = np.array([0, 0])
        _, dlogits = source_boosted_loss(logits, labels, [GROUND_TRUTH, PSEUDO], cfg)
        ratio = dlogits[0] / dlogits[1]
        np.testing.assert_allclose(ratio, 18.0, atol=1e-9)

    def test_perfect_predictions_zero_loss(self):
        cfg = HybridConfig()
        logits = np.array([[1000.0, 0, 0], [0, 1000.0, 0]])
        loss, _ = source_boosted_loss(logits, np.array([0, 1]),
                                      [GROUND_TRUTH, PSEUDO], cfg)
        assert loss < 1e-12

    def test_finite_difference_including_weights(self):
        cfg = HybridConfig()
        rng = np.random.default_rng(0)
        z = rng.standard_normal((4, 3))
        y = rng.integers(0, 3, 4)
        src = [GROUND_TRUTH, PSEUDO, PSEUDO, GROUND_TRUTH]
        _, dz = source_boosted_loss(z, y, src, cfg)
        h = 1e-5
        num = np.zeros_like(z)
        for i in range(4):
            for j in range(3):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += h
                zm[i, j] -= h
                num[i, j] = (source_boosted_loss(zp, y, src, cfg)[0]
                             - source_boosted_loss(zm, y, src, cfg)[0]) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(dz), np.abs(num)), 1e-8)
        assert np.max(np.abs(dz - num) / denom) < 1e-4

    def test_unknown_source(self):
        with pytest.raises(UnknownSource):
            source_boosted_loss(np.zeros((1, 3)), np.array([0]), ["mystery"], HybridConfig())


class TestTrainHybrid:
    CFG = dict(lr_embedding_stream=1e-2, lr_feature_stream=5e-3, epochs=20, batch_size=32)

    def test_gt_only_arm_trains(self):
        samples, _, _ = make_samples(90, seed=3)
        model, history = train_hybrid(samples, [], HybridConfig(seed=0, **self.CFG))
        assert len(history) == 20
        assert all("val_macro_f1" in h for h in history)

    def test_hybrid_beats_embedding_only_on_corrective_data(self):
        train, norm, _ = make_samples(240, seed=4)
        test_ds = synthetic.make_corrective_dataset(150, seed=990, id_prefix="te")
        test = [
            Sample(
                id=c,
                feature_vector=normalizer_apply(norm, row_to_fv(c, test_ds.features[i])),
                embedding=EmbeddingRecord(c, test_ds.embeddings[i]),
                label=int(test_ds.labels[i]),
                source=GROUND_TRUTH,
            )
            for i, c in enumerate(test_ds.ids)
        ]
        from speechconf.neural.train import _macro_f1

        scores = {}
        for lam in (0.3, 0.0):
            cfg = HybridConfig(seed=0, lambda_fv=lam, **self.CFG)
            model, _ = train_hybrid(train, [], cfg)
            _, preds = predict(model, test)
            scores[lam] = _macro_f1(preds, np.asarray([s.label for s in test]))
        assert scores[0.3] > scores[0.0] + 0.03

    def test_seed_reproducibility(self):
        samples, _, _ = make_samples(90, seed=5)
        hists = []
        for _ in range(2):
            _, h = train_hybrid(samples, [], HybridConfig(seed=7, **self.CFG))
            hists.append(h)
        assert hists[0] == hists[1]

    def test_loss_decreases_on_separable_data(self):
        samples, _, _ = make_samples(120, seed=6)
        _, history = train_hybrid(samples, [], HybridConfig(seed=0, **self.CFG))
        first, last = history[0]["train_loss"], history[-1]["train_loss"]
        assert last < first

    def test_leakage_guard(self):
        samples, _, _ = make_samples(60, seed=7)
        from speechconf.errors import LeakageDetected

        with pytest.raises(LeakageDetected):
            train_hybrid(samples, [], HybridConfig(**self.CFG),
                         forbidden_ids={samples[0].id})

    def test_source_tag_validation(self):
        samples, _, _ = make_samples(60, seed=8)
        bad = [Sample(s.id, s.feature_vector, s.embedding, s.label, PSEUDO)
               for s in samples]
        with pytest.raises(UnknownSource):
            train_hybrid(bad, [], HybridConfig(**self.CFG))


class TestPredict:
    def test_probabilities_and_determinism(self):
        samples, _, _ = make_samples(60, seed=9)
        model, _ = train_hybrid(samples, [], HybridConfig(seed=0, epochs=3))
        probs1, labels1 = predict(model, samples)
        probs2, labels2 = predict(model, samples)
        np.testing.assert_array_equal(probs1, probs2)
        np.testing.assert_array_equal(labels1, labels2)
        np.testing.assert_allclose(probs1.sum(axis=1), 1.0, atol=1e-12)

    def test_normalizer_mismatch(self):
        samples, norm, ds = make_samples(60, seed=10)
        model, _ = train_hybrid(samples, [], HybridConfig(seed=0, epochs=2))
        other_norm = normalizer_fit(
            [row_to_fv(c, ds.features[i] * 2.0) for i, c in enumerate(ds.ids)]
        )
        foreign = [
            Sample(
                id=ds.ids[0],
                feature_vector=normalizer_apply(other_norm, row_to_fv(ds.ids[0], ds.features[0])),
                embedding=EmbeddingRecord(ds.ids[0], ds.embeddings[0]),
                label=0,
                source=GROUND_TRUTH,
            )
        ]
        with pytest.raises(NormalizerMismatch):
            predict(model, foreign)

    def test_high_accuracy_on_separable(self):
        samples, norm, _ = make_samples(240, seed=11)
        model, _ = train_hybrid(samples, [], HybridConfig(
            seed=0, lr_embedding_stream=1e-2, lr_feature_stream=5e-3, epochs=25))
        _, preds = predict(model, samples)
        y = np.asarray([s.label for s in samples])
        assert np.mean(preds == y) >= 0.9

    def test_ordinal_errors_stay_adjacent(self):
        # on an ordinal generator the low<->high confusion corners must not
        # exceed any adjacent-class error entry
        from speechconf.evaluation import classification_metrics

        ds = synthetic.make_ordinal_dataset(600, seed=0)
        feats = [row_to_fv(c, ds.features[i]) for i, c in enumerate(ds.ids)]
        norm = normalizer_fit(feats[:400])
        samples = [
            Sample(ds.ids[i], normalizer_apply(norm, feats[i]),
                   EmbeddingRecord(ds.ids[i], ds.embeddings[i]),
                   int(ds.labels[i]), GROUND_TRUTH)
            for i in range(600)
        ]
        model, _ = train_hybrid(samples[:400], [], HybridConfig(
            seed=0, lr_embedding_stream=1e-2, lr_feature_stream=5e-3, epochs=25))
        _, preds = predict(model, samples[400:])
        y = np.asarray([s.label for s in samples[400:]])
        _, _, conf = classification_metrics(preds, y)
        adjacent = [conf[0, 1], conf[1, 0], conf[1, 2], conf[2, 1]]
        assert conf[0, 2] <= min(adjacent)
        assert conf[2, 0] <= min(adjacent)


class TestStores:
    def _records(self, dim=8, n=5):
        rng = np.random.default_rng(0)
        return [EmbeddingRecord(f"e{i}", rng.standard_normal(dim)) for i in range(n)]

    def test_binary_round_trip(self, tmp_path):
        recs = self._records()
        p = tmp_path / "store.emb"
        write_embedding_store(p, recs)
        assert p.read_bytes()[:4] == b"EMB1"
        back = read_embedding_store(p)
        assert set(back) == {r.id for r in recs}
        for r in recs:
            np.testing.assert_allclose(back[r.id].values, r.values, atol=1e-6)

    def test_csv_round_trip(self, tmp_path):
        recs = self._records()
        p = tmp_path / "store.csv"
        write_embedding_csv(p, recs)
        back = read_embedding_csv(p)
        for r in recs:
            np.testing.assert_allclose(back[r.id].values, r.values, atol=0)

    def test_dispatch_on_magic(self, tmp_path):
        recs = self._records()
        b = tmp_path / "b.emb"
        c = tmp_path / "c.csv"
        write_embedding_store(b, recs)
        write_embedding_csv(c, recs)
        assert set(read_embeddings(b)) == set(read_embeddings(c))

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteValue):
            EmbeddingRecord("bad", np.array([1.0, np.inf]))


def test_hybrid_checkpoint_round_trip(tmp_path):
    samples, _, _ = make_samples(60, seed=12)
    model, _ = train_hybrid(samples, [], HybridConfig(seed=0, epochs=2))
    p = tmp_path / "hybrid.csnn"
    save_hybrid(model, p, extra={"fold": 1})
    back, extra = load_hybrid(p)
    assert extra == {"fold": 1}
    assert back.normalizer_fp == model.normalizer_fp
    probs_a, _ = predict(model, samples)
    probs_b, _ = predict(back, samples)
    np.testing.assert_array_equal(probs_a, probs_b)
