import numpy as np
import pytest
from scipy.stats import chisquare

from speechconf.errors import (
    AllWeightsZero,
    BatchTooSmallForBatchNorm,
    DimMismatch,
    EmptyClass,
    EmptyTrainingSet,
    StepOutOfRange,
)
from speechconf.neural import (
    AdamW,
    CosineSchedule,
    EarlyStop,
    MlpModel,
    SamplerConfig,
    cosine_lr,
    cross_entropy,
    grad_check,
    gated_feature_specs,
    load_model,
    mlp_specs,
    sample_weights,
    sampler_config_from_labels,
    save_model,
    softmax,
    train_loop,
    weighted_sample,
)
from speechconf.neural.layers import Param


class TestForward:
    def test_identity_dense(self):
        m = MlpModel([{"kind": "dense", "in_dim": 3, "out_dim": 3}], seed=0)
        w, b = m.layers[0].w, m.layers[0].b
        w.value[...] = np.eye(3)
        b.value[...] = 0.0
        x = np.array([[1.0, -2.0, 3.0]])
        np.testing.assert_array_equal(m.forward(x, train=False), x)

    def test_sigmoid_gate_at_zero_halves_input(self):
        m = MlpModel([{"kind": "sigmoid_gate", "dim": 4}], seed=0)
        x = np.array([[2.0, -4.0, 6.0, 0.0]])
        np.testing.assert_allclose(m.forward(x, train=False), 0.5 * x)

    def test_eval_mode_deterministic(self):
        m = MlpModel(gated_feature_specs(6, (8, 4), 3), seed=0)
        x = np.random.default_rng(1).standard_normal((5, 6))
        a = m.forward(x, train=False)
        b = m.forward(x, train=False)
        np.testing.assert_array_equal(a, b)

    def test_dim_mismatch(self):
        m = MlpModel(mlp_specs(6, [4], 3), seed=0)
        with pytest.raises(DimMismatch):
            m.forward(np.zeros((2, 5)))

    def test_batchnorm_needs_two_samples_in_train(self):
        m = MlpModel([{"kind": "batch_norm", "dim": 3}], seed=0)
        with pytest.raises(BatchTooSmallForBatchNorm):
            m.forward(np.zeros((1, 3)), train=True)

    def test_batchnorm_train_statistics(self):
        m = MlpModel([{"kind": "batch_norm", "dim": 5}], seed=0)
        x = np.random.default_rng(2).standard_normal((64, 5)) * 3.0 + 1.5
        out = m.forward(x, train=True)
        assert np.max(np.abs(out.mean(axis=0))) < 1e-6
        np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-4)

    def test_softmax_rows_sum_to_one(self):
        z = np.random.default_rng(3).standard_normal((100, 3)) * 10
        np.testing.assert_allclose(softmax(z).sum(axis=1), 1.0, atol=1e-12)


class TestCrossEntropy:
    def test_confident_correct_is_near_zero(self):
        loss, _ = cross_entropy(np.array([[1000.0, 0.0, 0.0]]), np.array([0]))
        assert loss < 1e-12

    def test_uniform_logits_log3(self):
        loss, _ = cross_entropy(np.zeros((1, 3)), np.array([1]))
        assert abs(loss - np.log(3.0)) < 1e-12

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((4, 3))
        y = rng.integers(0, 3, 4)
        w = rng.random(4) + 0.5
        cw = np.array([1.0, 1.2, 1.0])
        _, dz = cross_entropy(z, y, w, cw)
        h = 1e-5
        num = np.zeros_like(z)
        for i in range(4):
            for j in range(3):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += h
                zm[i, j] -= h
                num[i, j] = (cross_entropy(zp, y, w, cw)[0] - cross_entropy(zm, y, w, cw)[0]) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(dz), np.abs(num)), 1e-8)
        assert np.max(np.abs(dz - num) / denom) < 1e-6

    def test_all_weights_zero(self):
        with pytest.raises(AllWeightsZero):
            cross_entropy(np.zeros((2, 3)), np.array([0, 1]), np.zeros(2))

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            z = rng.standard_normal((6, 3)) * 5
            y = rng.integers(0, 3, 6)
            loss, _ = cross_entropy(z, y)
            assert loss >= 0


class TestGradCheck:
    @pytest.mark.parametrize("spec", [
        [{"kind": "dense", "in_dim": 6, "out_dim": 3}],
        [{"kind": "sigmoid_gate", "dim": 6}, {"kind": "dense", "in_dim": 6, "out_dim": 3}],
        [{"kind": "batch_norm", "dim": 6}, {"kind": "dense", "in_dim": 6, "out_dim": 3}],
        [{"kind": "gelu"}, {"kind": "dense", "in_dim": 6, "out_dim": 3}],
        [{"kind": "relu"}, {"kind": "dense", "in_dim": 6, "out_dim": 3}],
        [{"kind": "dense", "in_dim": 6, "out_dim": 4}, {"kind": "softmax"},
         {"kind": "dense", "in_dim": 4, "out_dim": 3}],
    ], ids=["dense", "sigmoid_gate", "batch_norm", "gelu", "relu", "softmax"])
    def test_per_layer_property(self, spec):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((8, 6))
        y = rng.integers(0, 3, 8)
        m = MlpModel(spec, seed=4)
        m.forward(x, train=True)
        assert grad_check(m, x, y) < 1e-4

    def test_every_layer_kind(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((8, 6))
        y = rng.integers(0, 3, 8)
        specs = [
            {"kind": "sigmoid_gate", "dim": 6},
            {"kind": "dense", "in_dim": 6, "out_dim": 8},
            {"kind": "batch_norm", "dim": 8},
            {"kind": "gelu"},
            {"kind": "dense", "in_dim": 8, "out_dim": 5},
            {"kind": "relu"},
            {"kind": "dropout", "p": 0.3},
            {"kind": "dense", "in_dim": 5, "out_dim": 3},
        ]
        m = MlpModel(specs, seed=1)
        m.forward(x, train=True)  # move the BN running stats off their init
        assert grad_check(m, x, y) < 1e-4

    def test_linear_model_tight(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((8, 6))
        y = rng.integers(0, 3, 8)
        m = MlpModel([{"kind": "dense", "in_dim": 6, "out_dim": 3}], seed=0)
        assert grad_check(m, x, y) < 1e-7

    def test_boosted_weights_still_pass(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((6, 4))
        y = rng.integers(0, 3, 6)
        sw = np.array([18.0, 1.0, 1.0, 18.0, 1.0, 1.0])
        cw = np.array([1.0, 1.2, 1.0])
        m = MlpModel(mlp_specs(4, [5], 3, activation="gelu"), seed=3)
        assert grad_check(m, x, y, sample_weights=sw, class_weights=cw) < 1e-4


class TestOptim:
    def test_adam_first_step_moves_by_lr(self):
        p = Param("w", np.array([0.0]))
        opt = AdamW.single_group([("w", p)], lr=0.1)
        p.grad = np.array([1.0])
        opt.step()
        assert abs(p.value[0] + 0.1) < 1e-6

    def test_zero_gradient_no_motion_without_decay(self):
        p = Param("w", np.array([1.0, -2.0]))
        opt = AdamW.single_group([("w", p)], lr=0.1, weight_decay=0.0)
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_array_equal(p.value, [1.0, -2.0])

    def test_adamw_with_zero_decay_equals_adam(self):
        rng = np.random.default_rng(0)
        traj = []
        for _ in range(2):
            p = Param("w", np.array([0.5, -0.5]))
            opt = AdamW.single_group([("w", p)], lr=0.05, weight_decay=0.0)
            grads = rng.standard_normal((10, 2))
            rng = np.random.default_rng(0)  # same grads both runs
            for g in np.random.default_rng(7).standard_normal((10, 2)):
                p.grad = g
                opt.step()
            traj.append(p.value.copy())
        np.testing.assert_array_equal(traj[0], traj[1])

    def test_decay_shrinks_parameters(self):
        p = Param("w", np.array([10.0]))
        opt = AdamW.single_group([("w", p)], lr=0.1, weight_decay=0.1)
        p.grad = np.zeros(1)
        opt.step()
        assert p.value[0] < 10.0


class TestCosine:
    def test_boundaries_and_midpoint(self):
        s = CosineSchedule(lr_max=1e-3, total_steps=100, lr_min=0.0)
        assert cosine_lr(s, 0) == 1e-3
        assert abs(cosine_lr(s, 100)) < 1e-18
        assert abs(cosine_lr(s, 50) - 5e-4) < 1e-12

    def test_step_out_of_range(self):
        s = CosineSchedule(1e-3, 10)
        with pytest.raises(StepOutOfRange):
            cosine_lr(s, 11)
        with pytest.raises(StepOutOfRange):
            cosine_lr(s, -1)


class TestSampler:
    def test_paper_counts_uniform_class_frequency(self):
        counts = {0: 90, 1: 210, 2: 300}
        labels = np.concatenate([np.full(c, k) for k, c in counts.items()])
        cfg = SamplerConfig(class_counts=counts, seed=0)
        idx = weighted_sample(cfg, labels, 30000)
        drawn = labels[idx]
        freqs = np.bincount(drawn, minlength=3) / 30000
        assert np.max(np.abs(freqs - 1 / 3)) < 0.01
        stat = chisquare(np.bincount(drawn, minlength=3))
        assert stat.pvalue > 0.001

    def test_single_class(self):
        labels = np.zeros(5, dtype=int)
        idx = weighted_sample(sampler_config_from_labels(labels), labels, 100)
        assert np.all(labels[idx] == 0)

    def test_two_samples_same_class_symmetric(self):
        labels = np.array([1, 1])
        idx = weighted_sample(sampler_config_from_labels(labels, seed=3), labels, 10000)
        freq = np.mean(idx == 0)
        assert abs(freq - 0.5) < 0.02

    def test_empty_class_rejected(self):
        with pytest.raises(EmptyClass):
            SamplerConfig(class_counts={0: 0, 1: 5})

    def test_inverse_frequency_weights(self):
        cfg = SamplerConfig(class_counts={0: 10, 2: 90})
        w = sample_weights(cfg, np.array([0, 2, 2]))
        np.testing.assert_allclose(w, [0.1, 1 / 90, 1 / 90])


class TestTrainLoop:
    def _data(self, n=300, seed=0):
        from speechconf.synthetic import make_blobs

        x, y = make_blobs(n, seed=seed, dim=8, scale=4.0, noise=0.5)
        return x[:200], y[:200], x[200:], y[200:]

    def test_zero_epochs_returns_initial_model(self):
        xtr, ytr, xv, yv = self._data()
        m = MlpModel(mlp_specs(8, [16], 3), seed=0)
        before = m.get_state()
        res = train_loop(m, xtr, ytr, xv, yv, AdamW.single_group(m.params(), 1e-3), epochs=0)
        assert res.history == []
        after = m.get_state()
        for k in before:
            np.testing.assert_array_equal(before[k], after[k])

    def test_separable_blobs_reach_perfect_train_accuracy(self):
        xtr, ytr, xv, yv = self._data()
        m = MlpModel(mlp_specs(8, [16], 3), seed=0)
        train_loop(m, xtr, ytr, xv, yv, AdamW.single_group(m.params(), 1e-2),
                   epochs=200, early_stop=EarlyStop("val_loss", 200))
        preds = np.argmax(m.forward(xtr, train=False), axis=1)
        assert np.mean(preds == ytr) == 1.0

    def test_patience_semantics_and_best_restore(self):
        # a metric that never improves after epoch 1 stops at epoch 1+patience
        # and returns the epoch-1 weights
        xtr, ytr, xv, yv = self._data(seed=1)
        m = MlpModel(mlp_specs(8, [4], 3), seed=0)
        states = []

        orig_get = m.get_state

        def spy_get():
            s = orig_get()
            states.append(s)
            return s

        m.get_state = spy_get
        history = []
        import speechconf.neural.train as train_mod

        orig_eval = train_mod.evaluate
        vals = iter([1.0] + [2.0] * 50)  # epoch 1 best, then never improves

        def fake_eval(model, x, y, cw=None):
            return {"loss": next(vals), "macro_f1": 0.0, "accuracy": 0.0}

        train_mod.evaluate = fake_eval
        try:
            res = train_loop(m, xtr, ytr, xv, yv, AdamW.single_group(m.params(), 1e-3),
                             epochs=100, early_stop=EarlyStop("val_loss", 10))
        finally:
            train_mod.evaluate = orig_eval
            m.get_state = orig_get
        assert len(res.history) == 11  # stopped after 10 non-improving epochs
        assert res.best_epoch == 1
        final = m.get_state()
        for k in states[0]:
            np.testing.assert_array_equal(final[k], states[0][k])

    def test_empty_training_set(self):
        m = MlpModel(mlp_specs(4, [4], 3), seed=0)
        with pytest.raises(EmptyTrainingSet):
            train_loop(m, np.zeros((0, 4)), np.zeros(0, dtype=int), np.zeros((1, 4)),
                       np.zeros(1, dtype=int), AdamW.single_group(m.params(), 1e-3), epochs=5)

    def test_fixed_seed_bit_identical_trajectory(self):
        xtr, ytr, xv, yv = self._data(seed=2)
        states = []
        for _ in range(2):
            m = MlpModel(mlp_specs(8, [8], 3, dropout=0.2), seed=11)
            train_loop(m, xtr, ytr, xv, yv, AdamW.single_group(m.params(), 1e-3),
                       epochs=5, early_stop=EarlyStop("val_loss", 50))
            states.append(m.get_state())
        for k in states[0]:
            np.testing.assert_array_equal(states[0][k], states[1][k])


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        m = MlpModel(gated_feature_specs(6, (8, 4), 3), seed=5)
        x = np.random.default_rng(0).standard_normal((16, 6))
        m.forward(x, train=True)  # bn stats move
        p = tmp_path / "model.csnn"
        save_model(m, p, extra={"note": "test"})
        assert p.read_bytes()[:4] == b"CSNN"
        back, extra = load_model(p)
        assert extra == {"note": "test"}
        a = m.forward(x, train=False)
        b = back.forward(x, train=False)
        np.testing.assert_array_equal(a, b)
