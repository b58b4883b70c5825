"""Fusion, cross-entropy, Adam, fit, and open-vocabulary inference."""

import math

import numpy as np
import pytest

from avloc.core import ClassVocabulary
from avloc.dataset_io import seen_text_embeddings
from avloc.errors import ShapeError, TrainingError
from avloc.similarity import softmax_rows
from avloc.synth import SynthSpec, synth_generate
from avloc.temporal import TemporalEncoderConfig, init_params
from avloc.training import (
    Adam,
    TrainConfig,
    cross_entropy,
    fit,
    fuse,
    infer,
    loss_and_grads,
    subsample_by_class,
)
from avloc.zeroshot import similarity_pair

from oracles import finite_difference_grads, relative_error


class TestFuse:
    def test_sqrt_of_equal_distributions_is_identity(self):
        p = softmax_rows(np.random.default_rng(0).standard_normal((4, 5)))
        np.testing.assert_allclose(fuse(p, p, "sqrt"), p, atol=1e-12)

    def test_sqrt_worked_example(self):
        # sqrt([0.8,0.2] * [0.5,0.5]) renormalizes to [2/3, 1/3].
        p_a = np.array([[0.8, 0.2]])
        p_v = np.array([[0.5, 0.5]])
        out = fuse(p_a, p_v, "sqrt")
        np.testing.assert_allclose(out, [[2 / 3, 1 / 3]], atol=1e-4)

    def test_sqrt_symmetry_on_mirrored_rows(self):
        out = fuse(np.array([[0.9, 0.1]]), np.array([[0.1, 0.9]]), "sqrt")
        np.testing.assert_allclose(out, [[0.5, 0.5]], atol=1e-12)

    def test_prob_avg(self):
        out = fuse(np.array([[0.8, 0.2]]), np.array([[0.4, 0.6]]), "prob_avg")
        np.testing.assert_allclose(out, [[0.6, 0.4]], atol=1e-12)

    def test_sqrt_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        p_a = softmax_rows(rng.standard_normal((10, 7)))
        p_v = softmax_rows(rng.standard_normal((10, 7)))
        np.testing.assert_allclose(fuse(p_a, p_v, "sqrt").sum(axis=1), 1.0, atol=1e-12)

    def test_argmax_agreement_between_fusions_when_modalities_agree(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            p_a = softmax_rows(rng.standard_normal((1, 6)))
            p_v = softmax_rows(rng.standard_normal((1, 6)))
            if np.argmax(p_a) != np.argmax(p_v):
                continue
            s = np.argmax(fuse(p_a, p_v, "sqrt"))
            m = np.argmax(fuse(p_a, p_v, "prob_avg"))
            assert s == np.argmax(p_a) == m

    def test_negative_entries_rejected(self):
        with pytest.raises(TrainingError):
            fuse(np.array([[-0.1, 1.1]]), np.array([[0.5, 0.5]]), "sqrt")

    def test_fea_avg_is_a_passthrough(self):
        p = np.array([[0.3, 0.7]])
        np.testing.assert_array_equal(fuse(p, p, "fea_avg"), p)
        with pytest.raises(TrainingError):
            fuse(p, np.array([[0.5, 0.5]]), "fea_avg")


class TestCrossEntropy:
    def test_exact_one_hot_costs_nothing(self):
        fused = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert cross_entropy(fused, fused) == 0.0

    def test_uniform_row_costs_log_k(self):
        k = 5
        fused = np.full((1, k), 1.0 / k)
        target = np.zeros((1, k))
        target[0, 2] = 1.0
        np.testing.assert_allclose(cross_entropy(fused, target), math.log(k), atol=1e-12)

    def test_half_probability_costs_log_two(self):
        fused = np.array([[0.5, 0.5]])
        target = np.array([[1.0, 0.0]])
        np.testing.assert_allclose(cross_entropy(fused, target), math.log(2.0), atol=1e-12)

    def test_non_stochastic_rows_rejected(self):
        with pytest.raises(TrainingError):
            cross_entropy(np.array([[0.5, 0.6]]), np.array([[1.0, 0.0]]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            cross_entropy(np.full((1, 2), 0.5), np.zeros((1, 3)))


class TestEndToEndGradients:
    def test_pipeline_gradcheck_all_variants(self):
        """loss(fuse(softmax(similarity(forward)))) vs finite differences."""
        rng = np.random.default_rng(3)
        t, d, heads, ffn, k = 3, 4, 2, 8, 3
        audio = rng.standard_normal((t, d))
        visual = rng.standard_normal((t, d))
        text = rng.standard_normal((k, d))
        target = np.zeros((t, k))
        target[np.arange(t), rng.integers(0, k, t)] = 1.0
        for variant in ("temporal", "linear"):
            for scope in ("intra", "cross", "both"):
                for fusion in ("sqrt", "prob_avg", "fea_avg"):
                    cfg = TemporalEncoderConfig(
                        layers=1, dim=d, heads=heads, ffn_dim=ffn,
                        variant=variant, attention_scope=scope,
                    )
                    params = init_params(cfg, seed=4)
                    for name in params.tensors:
                        if name.endswith(("wo", "ffn.w2")):
                            params.tensors[name][...] = (
                                rng.standard_normal(params.tensors[name].shape) * 0.3
                            )
                    params.tensors["temperature"] = np.array(0.7)
                    tau = float(params.tensors["temperature"])
                    _, grads = loss_and_grads(
                        params, audio, visual, target, text, fusion, tau, learn_tau=True
                    )
                    fd = finite_difference_grads(
                        lambda: loss_and_grads(
                            params, audio, visual, target, text, fusion,
                            float(params.tensors["temperature"]), learn_tau=True,
                        )[0],
                        params.tensors,
                    )
                    for name in params.tensors:
                        err = relative_error(grads[name], fd[name])
                        assert err < 1e-4, (variant, scope, fusion, name, err)


class TestAdam:
    def test_zero_learning_rate_is_a_no_op(self):
        params = init_params(TemporalEncoderConfig(layers=1, dim=4, heads=2, ffn_dim=8), seed=0)
        before = {n: a.copy() for n, a in params.tensors.items()}
        config = TrainConfig(learning_rate=0.0, epochs=1)
        opt = Adam(params.tensors, config)
        grads = {n: np.ones_like(a) for n, a in params.tensors.items()}
        opt.step(params.tensors, grads)
        for name in before:
            np.testing.assert_array_equal(params.tensors[name], before[name])

    def test_first_step_size_is_learning_rate(self):
        # With bias correction the first Adam step moves each coordinate
        # by exactly lr * g / (|g| + eps).
        tensors = {"w": np.array([1.0, -2.0])}
        config = TrainConfig(learning_rate=0.1, epochs=1)
        opt = Adam(tensors, config)
        opt.step(tensors, {"w": np.array([3.0, -4.0])})
        np.testing.assert_allclose(tensors["w"], [1.0 - 0.1, -2.0 + 0.1], atol=1e-6)

    def test_descends_a_quadratic(self):
        tensors = {"w": np.array([5.0])}
        config = TrainConfig(learning_rate=0.05, epochs=1)
        opt = Adam(tensors, config)
        for _ in range(500):
            opt.step(tensors, {"w": 2.0 * tensors["w"]})
        assert abs(tensors["w"][0]) < 1e-2


def _toy_dataset(sigma=0.0, seed=0, vpc=4):
    return synth_generate(
        SynthSpec(
            n_classes=5, n_seen=3, videos_per_class=vpc, dim=24,
            noise_sigma=sigma, seed=seed,
        )
    )


class TestFit:
    def test_requires_seen_only_training_data(self):
        ds = _toy_dataset()
        vocab = ds.vocab
        unseen_samples = [
            s for s in ds.samples if vocab.is_unseen(s.label.event_class)
        ]
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16), seed=0
        )
        seen_text = seen_text_embeddings(ds.text_embeddings.data, vocab)
        with pytest.raises(TrainingError, match="seen-only"):
            fit(params, unseen_samples, seen_text, vocab, TrainConfig(epochs=1))

    def test_empty_training_set_rejected(self):
        ds = _toy_dataset()
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16), seed=0
        )
        seen_text = seen_text_embeddings(ds.text_embeddings.data, ds.vocab)
        with pytest.raises(TrainingError, match="empty"):
            fit(params, [], seen_text, ds.vocab, TrainConfig(epochs=1))

    def test_seen_text_width_enforced(self):
        ds = _toy_dataset()
        train = ds.split_samples("train")
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16), seed=0
        )
        with pytest.raises(ShapeError, match="seen"):
            fit(params, train, ds.text_embeddings.data, ds.vocab, TrainConfig(epochs=1))

    def test_zero_learning_rate_leaves_params_unchanged(self):
        ds = _toy_dataset(sigma=0.1)
        train = ds.split_samples("train")
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16), seed=1
        )
        seen_text = seen_text_embeddings(ds.text_embeddings.data, ds.vocab)
        result = fit(
            params, train, seen_text, ds.vocab, TrainConfig(epochs=2, learning_rate=0.0)
        )
        for name, arr in params.tensors.items():
            np.testing.assert_array_equal(result.params.tensors[name], arr)

    def test_loss_decreases_over_early_epochs(self):
        ds = _toy_dataset(sigma=0.2, seed=2)
        train = ds.split_samples("train")[:1]
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16), seed=2
        )
        seen_text = seen_text_embeddings(ds.text_embeddings.data, ds.vocab)
        result = fit(
            params, train, seen_text, ds.vocab,
            TrainConfig(epochs=5, learning_rate=1e-3, seed=2),
        )
        losses = [r.loss for r in result.trace]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_deterministic_given_seed(self):
        ds = _toy_dataset(sigma=0.2, seed=3)
        train = ds.split_samples("train")
        seen_text = seen_text_embeddings(ds.text_embeddings.data, ds.vocab)
        config = TrainConfig(epochs=2, learning_rate=1e-3, seed=3)
        cfg = TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16)
        one = fit(init_params(cfg, seed=3), train, seen_text, ds.vocab, config)
        two = fit(init_params(cfg, seed=3), train, seen_text, ds.vocab, config)
        for name in one.params.tensors:
            np.testing.assert_array_equal(
                one.params.tensors[name], two.params.tensors[name]
            )
        assert [r.loss for r in one.trace] == [r.loss for r in two.trace]

    def test_best_epoch_selection_prefers_val_peak(self):
        ds = _toy_dataset(sigma=0.2, seed=4)
        train = ds.split_samples("train")
        seen_text = seen_text_embeddings(ds.text_embeddings.data, ds.vocab)
        cfg = TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16)
        scores = iter([0.3, 0.9, 0.2])
        snapshots = []

        def val_fn(p):
            snapshots.append({n: a.copy() for n, a in p.tensors.items()})
            return next(scores)

        result = fit(
            init_params(cfg, seed=4), train, seen_text, ds.vocab,
            TrainConfig(epochs=3, learning_rate=1e-3, seed=4), val_fn=val_fn,
        )
        assert result.best_epoch == 2
        assert [r.val_avg for r in result.trace] == [0.3, 0.9, 0.2]
        for name in result.params.tensors:
            np.testing.assert_array_equal(
                result.params.tensors[name], snapshots[1][name]
            )


class TestSubsample:
    def test_ratio_keeps_ceil_per_class(self):
        ds = _toy_dataset(vpc=5)
        train = [s for s in ds.samples]  # 5 per class
        rng = np.random.default_rng(0)
        kept = subsample_by_class(train, 0.5, rng)
        per_class = {}
        for s in kept:
            per_class[s.label.event_class] = per_class.get(s.label.event_class, 0) + 1
        assert all(n == math.ceil(0.5 * 5) for n in per_class.values())

    def test_ratio_one_keeps_everything(self):
        ds = _toy_dataset(vpc=3)
        rng = np.random.default_rng(0)
        assert len(subsample_by_class(list(ds.samples), 1.0, rng)) == len(ds.samples)


class TestInfer:
    def test_identity_model_matches_fused_zeroshot_scores(self):
        """Zero residual sublayers: infer equals softmax-fused raw similarities."""
        ds = _toy_dataset(sigma=0.1, seed=5)
        sample = ds.samples[0]
        text = ds.text_embeddings.data
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16), seed=5
        )
        for name in params.tensors:
            if name.endswith(("wo", "bo", "ffn.w2", "ffn.b2")):
                params.tensors[name][...] = 0.0
        tau = 0.07
        _, probs = infer(
            params, sample.audio.data, sample.visual.data, text, ds.vocab,
            fusion="sqrt", temperature=tau,
        )
        s_audio, s_visual = similarity_pair(sample.audio, sample.visual, text)
        expected = fuse(
            softmax_rows(s_audio, tau), softmax_rows(s_visual, tau), "sqrt"
        )
        np.testing.assert_allclose(probs, expected, atol=1e-12)

    def test_distant_unseen_text_rows_never_predicted(self):
        rng = np.random.default_rng(6)
        vocab = ClassVocabulary(seen=("a", "b"), unseen=("u",))
        d = 8
        text = np.vstack([np.eye(d)[:2], np.full((1, d), -3.0), np.eye(d)[2:3]])
        audio = np.abs(rng.standard_normal((4, d))) + 0.1
        visual = np.abs(rng.standard_normal((4, d))) + 0.1
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=d, heads=2, ffn_dim=8), seed=6
        )
        pred, _ = infer(params, audio, visual, text, vocab)
        unseen_index = vocab.class_index("u")
        assert unseen_index not in pred.classes

    def test_text_row_count_checked(self):
        ds = _toy_dataset()
        sample = ds.samples[0]
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16), seed=0
        )
        with pytest.raises(ShapeError):
            infer(
                params, sample.audio.data, sample.visual.data,
                ds.text_embeddings.data[:-2], ds.vocab,
            )

    def test_zero_noise_fit_recovers_seen_validation_exactly(self):
        """After fine-tuning on the zero-noise oracle set, every seen-class
        validation video is predicted segment-for-segment."""
        ds = _toy_dataset(sigma=0.0, seed=7, vpc=8)
        train = ds.split_samples("train")
        params = init_params(
            TemporalEncoderConfig(layers=1, dim=24, heads=2, ffn_dim=16), seed=7
        )
        text = ds.text_embeddings.data
        seen_text = seen_text_embeddings(text, ds.vocab)
        result = fit(
            params, train, seen_text, ds.vocab,
            TrainConfig(epochs=30, learning_rate=1e-3, seed=7),
        )
        for sample in ds.split_samples("val"):
            if not ds.vocab.is_seen(sample.label.event_class):
                continue
            pred, _ = infer(
                result.params, sample.audio.data, sample.visual.data, text, ds.vocab
            )
            expected = [
                ds.vocab.class_index(sample.label.event_class) if f
                else ds.vocab.special_index()
                for f in sample.label.segment_flags
            ]
            assert list(pred.classes) == expected
