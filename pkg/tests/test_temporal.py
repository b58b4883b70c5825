"""Temporal encoder: forward semantics, gradients, counts, checkpoints."""

import numpy as np
import pytest

from avloc.errors import ContainerError, ShapeError
from avloc.temporal import (
    TemporalEncoderConfig,
    TemporalEncoderParams,
    backward,
    checkpoint_bytes,
    forward,
    forward_with_cache,
    init_params,
    load_checkpoint,
    param_count,
    param_spec,
    parse_checkpoint,
    save_checkpoint,
)

from oracles import finite_difference_grads, relative_error

TINY = dict(layers=1, dim=4, heads=2, ffn_dim=8)


def tiny_config(**overrides):
    merged = {**TINY, **overrides}
    return TemporalEncoderConfig(**merged)


def random_inputs(rng, t=3, d=4):
    return rng.standard_normal((t, d)), rng.standard_normal((t, d))


class TestConfig:
    def test_dim_must_divide_heads(self):
        with pytest.raises(ShapeError):
            TemporalEncoderConfig(dim=10, heads=3)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ShapeError):
            TemporalEncoderConfig(variant="conv")


class TestParamCount:
    def test_reference_configuration_anchor(self):
        """L=1, d=1024, heads=8, ffn=2048, shared: exactly 8,399,872."""
        cfg = TemporalEncoderConfig(layers=1, dim=1024, heads=8, ffn_dim=2048)
        assert param_count(cfg) == 8_399_872

    def test_linear_variant_anchor(self):
        cfg = TemporalEncoderConfig(variant="linear", dim=1024)
        assert param_count(cfg) == 1_049_600

    def test_count_linear_in_layers(self):
        one = param_count(tiny_config(layers=1))
        two = param_count(tiny_config(layers=2))
        assert two == 2 * one

    def test_unshared_doubles_count(self):
        shared = param_count(tiny_config())
        separate = param_count(tiny_config(share_modalities=False))
        assert separate == 2 * shared

    def test_count_matches_initialized_tensors(self):
        for variant in ("temporal", "linear"):
            for scope in ("intra", "cross", "both"):
                cfg = tiny_config(variant=variant, attention_scope=scope)
                params = init_params(cfg, seed=0)
                assert sum(a.size for a in params.tensors.values()) == param_count(cfg)


class TestForward:
    def test_zeroed_output_projections_give_exact_identity(self):
        rng = np.random.default_rng(0)
        for scope in ("intra", "cross", "both"):
            cfg = tiny_config(attention_scope=scope)
            params = init_params(cfg, seed=1)
            for name in params.tensors:
                if name.endswith(("wo", "bo", "ffn.w2", "ffn.b2")):
                    params.tensors[name][...] = 0.0
            audio, visual = random_inputs(rng)
            out_a, out_v = forward(params, audio, visual)
            np.testing.assert_array_equal(out_a, audio)
            np.testing.assert_array_equal(out_v, visual)

    def test_default_initialization_is_gated_pooling(self):
        """Fresh params: QKV at identity, attention gate at 0.1 * I, FFN
        branch closed. Zeroing the gate recovers the exact identity."""
        rng = np.random.default_rng(1)
        cfg = tiny_config()
        params = init_params(cfg, seed=2)
        np.testing.assert_array_equal(params.tensors["block0.attn.wq"], np.eye(cfg.dim))
        np.testing.assert_array_equal(params.tensors["block0.attn.wv"], np.eye(cfg.dim))
        np.testing.assert_array_equal(
            params.tensors["block0.attn.wo"], 0.1 * np.eye(cfg.dim)
        )
        np.testing.assert_array_equal(
            params.tensors["block0.ffn.w2"], np.zeros((cfg.ffn_dim, cfg.dim))
        )
        audio, visual = random_inputs(rng)
        params.tensors["block0.attn.wo"][...] = 0.0
        out_a, out_v = forward(params, audio, visual)
        np.testing.assert_array_equal(out_a, audio)
        np.testing.assert_array_equal(out_v, visual)

    def test_linear_identity_weights_pass_through(self):
        rng = np.random.default_rng(2)
        params = init_params(tiny_config(variant="linear"), seed=0)
        audio, visual = random_inputs(rng)
        out_a, out_v = forward(params, audio, visual)
        np.testing.assert_array_equal(out_a, audio)
        np.testing.assert_array_equal(out_v, visual)

    def test_intra_permutation_equivariance(self):
        """No positional encoding: permuting segments permutes outputs."""
        rng = np.random.default_rng(3)
        params = _trained_like(tiny_config(), seed=3, rng=rng)
        audio, visual = random_inputs(rng, t=5)
        out_a, out_v = forward(params, audio, visual)
        perm = rng.permutation(5)
        pa, pv = forward(params, audio[perm], visual[perm])
        np.testing.assert_allclose(pa, out_a[perm], atol=1e-10)
        np.testing.assert_allclose(pv, out_v[perm], atol=1e-10)

    def test_shared_params_identical_streams_identical_outputs(self):
        rng = np.random.default_rng(4)
        for scope in ("intra", "cross", "both"):
            params = _trained_like(tiny_config(attention_scope=scope), seed=4, rng=rng)
            x = rng.standard_normal((3, 4))
            out_a, out_v = forward(params, x, x)
            np.testing.assert_allclose(out_a, out_v, atol=1e-12)

    def test_intra_stream_isolation(self):
        """Intra scope: the audio output ignores the visual stream entirely."""
        rng = np.random.default_rng(5)
        params = _trained_like(tiny_config(attention_scope="intra"), seed=5, rng=rng)
        audio = rng.standard_normal((3, 4))
        out_one, _ = forward(params, audio, rng.standard_normal((3, 4)))
        out_two, _ = forward(params, audio, rng.standard_normal((3, 4)))
        np.testing.assert_array_equal(out_one, out_two)

    def test_cross_stream_coupling(self):
        rng = np.random.default_rng(6)
        params = _trained_like(tiny_config(attention_scope="cross"), seed=6, rng=rng)
        audio = rng.standard_normal((3, 4))
        out_one, _ = forward(params, audio, rng.standard_normal((3, 4)))
        out_two, _ = forward(params, audio, rng.standard_normal((3, 4)))
        assert not np.allclose(out_one, out_two)

    def test_shape_mismatch_rejected(self):
        params = init_params(tiny_config(), seed=0)
        with pytest.raises(ShapeError):
            forward(params, np.ones((3, 4)), np.ones((2, 4)))
        with pytest.raises(ShapeError):
            forward(params, np.ones((3, 5)), np.ones((3, 5)))


def _trained_like(config, seed, rng):
    """Params with non-trivial output projections, as after training."""
    params = init_params(config, seed=seed)
    for name in params.tensors:
        if name.endswith(("wo", "ffn.w2")):
            params.tensors[name][...] = rng.standard_normal(params.tensors[name].shape) * 0.3
    return params


class TestBackward:
    def test_gradients_match_finite_differences(self):
        """All variant x scope combinations, relative error under 1e-4."""
        rng = np.random.default_rng(7)
        for variant in ("temporal", "linear"):
            for scope in ("intra", "cross", "both"):
                cfg = tiny_config(variant=variant, attention_scope=scope)
                params = _trained_like(cfg, seed=8, rng=rng)
                audio, visual = random_inputs(rng)
                upstream_a = rng.standard_normal((3, 4))
                upstream_v = rng.standard_normal((3, 4))

                def loss():
                    out_a, out_v = forward(params, audio, visual)
                    return float((out_a * upstream_a).sum() + (out_v * upstream_v).sum())

                _, _, blocks = forward_with_cache(params, audio, visual)
                grads, _, _ = backward(params, blocks, upstream_a, upstream_v)
                fd = finite_difference_grads(loss, params.tensors)
                for name in params.tensors:
                    err = relative_error(grads[name], fd[name])
                    assert err < 1e-4, (variant, scope, name, err)

    def test_input_gradients_match_finite_differences(self):
        rng = np.random.default_rng(8)
        params = _trained_like(tiny_config(attention_scope="both"), seed=9, rng=rng)
        audio, visual = random_inputs(rng)
        upstream_a = rng.standard_normal((3, 4))
        upstream_v = rng.standard_normal((3, 4))
        _, _, blocks = forward_with_cache(params, audio, visual)
        _, d_audio, d_visual = backward(params, blocks, upstream_a, upstream_v)

        def loss():
            out_a, out_v = forward(params, audio, visual)
            return float((out_a * upstream_a).sum() + (out_v * upstream_v).sum())

        fd = finite_difference_grads(loss, {"audio": audio, "visual": visual})
        assert relative_error(d_audio, fd["audio"]) < 1e-4
        assert relative_error(d_visual, fd["visual"]) < 1e-4

    def test_doubling_upstream_doubles_gradients(self):
        rng = np.random.default_rng(9)
        params = _trained_like(tiny_config(), seed=10, rng=rng)
        audio, visual = random_inputs(rng)
        up_a, up_v = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
        _, _, blocks = forward_with_cache(params, audio, visual)
        one, _, _ = backward(params, blocks, up_a, up_v)
        two, _, _ = backward(params, blocks, 2 * up_a, 2 * up_v)
        for name in one:
            np.testing.assert_allclose(two[name], 2 * one[name], atol=1e-10)


class TestCheckpoint:
    def test_save_load_save_is_bit_exact(self, tmp_path):
        params = init_params(tiny_config(attention_scope="both"), seed=11)
        path = tmp_path / "model.ovtm"
        save_checkpoint(params, path)
        first = path.read_bytes()
        save_checkpoint(load_checkpoint(path), path)
        assert path.read_bytes() == first

    def test_loaded_values_match_f32_cast(self, tmp_path):
        params = init_params(tiny_config(), seed=12)
        path = tmp_path / "model.ovtm"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.config == params.config
        for name, arr in params.tensors.items():
            np.testing.assert_array_equal(
                loaded.tensors[name], arr.astype(np.float32).astype(np.float64)
            )

    def test_temperature_scalar_round_trips(self, tmp_path):
        params = init_params(tiny_config(), seed=13)
        params.tensors["temperature"] = np.array(0.07)
        path = tmp_path / "model.ovtm"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.tensors["temperature"].shape == ()
        np.testing.assert_allclose(loaded.tensors["temperature"], np.float32(0.07))

    def test_bad_magic_rejected(self):
        params = init_params(tiny_config(), seed=0)
        blob = b"NOPE" + checkpoint_bytes(params)[4:]
        with pytest.raises(ContainerError, match="magic"):
            parse_checkpoint(blob)

    def test_truncated_checkpoint_rejected(self):
        params = init_params(tiny_config(), seed=0)
        blob = checkpoint_bytes(params)
        with pytest.raises(ContainerError, match="truncated"):
            parse_checkpoint(blob[: len(blob) - 3])

    def test_missing_tensor_rejected(self):
        cfg = tiny_config()
        params = init_params(cfg, seed=0)
        tensors = dict(params.tensors)
        first = next(iter(tensors))
        del tensors[first]
        with pytest.raises(ShapeError, match="missing"):
            TemporalEncoderParams(cfg, tensors)

    def test_canonical_spec_order_is_stable(self):
        names = [name for name, _, _ in param_spec(tiny_config(attention_scope="both"))]
        assert names[0] == "block0.ln_attn.gain"
        assert names.index("block0.xattn.wq") > names.index("block0.attn.wo")
        assert names[-1] == "block0.ffn.b2"
