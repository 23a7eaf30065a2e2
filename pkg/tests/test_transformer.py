"""Secure linear algebra and transformer layers."""

import numpy as np
import pytest

from conftest import sim, sim_open
from trishare import FixedCodec, comm_model, oracle, share_tensor, transformer
from trishare.transformer import ModelConfig, causal_mask, forward_ref, random_weights

CODEC = FixedCodec()
ENC = CODEC.encode_array
DEC = CODEC.decode_array

TINY = ModelConfig(n_layers=2, d_model=64, n_heads=4, d_ff=256, vocab_size=100, max_seq_len=16)


def share_dict(weights, rng):
    return transformer.share_weights(weights, rng)


class TestSecureMatmul:
    def test_identity(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(-5, 5, (6, 6))
        eye = np.eye(6)
        xs, ys = share_tensor(ENC(eye), rng), share_tensor(ENC(a), rng)
        got, _ = sim_open(lambda rt, u, v: rt.open_tensor(transformer.secure_matmul(rt, u, v)), list(zip(xs, ys)))
        assert np.abs(DEC(got) - a).max() <= 2.0**-16

    def test_zero(self):
        rng = np.random.default_rng(1)
        xs = share_tensor(np.zeros((3, 4), dtype=np.uint64), rng)
        ys = share_tensor(ENC(rng.uniform(-5, 5, (4, 2))), rng)
        got, _ = sim_open(lambda rt, u, v: rt.open_tensor(transformer.secure_matmul(rt, u, v)), list(zip(xs, ys)))
        assert np.all(DEC(got) == 0.0)

    def test_random_8x8(self):
        rng = np.random.default_rng(2)
        a = rng.uniform(-3, 3, (8, 8))
        b = rng.uniform(-3, 3, (8, 8))
        xs, ys = share_tensor(ENC(a), rng), share_tensor(ENC(b), rng)
        got, _ = sim_open(lambda rt, u, v: rt.open_tensor(transformer.secure_matmul(rt, u, v)), list(zip(xs, ys)))
        assert np.abs(DEC(got) - a @ b).max() <= 8 * 2.0**-17

    def test_inner_dim_mismatch(self):
        rng = np.random.default_rng(3)
        xs = share_tensor(np.zeros((2, 3), dtype=np.uint64), rng)
        ys = share_tensor(np.zeros((4, 2), dtype=np.uint64), rng)
        with pytest.raises(ValueError):
            sim(lambda rt, u, v: transformer.secure_matmul(rt, u, v), list(zip(xs, ys)))

    def test_public_matmul(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(-3, 3, (8, 8))
        b = rng.uniform(-3, 3, (8, 8))
        xs = share_tensor(ENC(a), rng)
        got, res = sim_open(
            lambda rt, u: rt.open_tensor(transformer.secure_matmul_public(rt, u, b)), [(s,) for s in xs]
        )
        assert np.abs(DEC(got) - a @ b).max() <= 8 * 2.0**-17
        # communication-free except the truncation and the final open
        expect = comm_model.trunc_cost(64) + comm_model.open_cost(64)
        assert [s.bytes_sent for s in res.stats] == list(expect)


class TestAttention:
    def test_singleton_sequence(self):
        rng = np.random.default_rng(5)
        q = rng.uniform(-1, 1, (1, 8))
        k = rng.uniform(-1, 1, (1, 8))
        v = rng.uniform(-1, 1, (1, 8))
        shares = [share_tensor(ENC(t), rng) for t in (q, k, v)]
        got, _ = sim_open(
            lambda rt, qi, ki, vi: rt.open_tensor(
                transformer.secure_attention(rt, qi, ki, vi, causal_mask(1), scale=8**-0.5)
            ),
            list(zip(*shares)),
        )
        assert np.abs(DEC(got) - v).max() <= 2.0**-9

    def test_masked_rows_see_only_self(self):
        # with everything masked except the diagonal, output row i is V[i]
        rng = np.random.default_rng(6)
        s, dh = 4, 8
        q = rng.uniform(-1, 1, (s, dh))
        k = rng.uniform(-1, 1, (s, dh))
        v = rng.uniform(-1, 1, (s, dh))
        mask = np.full((s, s), transformer.MASK_CONSTANT)
        np.fill_diagonal(mask, 0.0)
        shares = [share_tensor(ENC(t), rng) for t in (q, k, v)]
        got, _ = sim_open(
            lambda rt, qi, ki, vi: rt.open_tensor(transformer.secure_attention(rt, qi, ki, vi, mask, scale=None)),
            list(zip(*shares)),
        )
        assert np.abs(DEC(got) - v).max() <= 2.0**-9

    def test_random_vs_oracle(self):
        rng = np.random.default_rng(7)
        s, dh = 8, 8
        q = rng.uniform(-1, 1, (s, dh))
        k = rng.uniform(-1, 1, (s, dh))
        v = rng.uniform(-1, 1, (s, dh))
        mask = causal_mask(s)
        shares = [share_tensor(ENC(t), rng) for t in (q, k, v)]
        got, _ = sim_open(
            lambda rt, qi, ki, vi: rt.open_tensor(
                transformer.secure_attention(rt, qi, ki, vi, mask, scale=dh**-0.5)
            ),
            list(zip(*shares)),
        )
        ref = oracle.attention_ref(q, k, v, mask, scale=dh**-0.5)
        assert np.abs(DEC(got) - ref).max() <= 2.0**-6


class TestMultihead:
    def test_single_head_reduces_to_attention(self):
        config = ModelConfig(n_layers=1, d_model=16, n_heads=1, d_ff=32, vocab_size=10, max_seq_len=8)
        rng = np.random.default_rng(8)
        s = 4
        x = rng.uniform(-1, 1, (s, 16))
        lw = {k: rng.normal(0, 0.25, (16, 16)) for k in ("attn.wq", "attn.wk", "attn.wv", "attn.wo")}
        mask = causal_mask(s)
        xs = share_tensor(ENC(x), rng)
        ws = [dict() for _ in range(3)]
        for k, arr in lw.items():
            shs = share_tensor(ENC(arr), rng)
            for p in range(3):
                ws[p][k] = shs[p]
        got, _ = sim_open(
            lambda rt, xi, wi: rt.open_tensor(transformer.secure_multihead(rt, xi, wi, mask, config)),
            list(zip(xs, ws)),
        )
        q, k, v = x @ lw["attn.wq"], x @ lw["attn.wk"], x @ lw["attn.wv"]
        scores = (q @ k.T) * 16**-0.5 + mask
        ref = (oracle.softmax_clipped_ref(scores) @ v) @ lw["attn.wo"]
        assert np.abs(DEC(got) - ref).max() <= 2.0**-6

    def test_zero_input_propagates_zero(self):
        config = ModelConfig(n_layers=1, d_model=16, n_heads=2, d_ff=32, vocab_size=10, max_seq_len=8)
        rng = np.random.default_rng(9)
        s = 4
        xs = share_tensor(np.zeros((s, 16), dtype=np.uint64), rng)
        ws = [dict() for _ in range(3)]
        for k in ("attn.wq", "attn.wk", "attn.wv", "attn.wo"):
            shs = share_tensor(ENC(rng.normal(0, 0.25, (16, 16))), rng)
            for p in range(3):
                ws[p][k] = shs[p]
        got, _ = sim_open(
            lambda rt, xi, wi: rt.open_tensor(transformer.secure_multihead(rt, xi, wi, causal_mask(s), config)),
            list(zip(xs, ws)),
        )
        assert np.abs(DEC(got)).max() <= 2.0**-8


class TestFFN:
    @staticmethod
    def _shared_ffn(rng, d, dff):
        w = {
            "w1": rng.normal(0, d**-0.5, (d, dff)),
            "b1": rng.normal(0, 0.1, (dff,)),
            "w2": rng.normal(0, dff**-0.5, (dff, d)),
            "b2": rng.normal(0, 0.1, (d,)),
        }
        shares = [dict() for _ in range(3)]
        for k, arr in w.items():
            shs = share_tensor(ENC(arr), rng)
            for p in range(3):
                shares[p][k] = shs[p]
        return w, shares

    def test_zero_input(self):
        rng = np.random.default_rng(10)
        w, ws = self._shared_ffn(rng, 16, 32)
        xs = share_tensor(np.zeros((2, 16), dtype=np.uint64), rng)
        got, _ = sim_open(
            lambda rt, xi, wi: rt.open_tensor(
                transformer.secure_ffn(rt, xi, wi["w1"], wi["b1"], wi["w2"], wi["b2"])
            ),
            list(zip(xs, ws)),
        )
        ref = oracle.gelu_piecewise(np.zeros((2, 16)) @ w["w1"] + w["b1"]) @ w["w2"] + w["b2"]
        assert np.abs(DEC(got) - ref).max() <= 2.0**-6

    def test_zero_weights_give_bias(self):
        rng = np.random.default_rng(11)
        w, ws = self._shared_ffn(rng, 16, 32)
        zero1 = share_tensor(np.zeros((16, 32), dtype=np.uint64), rng)
        zero2 = share_tensor(np.zeros((32, 16), dtype=np.uint64), rng)
        for p in range(3):
            ws[p]["w1"] = zero1[p]
            ws[p]["w2"] = zero2[p]
        xs = share_tensor(ENC(rng.uniform(-1, 1, (2, 16))), rng)
        got, _ = sim_open(
            lambda rt, xi, wi: rt.open_tensor(
                transformer.secure_ffn(rt, xi, wi["w1"], wi["b1"], wi["w2"], wi["b2"])
            ),
            list(zip(xs, ws)),
        )
        assert np.abs(DEC(got) - w["b2"]).max() <= 2.0**-8

    def test_random_vs_oracle(self):
        rng = np.random.default_rng(12)
        w, ws = self._shared_ffn(rng, 16, 32)
        x = rng.uniform(-1, 1, (4, 16))
        xs = share_tensor(ENC(x), rng)
        got, _ = sim_open(
            lambda rt, xi, wi: rt.open_tensor(
                transformer.secure_ffn(rt, xi, wi["w1"], wi["b1"], wi["w2"], wi["b2"])
            ),
            list(zip(xs, ws)),
        )
        ref = oracle.gelu_piecewise(x @ w["w1"] + w["b1"]) @ w["w2"] + w["b2"]
        assert np.abs(DEC(got) - ref).max() <= 2.0**-6


class TestForward:
    @pytest.mark.parametrize("placement", ["post", "pre"])
    def test_against_reference(self, placement):
        config = ModelConfig(
            n_layers=2, d_model=32, n_heads=2, d_ff=64, vocab_size=40, max_seq_len=12, norm_placement=placement
        )
        rng = np.random.default_rng(13)
        weights = random_weights(config, rng)
        tokens = rng.integers(0, 40, 6, dtype=np.uint64)
        sw = share_dict(weights, rng)
        st = transformer.share_tokens(tokens, rng)
        got, _ = sim_open(
            lambda rt, ti, wi: rt.open_tensor(transformer.secure_forward(rt, ti, wi, config)), list(zip(st, sw))
        )
        ref = forward_ref(tokens, weights, config)
        assert np.abs(DEC(got) - ref).max() <= 1e-2

    def test_sequence_too_long(self):
        config = ModelConfig(n_layers=1, d_model=16, n_heads=2, d_ff=32, vocab_size=10, max_seq_len=4)
        rng = np.random.default_rng(14)
        weights = random_weights(config, rng)
        sw = share_dict(weights, rng)
        st = transformer.share_tokens(np.zeros(6, dtype=np.uint64), rng)
        with pytest.raises(ValueError, match="max_seq_len"):
            sim(lambda rt, ti, wi: transformer.secure_forward(rt, ti, wi, config), list(zip(st, sw)))

    def test_causal_mask_soundness(self):
        # logits at position i are invariant to tokens at positions > i
        config = ModelConfig(n_layers=1, d_model=32, n_heads=2, d_ff=64, vocab_size=30, max_seq_len=8)
        rng = np.random.default_rng(15)
        weights = random_weights(config, rng)
        tokens = rng.integers(0, 30, 6, dtype=np.uint64)
        altered = tokens.copy()
        altered[4:] = (altered[4:] + 7) % 30

        outs = []
        for toks in (tokens, altered):
            sw = share_dict(weights, rng)
            st = transformer.share_tokens(toks, rng)
            got, _ = sim_open(
                lambda rt, ti, wi: rt.open_tensor(transformer.secure_forward(rt, ti, wi, config)),
                list(zip(st, sw)),
            )
            outs.append(DEC(got))
        assert np.abs(outs[0][:4] - outs[1][:4]).max() <= 2.0**-8

    def test_debug_trace_layer_invariant(self):
        config = ModelConfig(n_layers=2, d_model=32, n_heads=2, d_ff=64, vocab_size=30, max_seq_len=8)
        rng = np.random.default_rng(16)
        weights = random_weights(config, rng)
        tokens = rng.integers(0, 30, 4, dtype=np.uint64)
        sw = share_dict(weights, rng)
        st = transformer.share_tokens(tokens, rng)

        def prog(rt, ti, wi):
            trace = []
            logits = transformer.secure_forward(rt, ti, wi, config, trace=trace)
            return rt.open_tensor(logits), trace

        res = sim(prog, list(zip(st, sw)))
        traces = [out[1] for out in res.outputs]
        assert len(traces[0]) == config.n_layers
        for layer in range(config.n_layers):
            # every party opened the same well-formed block output
            assert np.array_equal(traces[0][layer], traces[1][layer])
            assert np.array_equal(traces[1][layer], traces[2][layer])

    def test_forward_bytes_match_analytic_model(self):
        for s, placement, scale in ((4, "post", True), (8, "pre", False)):
            config = ModelConfig(
                n_layers=2,
                d_model=32,
                n_heads=2,
                d_ff=64,
                vocab_size=40,
                max_seq_len=12,
                norm_placement=placement,
                attn_scale=scale,
            )
            rng = np.random.default_rng(17)
            weights = random_weights(config, rng)
            sw = share_dict(weights, rng)
            st = transformer.share_tokens(rng.integers(0, 40, s, dtype=np.uint64), rng)
            res = sim(lambda rt, ti, wi: transformer.secure_forward(rt, ti, wi, config), list(zip(st, sw)))
            got = [st_.bytes_sent for st_ in res.stats]
            assert got == list(comm_model.forward_cost(s, config))

    def test_bytes_grow_with_sequence_length(self):
        c = TINY
        b4 = comm_model.forward_cost(4, c).sum()
        b8 = comm_model.forward_cost(8, c).sum()
        b16 = comm_model.forward_cost(16, c).sum()
        assert b4 < b8 < b16


class TestConfigValidation:
    def test_head_divisibility(self):
        with pytest.raises(ValueError):
            ModelConfig(n_layers=1, d_model=30, n_heads=4, d_ff=16, vocab_size=8, max_seq_len=4)

    def test_placement_name(self):
        with pytest.raises(ValueError):
            ModelConfig(
                n_layers=1, d_model=32, n_heads=4, d_ff=16, vocab_size=8, max_seq_len=4, norm_placement="mid"
            )

    def test_roundtrip_dict(self):
        c = TINY
        assert ModelConfig.from_dict(c.to_dict()) == c
