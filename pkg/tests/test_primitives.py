"""Interactive primitives against exact and float oracles."""

import numpy as np
import pytest

from conftest import sim, sim_open
from trishare import FixedCodec, comm_model, primitives, share_tensor
from trishare.ring import share_bits

CODEC = FixedCodec()
ENC = CODEC.encode_array
DEC = CODEC.decode_array


def enc1(v):
    return ENC(np.array([v]))


class TestMul:
    def test_small_integers(self):
        rng = np.random.default_rng(0)
        xs = share_tensor(np.array([3], dtype=np.uint64), rng)
        ys = share_tensor(np.array([4], dtype=np.uint64), rng)
        got, _ = sim_open(lambda rt, a, b: rt.open_tensor(primitives.mul(rt, a, b)), list(zip(xs, ys)))
        assert int(got[0]) == 12

    def test_times_zero(self):
        rng = np.random.default_rng(1)
        xs = share_tensor(np.array([123456789], dtype=np.uint64), rng)
        ys = share_tensor(np.array([0], dtype=np.uint64), rng)
        got, _ = sim_open(lambda rt, a, b: rt.open_tensor(primitives.mul(rt, a, b)), list(zip(xs, ys)))
        assert int(got[0]) == 0

    def test_random_modular_products(self):
        rng = np.random.default_rng(2)
        n = 10**4
        x = rng.integers(0, 1 << 64, n, dtype=np.uint64)
        y = rng.integers(0, 1 << 64, n, dtype=np.uint64)
        xs, ys = share_tensor(x, rng), share_tensor(y, rng)
        got, res = sim_open(lambda rt, a, b: rt.open_tensor(primitives.mul(rt, a, b)), list(zip(xs, ys)))
        assert np.array_equal(got, x * y)
        # communication: 8n for mul plus 8n for the open, one round each
        for s in res.stats:
            assert s.bytes_sent == 16 * n
            assert s.rounds == 2

    def test_shape_mismatch(self):
        rng = np.random.default_rng(3)
        xs = share_tensor(np.zeros((2, 3), dtype=np.uint64), rng)
        ys = share_tensor(np.zeros((4, 5), dtype=np.uint64), rng)
        with pytest.raises(ValueError):
            sim(lambda rt, a, b: primitives.mul(rt, a, b), list(zip(xs, ys)))


class TestSquare:
    def test_three_squared(self):
        rng = np.random.default_rng(4)
        xs = share_tensor(enc1(3.0), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.square_fixed(rt, a)), [(s,) for s in xs])
        assert abs(DEC(got)[0] - 9.0) <= 2.0**-17

    def test_zero(self):
        rng = np.random.default_rng(5)
        xs = share_tensor(np.array([0], dtype=np.uint64), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.square(rt, a)), [(s,) for s in xs])
        assert int(got[0]) == 0

    def test_matches_mul_fixed_cross_protocol(self):
        rng = np.random.default_rng(6)
        v = rng.uniform(-50, 50, 10**4)
        xs = share_tensor(ENC(v), rng)

        def prog(rt, a):
            return rt.open_tensor(primitives.square_fixed(rt, a)), rt.open_tensor(primitives.mul_fixed(rt, a, a))

        res = sim(prog, [(s,) for s in xs])
        sq, mf = res.outputs[0]
        assert np.abs(DEC(sq) - DEC(mf)).max() <= 2.0**-17


class TestTrunc:
    def test_product_of_two_and_three(self):
        rng = np.random.default_rng(7)
        # doubled-precision product of encodings of 2 and 3
        prod = np.array([(2 << 18) * (3 << 18)], dtype=np.uint64)
        xs = share_tensor(prod, rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.trunc(rt, a, 18)), [(s,) for s in xs])
        assert abs(DEC(got)[0] - 6.0) <= 2.0**-18

    def test_zero(self):
        rng = np.random.default_rng(8)
        xs = share_tensor(np.array([0], dtype=np.uint64), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.trunc(rt, a, 18)), [(s,) for s in xs])
        assert int(got[0]) == 0

    def test_error_at_most_one_ulp_bulk(self):
        rng = np.random.default_rng(9)
        n = 10**5
        a = rng.uniform(-4, 4, n)
        b = rng.uniform(-4, 4, n)
        prod = ENC(a) * ENC(b)  # doubled precision, in range
        xs = share_tensor(prod, rng)
        got, _ = sim_open(lambda rt, t: rt.open_tensor(primitives.trunc(rt, t, 18)), [(s,) for s in xs])
        ref = prod.view(np.int64) >> 18  # floor of the ring value
        diff = np.abs(got.view(np.int64) - ref)
        assert diff.max() <= 1  # and zero wrap failures

    def test_decode_error_vs_real_products(self):
        rng = np.random.default_rng(10)
        n = 10**5
        a = DEC(ENC(rng.uniform(-4, 4, n)))
        b = DEC(ENC(rng.uniform(-4, 4, n)))
        xs = share_tensor(ENC(a) * ENC(b), rng)
        got, _ = sim_open(lambda rt, t: rt.open_tensor(primitives.trunc(rt, t, 18)), [(s,) for s in xs])
        assert np.abs(DEC(got) - a * b).max() <= 2 * 2.0**-18


class TestMulFixed:
    def test_identity(self):
        rng = np.random.default_rng(11)
        v = rng.uniform(-100, 100, 256)
        xs = share_tensor(ENC(v), rng)
        ys = share_tensor(ENC(np.ones(256)), rng)
        got, _ = sim_open(lambda rt, a, b: rt.open_tensor(primitives.mul_fixed(rt, a, b)), list(zip(xs, ys)))
        assert np.abs(DEC(got) - DEC(ENC(v))).max() <= 2.0**-17

    def test_contract(self):
        rng = np.random.default_rng(12)
        a = rng.uniform(-30, 30, 10**4)
        b = rng.uniform(-30, 30, 10**4)
        xs, ys = share_tensor(ENC(a), rng), share_tensor(ENC(b), rng)
        got, _ = sim_open(lambda rt, u, v: rt.open_tensor(primitives.mul_fixed(rt, u, v)), list(zip(xs, ys)))
        assert np.abs(DEC(got) - a * b).max() <= 2.0**-17 + np.abs(a * b).max() * 2.0**-18


class TestA2B:
    def test_five(self):
        rng = np.random.default_rng(13)
        xs = share_tensor(np.array([5], dtype=np.uint64), rng)
        got, _ = sim_open(lambda rt, a: rt.open_bits(primitives.a2b(rt, a)), [(s,) for s in xs])
        assert int(got[0]) == 5  # bits 101

    def test_msb_only(self):
        rng = np.random.default_rng(14)
        xs = share_tensor(np.array([1 << 63], dtype=np.uint64), rng)
        got, _ = sim_open(lambda rt, a: rt.open_bits(primitives.a2b(rt, a)), [(s,) for s in xs])
        assert int(got[0]) == 1 << 63

    def test_random_binary_expansion(self):
        rng = np.random.default_rng(15)
        x = rng.integers(0, 1 << 64, 10**4, dtype=np.uint64)
        xs = share_tensor(x, rng)
        got, _ = sim_open(lambda rt, a: rt.open_bits(primitives.a2b(rt, a)), [(s,) for s in xs])
        assert np.array_equal(got, x)


class TestComparisons:
    def test_lt_examples(self):
        rng = np.random.default_rng(16)
        a = ENC(np.array([3.0, 5.0, -4.1]))
        b = ENC(np.array([5.0, 5.0, -4.0]))
        xs, ys = share_tensor(a, rng), share_tensor(b, rng)
        got, _ = sim_open(lambda rt, u, v: rt.open_bits(primitives.lt(rt, u, v)), list(zip(xs, ys)))
        assert got.tolist() == [1, 0, 1]

    def test_lt_random_signed(self):
        rng = np.random.default_rng(17)
        a = rng.uniform(-1000, 1000, 10**4)
        b = rng.uniform(-1000, 1000, 10**4)
        ea, eb = ENC(a), ENC(b)
        xs, ys = share_tensor(ea, rng), share_tensor(eb, rng)
        got, _ = sim_open(lambda rt, u, v: rt.open_bits(primitives.lt(rt, u, v)), list(zip(xs, ys)))
        assert np.array_equal(got, (ea.view(np.int64) < eb.view(np.int64)).astype(np.uint64))

    def test_lt_public_sides(self):
        rng = np.random.default_rng(18)
        v = rng.uniform(-10, 10, 1000)
        ev = ENC(v)
        xs = share_tensor(ev, rng)
        thresh = ENC(np.full(1000, 2.5))

        def prog(rt, x):
            below = rt.open_bits(primitives.lt(rt, x, thresh))
            above = rt.open_bits(primitives.lt(rt, thresh, x))
            return below, above

        res = sim(prog, [(s,) for s in xs])
        below, above = res.outputs[0]
        assert np.array_equal(below, (ev.view(np.int64) < thresh.view(np.int64)).astype(np.uint64))
        assert np.array_equal(above, (thresh.view(np.int64) < ev.view(np.int64)).astype(np.uint64))

    def test_eq_examples(self):
        rng = np.random.default_rng(19)
        xs = share_tensor(np.array([7, 7], dtype=np.uint64), rng)
        ys = share_tensor(np.array([7, 8], dtype=np.uint64), rng)
        got, _ = sim_open(lambda rt, u, v: rt.open_bits(primitives.eq(rt, u, v)), list(zip(xs, ys)))
        assert got.tolist() == [1, 0]

    def test_eq_random(self):
        rng = np.random.default_rng(20)
        a = rng.integers(0, 100, 10**4, dtype=np.uint64)
        b = rng.integers(0, 100, 10**4, dtype=np.uint64)
        xs, ys = share_tensor(a, rng), share_tensor(b, rng)
        got, _ = sim_open(lambda rt, u, v: rt.open_bits(primitives.eq(rt, u, v)), list(zip(xs, ys)))
        assert np.array_equal(got, (a == b).astype(np.uint64))

    def test_trichotomy(self):
        rng = np.random.default_rng(21)
        a = rng.integers(0, 20, 2000, dtype=np.uint64)  # many ties
        b = rng.integers(0, 20, 2000, dtype=np.uint64)
        xs, ys = share_tensor(a, rng), share_tensor(b, rng)

        def prog(rt, u, v):
            return (
                rt.open_bits(primitives.lt(rt, u, v)),
                rt.open_bits(primitives.lt(rt, v, u)),
                rt.open_bits(primitives.eq(rt, u, v)),
            )

        res = sim(prog, list(zip(xs, ys)))
        ltab, ltba, eqab = res.outputs[0]
        assert np.all(ltab + ltba + eqab == 1)


class TestMulBA:
    def test_bit_zero_and_one(self):
        rng = np.random.default_rng(22)
        bits = share_bits(np.array([0, 1], dtype=np.uint64), rng, nbits=1)
        vals = share_tensor(ENC(np.array([2.5, 2.5])), rng)
        got, _ = sim_open(lambda rt, b, x: rt.open_tensor(primitives.mul_ba(rt, b, x)), list(zip(bits, vals)))
        assert int(got[0]) == 0
        assert int(got[1]) == int(enc1(2.5)[0])  # exact, no truncation

    def test_random_select(self):
        rng = np.random.default_rng(23)
        n = 10**4
        b = rng.integers(0, 2, n, dtype=np.uint64)
        v = ENC(rng.uniform(-100, 100, n))
        bs, vs = share_bits(b, rng, nbits=1), share_tensor(v, rng)
        got, _ = sim_open(lambda rt, bb, xx: rt.open_tensor(primitives.mul_ba(rt, bb, xx)), list(zip(bs, vs)))
        assert np.array_equal(got, b * v)

    def test_bit_inject_is_exact(self):
        rng = np.random.default_rng(24)
        b = rng.integers(0, 2, 1000, dtype=np.uint64)
        bs = share_bits(b, rng, nbits=1)
        got, _ = sim_open(lambda rt, bb: rt.open_tensor(primitives.bit_inject(rt, bb)), [(s,) for s in bs])
        assert np.array_equal(got, b)


class TestMaximum:
    def test_small_example(self):
        rng = np.random.default_rng(25)
        xs = share_tensor(ENC(np.array([1.0, 5.0, 3.0])), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.maximum(rt, a)), [(s,) for s in xs])
        assert DEC(got.reshape(1))[0] == 5.0

    def test_all_equal(self):
        rng = np.random.default_rng(26)
        xs = share_tensor(ENC(np.full(9, -2.25)), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.maximum(rt, a)), [(s,) for s in xs])
        assert DEC(got.reshape(1))[0] == -2.25

    def test_empty(self):
        rng = np.random.default_rng(27)
        xs = share_tensor(np.zeros((3, 0), dtype=np.uint64), rng)
        with pytest.raises(ValueError):
            sim(lambda rt, a: primitives.maximum(rt, a), [(s,) for s in xs])

    @pytest.mark.parametrize("length", [2, 3, 16, 97, 256])
    def test_random_vectors(self, length):
        rng = np.random.default_rng(28 + length)
        rows = 1000 // length + 1
        v = rng.uniform(-500, 500, (rows, length))
        ev = ENC(v)
        xs = share_tensor(ev, rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.maximum(rt, a)), [(s,) for s in xs])
        ref = ev.view(np.int64).max(axis=-1).view(np.uint64)
        assert np.array_equal(got, ref)  # exact: the max is an input element


class TestRecip:
    @pytest.mark.parametrize("v,expect", [(2.0, 0.5), (1.0, 1.0), (7.3, 1.0 / 7.3)])
    def test_examples(self, v, expect):
        rng = np.random.default_rng(29)
        xs = share_tensor(enc1(v), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.recip(rt, a)), [(s,) for s in xs])
        assert abs(DEC(got)[0] - expect) <= expect * 2.0**-10

    def test_relative_error_on_interior_domain(self):
        rng = np.random.default_rng(30)
        v = DEC(ENC(np.exp(rng.uniform(np.log(2.0**-9), np.log(64.0), 4000))))
        xs = share_tensor(ENC(v), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.recip(rt, a)), [(s,) for s in xs])
        rel = np.abs(DEC(got) - 1.0 / v) * v
        assert rel.max() <= 2.0**-10

    def test_wide_domain_absolute(self):
        # above ~2^6 the quotient loses the relative contract to output
        # quantization; absolute error stays at a few ulps
        rng = np.random.default_rng(31)
        v = DEC(ENC(np.exp(rng.uniform(np.log(64.0), np.log(2.0**18 * 0.99), 2000))))
        xs = share_tensor(ENC(v), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.recip(rt, a)), [(s,) for s in xs])
        assert np.abs(DEC(got) - 1.0 / v).max() <= 4 * 2.0**-18


class TestRsqrt:
    @pytest.mark.parametrize("v,expect", [(4.0, 0.5), (1.0, 1.0), (10.0, 10.0**-0.5)])
    def test_examples(self, v, expect):
        rng = np.random.default_rng(32)
        xs = share_tensor(enc1(v), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.rsqrt(rt, a)), [(s,) for s in xs])
        assert abs(DEC(got)[0] - expect) <= expect * 2.0**-9

    def test_relative_error_on_domain(self):
        rng = np.random.default_rng(33)
        v = DEC(ENC(np.exp(rng.uniform(np.log(2.0**-6), np.log(2.0**12), 4000))))
        xs = share_tensor(ENC(v), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.rsqrt(rt, a)), [(s,) for s in xs])
        ref = v**-0.5
        assert (np.abs(DEC(got) - ref) / ref).max() <= 2.0**-9


class TestNegExp:
    def test_clip_below_threshold(self):
        rng = np.random.default_rng(34)
        xs = share_tensor(enc1(-15.0), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.neg_exp(rt, a)), [(s,) for s in xs])
        assert int(got[0]) == 0  # exactly zero

    def test_at_zero(self):
        rng = np.random.default_rng(35)
        xs = share_tensor(enc1(0.0), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.neg_exp(rt, a)), [(s,) for s in xs])
        assert abs(DEC(got)[0] - 1.0) <= 2.0**-10

    def test_minus_one_against_formula(self):
        rng = np.random.default_rng(36)
        xs = share_tensor(enc1(-1.0), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.neg_exp(rt, a)), [(s,) for s in xs])
        assert abs(DEC(got)[0] - (1 - 1 / 32.0) ** 32) <= 2.0**-10

    def test_formula_on_range(self):
        from trishare.oracle import neg_exp_ref

        rng = np.random.default_rng(37)
        v = DEC(ENC(rng.uniform(-16, 0, 4000)))
        xs = share_tensor(ENC(v), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.neg_exp(rt, a)), [(s,) for s in xs])
        assert np.abs(DEC(got) - neg_exp_ref(v, t=5)).max() <= 2.0**-10

    def test_monotonicity_on_grid(self):
        rng = np.random.default_rng(38)
        grid = DEC(ENC(np.sort(rng.uniform(-14, 0, 512))))
        keep = np.concatenate([[True], np.diff(grid) >= 2.0**-8])
        grid = grid[keep]
        xs = share_tensor(ENC(grid), rng)
        got, _ = sim_open(lambda rt, a: rt.open_tensor(primitives.neg_exp(rt, a)), [(s,) for s in xs])
        out = DEC(got)
        assert np.all(out[:-1] <= out[1:] + 2.0**-15)


class TestCommunication:
    def test_costs_match_model(self):
        rng = np.random.default_rng(39)
        n = 257

        cases = {
            "mul": (
                lambda rt, a, b: primitives.mul(rt, a, b),
                lambda: list(zip(share_tensor(rng.integers(0, 9, n, dtype=np.uint64), rng),
                                 share_tensor(rng.integers(0, 9, n, dtype=np.uint64), rng))),
                comm_model.mul_cost(n),
            ),
            "square": (
                lambda rt, a: primitives.square(rt, a),
                lambda: [(s,) for s in share_tensor(rng.integers(0, 9, n, dtype=np.uint64), rng)],
                comm_model.square_cost(n),
            ),
            "trunc": (
                lambda rt, a: primitives.trunc(rt, a, 18),
                lambda: [(s,) for s in share_tensor(rng.integers(0, 9, n, dtype=np.uint64), rng)],
                comm_model.trunc_cost(n),
            ),
            "a2b": (
                lambda rt, a: primitives.a2b(rt, a),
                lambda: [(s,) for s in share_tensor(rng.integers(0, 9, n, dtype=np.uint64), rng)],
                comm_model.a2b_cost(n),
            ),
            "eq": (
                lambda rt, a, b: primitives.eq(rt, a, b),
                lambda: list(zip(share_tensor(rng.integers(0, 9, n, dtype=np.uint64), rng),
                                 share_tensor(rng.integers(0, 9, n, dtype=np.uint64), rng))),
                comm_model.eq_cost(n),
            ),
            "mul_ba": (
                lambda rt, b, x: primitives.mul_ba(rt, b, x),
                lambda: list(zip(share_bits(rng.integers(0, 2, n, dtype=np.uint64), rng, nbits=1),
                                 share_tensor(rng.integers(0, 9, n, dtype=np.uint64), rng))),
                comm_model.mul_ba_cost(n),
            ),
            "recip": (
                lambda rt, a: primitives.recip(rt, a),
                lambda: [(s,) for s in share_tensor(ENC(np.full(n, 3.0)), rng)],
                comm_model.recip_cost(n),
            ),
            "rsqrt": (
                lambda rt, a: primitives.rsqrt(rt, a),
                lambda: [(s,) for s in share_tensor(ENC(np.full(n, 3.0)), rng)],
                comm_model.rsqrt_cost(n),
            ),
            "neg_exp": (
                lambda rt, a: primitives.neg_exp(rt, a),
                lambda: [(s,) for s in share_tensor(ENC(np.full(n, -1.0)), rng)],
                comm_model.neg_exp_cost(n, t=5),
            ),
        }
        for name, (prog, make_args, expect) in cases.items():
            res = sim(prog, make_args())
            got = [s.bytes_sent for s in res.stats]
            assert got == list(expect), f"{name}: measured {got}, model {list(expect)}"

    def test_maximum_cost(self):
        rng = np.random.default_rng(40)
        rows, length = 11, 13
        xs = share_tensor(rng.integers(0, 99, (rows, length), dtype=np.uint64), rng)
        res = sim(lambda rt, a: primitives.maximum(rt, a), [(s,) for s in xs])
        assert [s.bytes_sent for s in res.stats] == list(comm_model.maximum_cost(rows, length))

    def test_bytes_independent_of_values(self):
        rng = np.random.default_rng(41)
        shapes_stats = []
        for vals in (np.zeros(100), np.full(100, 3.75), rng.uniform(-9, 9, 100)):
            xs = share_tensor(ENC(vals), rng)
            res = sim(lambda rt, a: primitives.neg_exp(rt, a), [(s,) for s in xs])
            shapes_stats.append([(s.bytes_sent, s.messages, s.rounds) for s in res.stats])
        assert shapes_stats[0] == shapes_stats[1] == shapes_stats[2]

    def test_mul_single_round(self):
        rng = np.random.default_rng(42)
        xs = share_tensor(np.arange(50, dtype=np.uint64), rng)
        ys = share_tensor(np.arange(50, dtype=np.uint64), rng)
        res = sim(lambda rt, a, b: primitives.mul(rt, a, b), list(zip(xs, ys)))
        assert all(s.rounds == 1 for s in res.stats)
        assert all(s.bytes_sent == 8 * 50 for s in res.stats)
