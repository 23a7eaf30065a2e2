"""Interactive protocols over replicated shares.

Multiplication-style protocols compute the local cross terms, mask them with
a fresh zero-share and reshare by sending to the previous party (one round,
8 bytes per element per party). Comparisons convert to boolean sharing with
a Kogge-Stone prefix adder; truncation is probabilistic (share-local shifts,
one masked component forwarded by party 0). Reciprocal and inverse square
root normalize the operand into a small interval using the secretly-selected
bit length, then run Goldschmidt / Newton iterations in fixed point.

All byte counts depend only on input shapes, never on values.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend
from .ring import (
    MASK64,
    BoolShare,
    SharedTensor,
    add_public,
    arith_rshift,
    concat,
    u64,
    u64_array,
    xor_public,
)
from .runtime import PartyRuntime

# clipped-Taylor exponential: e^x ~ (1 + x/2^t)^(2^t) on [T_EXP, 0], 0 below
NEG_EXP_T = 5
NEG_EXP_CLIP = -14.0

# bit-length windows implied by the stated operand domains
RECIP_MSB_WINDOW = (9, 36)  # decode(x) in [2^-9, 2^18]
RSQRT_MSB_WINDOW = (8, 38)  # decode(x) in [2^-10, 2^20]

_GOLDSCHMIDT_ITERS = 4
_NEWTON_RSQRT_ITERS = 3


def _zeros(shape) -> np.ndarray:
    return np.zeros(shape, dtype=np.uint64)


def _reshare(rt: PartyRuntime, z_local: np.ndarray) -> SharedTensor:
    """Randomize a 3-of-3 additive result back into replicated form."""
    z = z_local + rt.zero_share(z_local.shape)
    rt.send_u64(rt.prev, z)
    w = rt.recv_u64(rt.next, z.shape)
    return SharedTensor(z, w)


def mul(rt: PartyRuntime, x: SharedTensor, y: SharedTensor) -> SharedTensor:
    """Elementwise ring product (no truncation); broadcasts like numpy."""
    if x.shape != y.shape:
        shape = np.broadcast_shapes(x.shape, y.shape)
        x = SharedTensor(np.broadcast_to(x.lo, shape).copy(), np.broadcast_to(x.hi, shape).copy())
        y = SharedTensor(np.broadcast_to(y.lo, shape).copy(), np.broadcast_to(y.hi, shape).copy())
    z = backend.rep_mul(x.lo, x.hi, y.lo, y.hi)
    return _reshare(rt, z)


def square(rt: PartyRuntime, x: SharedTensor) -> SharedTensor:
    """Ring square using the one-operand pattern (x_i^2 + 2 x_i x_{i+1})."""
    return _reshare(rt, backend.rep_square(x.lo, x.hi))


def matmul(rt: PartyRuntime, a: SharedTensor, b: SharedTensor) -> SharedTensor:
    """Ring matrix product (m,k)@(k,n), reshared once, no truncation."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"inner-dimension mismatch: {a.shape} @ {b.shape}")
    z = backend.rep_matmul(a.lo, a.hi, b.lo, b.hi)
    return _reshare(rt, z)


def trunc(rt: PartyRuntime, x: SharedTensor, f: int | None = None) -> SharedTensor:
    """Probabilistic right-shift by f bits: reconstructs to floor(x/2^f) +- 1.

    Party 0 shifts (x0+x1), parties 1/2 shift x2; the wrap failure
    probability is ~|x|/2^63, so callers keep |x| below 2^(62-s). Party 0
    forwards its masked component to party 2 (the only message).
    """
    if f is None:
        f = rt.frac_bits
    if f == 0:
        return SharedTensor(x.lo.copy(), x.hi.copy())
    # half-ulp bias on both halves centers the floor error, so exact
    # multiples of 2^f (e.g. zero) truncate exactly
    half = np.uint64(1 << (f - 1))
    p = rt.party
    if p == 0:
        u = arith_rshift(x.lo + x.hi + half, f)
        r = rt.edge_rand(0, x.shape)
        y0 = u - r
        rt.send_u64(2, y0)
        return SharedTensor(y0, r)
    if p == 1:
        r = rt.edge_rand(0, x.shape)
        return SharedTensor(r, arith_rshift(x.hi + half, f))
    y0 = rt.recv_u64(0, x.shape)
    return SharedTensor(arith_rshift(x.lo + half, f), y0)


def mul_trunc(rt: PartyRuntime, x: SharedTensor, y: SharedTensor, f: int | None = None) -> SharedTensor:
    return trunc(rt, mul(rt, x, y), f)


def mul_fixed(rt: PartyRuntime, x: SharedTensor, y: SharedTensor) -> SharedTensor:
    """Fixed-point product: ring multiply then truncate frac_bits."""
    return trunc(rt, mul(rt, x, y), rt.frac_bits)


def square_fixed(rt: PartyRuntime, x: SharedTensor) -> SharedTensor:
    return trunc(rt, square(rt, x), rt.frac_bits)


def mul_public_fixed(rt: PartyRuntime, x: SharedTensor, c: float) -> SharedTensor:
    """Multiply by a public real constant (local scale + one truncation)."""
    return trunc(rt, x.scale_int(int(rt.codec.encode(c).value)), rt.frac_bits)


# ---------------------------------------------------------------------------
# Boolean world: AND, prefix adder, conversions
# ---------------------------------------------------------------------------


def and_bits(rt: PartyRuntime, x: BoolShare, y: BoolShare) -> BoolShare:
    """Secure AND on packed words (1 round, one word per element)."""
    a = rt.zero_share_bits(x.shape)
    z = (x.lo & y.lo) ^ (x.lo & y.hi) ^ (x.hi & y.lo) ^ a
    if x.nbits == 1:
        z &= u64(1)
    rt.send_bits(rt.prev, z, x.nbits)
    w = rt.recv_bits(rt.next, z.shape, x.nbits)
    return BoolShare(z, w, x.nbits)


_KEEP_MASKS = [(1 << (1 << i)) - 1 for i in range(6)]


def _ppa64(rt: PartyRuntime, a: BoolShare, b: BoolShare) -> BoolShare:
    """Kogge-Stone parallel-prefix adder on 64-bit packed operands.

    One initial AND plus six levels with the two per-level ANDs stacked into
    a single call, so the whole adder costs seven rounds.
    """
    g = and_bits(rt, a, b)
    p = a ^ b
    for i in range(6):
        d = 1 << i
        g1 = g.shift_left(d)
        p1 = xor_public(rt.party, p.shift_left(d), _KEEP_MASKS[i])
        lhs = BoolShare(np.stack([p.lo, p.lo]), np.stack([p.hi, p.hi]))
        rhs = BoolShare(np.stack([g1.lo, p1.lo]), np.stack([g1.hi, p1.hi]))
        both = and_bits(rt, lhs, rhs)
        g = g ^ BoolShare(both.lo[0], both.hi[0])
        p = BoolShare(both.lo[1], both.hi[1])
    carry = g.shift_left(1)
    return a ^ b ^ carry


def a2b(rt: PartyRuntime, x: SharedTensor) -> BoolShare:
    """Boolean shares of the 64-bit binary decomposition of x.

    Party 0 boolean-shares w = x0+x1 (one masked word to party 2); x2 is
    boolean-shared for free from the replicated layout. A prefix adder then
    produces bits of w + x2 = x.
    """
    p = rt.party
    shape = x.shape
    zero = _zeros(shape)
    if p == 0:
        w = x.lo + x.hi
        r = rt.edge_rand(0, shape)
        c = w ^ r
        rt.send_u64(2, c)
        op1 = BoolShare(c, r)
        op2 = BoolShare(zero, zero.copy())
    elif p == 1:
        r = rt.edge_rand(0, shape)
        op1 = BoolShare(r, zero)
        op2 = BoolShare(zero.copy(), x.hi)
    else:
        c = rt.recv_u64(0, shape)
        op1 = BoolShare(zero, c)
        op2 = BoolShare(x.lo, zero.copy())
    return _ppa64(rt, op1, op2)


def msb(rt: PartyRuntime, x: SharedTensor) -> BoolShare:
    bits = a2b(rt, x)
    one = u64(1)
    return BoolShare((bits.lo >> np.uint64(63)) & one, (bits.hi >> np.uint64(63)) & one, nbits=1)


def _as_diff(rt: PartyRuntime, x, y) -> SharedTensor:
    """Share of x - y where either side may be a public ring tensor."""
    xs = isinstance(x, SharedTensor)
    ys = isinstance(y, SharedTensor)
    if xs and ys:
        if x.shape != y.shape:
            shape = np.broadcast_shapes(x.shape, y.shape)
            x = SharedTensor(np.broadcast_to(x.lo, shape), np.broadcast_to(x.hi, shape))
            y = SharedTensor(np.broadcast_to(y.lo, shape), np.broadcast_to(y.hi, shape))
        return x - y
    if xs:
        shape = np.broadcast_shapes(x.shape, np.asarray(y).shape)
        c = np.broadcast_to(u64_array(np.asarray(y)), shape)
        x = SharedTensor(np.broadcast_to(x.lo, shape).copy(), np.broadcast_to(x.hi, shape).copy())
        return add_public(rt.party, x, np.negative(c.copy()))
    if ys:
        shape = np.broadcast_shapes(np.asarray(x).shape, y.shape)
        c = np.broadcast_to(u64_array(np.asarray(x)), shape).copy()
        y = SharedTensor(np.broadcast_to(y.lo, shape).copy(), np.broadcast_to(y.hi, shape).copy())
        return add_public(rt.party, -y, c)
    raise TypeError("at least one operand must be shared")


def lt(rt: PartyRuntime, x, y) -> BoolShare:
    """1{x < y} on signed ring values; public sides are uint64 ring tensors."""
    return msb(rt, _as_diff(rt, x, y))


def eq(rt: PartyRuntime, x, y) -> BoolShare:
    """1{x == y}: NOT-OR over the bits of x-y via a log-depth AND fold."""
    d = _as_diff(rt, x, y)
    p = rt.party
    shape = d.shape
    zero = _zeros(shape)
    if p == 0:
        w = d.lo + d.hi
        r = rt.edge_rand(0, shape)
        c = w ^ r
        rt.send_u64(2, c)
        wb = BoolShare(c, r)
        ub = BoolShare(zero, zero.copy())
    elif p == 1:
        r = rt.edge_rand(0, shape)
        wb = BoolShare(r, zero)
        ub = BoolShare(zero.copy(), np.negative(d.hi))
    else:
        c = rt.recv_u64(0, shape)
        wb = BoolShare(zero, c)
        ub = BoolShare(np.negative(d.lo), zero.copy())
    # x == y  iff  (d0+d1) == -d2  iff  all bits of w XOR u vanish
    z = xor_public(rt.party, wb ^ ub, MASK64)
    for shift in (32, 16, 8, 4, 2, 1):
        z = and_bits(rt, z, z.shift_right(shift))
    one = u64(1)
    return BoolShare(z.lo & one, z.hi & one, nbits=1)


def bit_inject(rt: PartyRuntime, b: BoolShare) -> SharedTensor:
    """Arithmetic 0/1 share of a boolean bit: b0 XOR b1 XOR b2 expanded
    with two sequential ring multiplications."""
    zero = _zeros(b.shape)
    one = u64(1)
    blo = b.lo & one
    bhi = b.hi & one
    p = rt.party
    if p == 0:
        a0 = SharedTensor(blo, zero)
        a1 = SharedTensor(zero, bhi)
        a2 = SharedTensor(zero, zero)
    elif p == 1:
        a0 = SharedTensor(zero, zero)
        a1 = SharedTensor(blo, zero)
        a2 = SharedTensor(zero, bhi)
    else:
        a0 = SharedTensor(zero, bhi)
        a1 = SharedTensor(zero, zero)
        a2 = SharedTensor(blo, zero)
    s = a0 + a1 - mul(rt, a0, a1).scale_int(2)
    return s + a2 - mul(rt, s, a2).scale_int(2)


def mul_ba(rt: PartyRuntime, b: BoolShare, x: SharedTensor) -> SharedTensor:
    """b * x exactly (bit times ring value, no truncation)."""
    return mul(rt, bit_inject(rt, b), x)


def maximum(rt: PartyRuntime, x: SharedTensor) -> SharedTensor:
    """Maximum over the last axis by a comparison tournament; exact."""
    length = x.shape[-1]
    if length == 0:
        raise ValueError("maximum over an empty vector")
    cur = x
    while cur.shape[-1] > 1:
        n = cur.shape[-1]
        half = n // 2
        a = cur[..., :half]
        b = cur[..., half : 2 * half]
        c = lt(rt, a, b)
        m = a + mul_ba(rt, c, b - a)
        if n % 2:
            m = concat([m, cur[..., 2 * half :]], axis=-1)
        cur = m
    return cur[..., 0]


# ---------------------------------------------------------------------------
# Bit-length normalization machinery (recip / rsqrt)
# ---------------------------------------------------------------------------


def _msb_onehot_window(rt: PartyRuntime, x: SharedTensor, lo_bit: int, hi_bit: int):
    """One-hot single-bit shares over bit positions [lo_bit, hi_bit].

    Runs a suffix-OR (from the high end) over the masked window of a2b(x)
    and differences adjacent positions. Returns (onehot, positions).
    """
    width = hi_bit - lo_bit + 1
    window = ((1 << (hi_bit + 1)) - 1) ^ ((1 << lo_bit) - 1)
    bits = a2b(rt, x).mask(window)
    p = bits
    d = 1
    for _ in range(math.ceil(math.log2(width))):
        shifted = p.shift_right(d)
        # OR(a, b) = a ^ b ^ (a & b)
        p = p ^ shifted ^ and_bits(rt, p, shifted)
        d <<= 1
    h = (p ^ p.shift_right(1)).mask(window)
    positions = np.arange(lo_bit, hi_bit + 1, dtype=np.uint64)
    one = u64(1)
    h_lo = (h.lo[..., None] >> positions) & one
    h_hi = (h.hi[..., None] >> positions) & one
    return BoolShare(h_lo, h_hi, nbits=1), positions


def _weighted_sum(inj: SharedTensor, weights: np.ndarray) -> SharedTensor:
    """Combine injected one-hot bits with public per-position ring weights."""
    return SharedTensor(inj.lo * weights, inj.hi * weights).sum(axis=-1)


def recip(rt: PartyRuntime, x: SharedTensor) -> SharedTensor:
    """1/x for decode(x) in [2^-9, 2^18] (relative error ~2^-10 where the
    quotient is representable). Normalizes into [0.5, 1) via the one-hot
    bit length, then runs Goldschmidt iterations."""
    lo_bit, hi_bit = RECIP_MSB_WINDOW
    onehot, positions = _msb_onehot_window(rt, x, lo_bit, hi_bit)
    weights = np.uint64(1) << (np.uint64(hi_bit) - positions)  # 2^(36-j)
    s = _weighted_sum(bit_inject(rt, onehot), weights)
    v = trunc(rt, mul(rt, x, s), hi_bit - rt.frac_bits + 1)  # v in [0.5, 1)
    enc = rt.codec.encode
    w = add_public(rt.party, -v.scale_int(2), np.uint64(enc(2.9142).value))
    e = add_public(rt.party, -mul_fixed(rt, v, w), np.uint64(enc(1.0).value))
    one = np.uint64(enc(1.0).value)
    for i in range(_GOLDSCHMIDT_ITERS):
        w = mul_fixed(rt, w, add_public(rt.party, e, one))
        if i < _GOLDSCHMIDT_ITERS - 1:
            e = square_fixed(rt, e)
    return trunc(rt, mul(rt, w, s), hi_bit - rt.frac_bits + 1)


def rsqrt(rt: PartyRuntime, x: SharedTensor) -> SharedTensor:
    """x^(-1/2) for decode(x) in [2^-10, 2^20] (relative error ~2^-9 where
    representable). Normalizes into [1, 2), runs Newton iterations
    y <- y(3 - v y^2)/2, and rescales by the multiplexed half-exponent."""
    lo_bit, hi_bit = RSQRT_MSB_WINDOW
    f = rt.frac_bits
    onehot, positions = _msb_onehot_window(rt, x, lo_bit, hi_bit)
    norm_w = np.uint64(1) << (np.uint64(hi_bit) - positions)  # 2^(38-j)
    # rescale weight per msb j: 2^f * 2^(-(j-f)/2), odd exponents via sqrt(2)
    k = positions.astype(np.float64) - f
    scale_w = np.array([u64(round(2.0**f * 2.0 ** (-kk / 2.0))) for kk in k], dtype=np.uint64)

    inj = bit_inject(rt, onehot)
    s_norm = _weighted_sum(inj, norm_w)
    c_scale = _weighted_sum(inj, scale_w)
    v = trunc(rt, mul(rt, x, s_norm), hi_bit - f)  # v in [1, 2)

    enc = rt.codec.encode
    y = add_public(rt.party, SharedTensor(_zeros(v.shape), _zeros(v.shape)), np.uint64(enc(2.0**-0.25).value))
    three = np.uint64(enc(3.0).value)
    for _ in range(_NEWTON_RSQRT_ITERS):
        t = square_fixed(rt, y)
        u = mul_fixed(rt, v, t)
        y = trunc(rt, mul(rt, y, add_public(rt.party, -u, three)), f + 1)  # y(3-vy^2)/2
    return mul_fixed(rt, y, c_scale)


# ---------------------------------------------------------------------------
# Clipped-Taylor negative exponential
# ---------------------------------------------------------------------------


def _neg_exp_core(rt: PartyRuntime, x: SharedTensor, t: int) -> SharedTensor:
    """(1 + x/2^t)^(2^t) for shared x <= 0, without the clip.

    The squaring chain runs at an internal precision above frac_bits
    (values stay in [0, 1], so headroom buys accuracy); for long chains the
    precision caps at 21 bits to keep the truncation wrap probability per
    square at 2^-22, which large batches can tolerate.
    """
    f = rt.frac_bits
    internal = 23 if f + t <= 23 else 21
    shift = f + t - internal  # x at f bits == x/2^t at f+t bits
    z = trunc(rt, x, shift) if shift > 0 else x
    z = add_public(rt.party, z, np.uint64(1) << np.uint64(internal))
    for _ in range(t):
        z = trunc(rt, square(rt, z), internal)
    return trunc(rt, z, internal - f)


def neg_exp(rt: PartyRuntime, x: SharedTensor, t: int = NEG_EXP_T) -> SharedTensor:
    """Clipped exp for non-positive inputs: 0 below the clip threshold."""
    z = _neg_exp_core(rt, x, t)
    clip = u64_array(np.full(x.shape, int(rt.codec.encode(NEG_EXP_CLIP).value), dtype=np.uint64))
    b = lt(rt, clip, x)
    return mul_ba(rt, b, z)
