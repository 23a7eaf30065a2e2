"""Secure GeLU, softmax, LayerNorm and embedding lookup.

GeLU evaluates a four-segment piecewise polynomial with the segment choice
made by secure comparisons; softmax shifts by the secure row maximum and
exponentiates with the clipped-Taylor chain, spending one reciprocal per
row; LayerNorm centers, sums squares and broadcasts one inverse square
root; the embedding builds a secret one-hot row with equality tests so no
truncation error touches table entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .primitives import (
    _neg_exp_core,
    bit_inject,
    eq,
    lt,
    matmul,
    maximum,
    msb,
    mul_ba,
    mul_fixed,
    mul_public_fixed,
    square_fixed,
    trunc,
)
from .ring import (
    ArithShare,
    SharedTensor,
    add_public,
    bool_stack,
    stack,
    u64,
    xor_public,
)
from .runtime import PartyRuntime


@dataclass(frozen=True)
class GeluConstants:
    """Piecewise approximation: 0 | cubic | even sextic + x/2 | identity."""

    breakpoints: tuple = (-4.0, -1.95, 3.0)
    # descending powers x^3..x^0
    f0_coeffs: tuple = (
        -0.011034134030615728,
        -0.11807612951181953,
        -0.42226581151983866,
        -0.5054031199708174,
    )
    # powers x^6, x^4, x^2, x, 1
    f1_coeffs: tuple = (
        0.0018067462606141187,
        -0.037688200365904236,
        0.3603292692789629,
        0.5,
        0.008526321541038084,
    )


@dataclass(frozen=True)
class SoftmaxConstants:
    """epsilon is one fixed-point ulp (10^-6 underflows at 18 fractional
    bits); taylor_iters = 10 keeps the clipped-Taylor exponential within
    2^-9 of true softmax on adversarial rows; exp(clip) < 2^-18."""

    epsilon_ulps: int = 1
    taylor_iters: int = 10
    clip: float = -14.0


GELU = GeluConstants()
SOFTMAX = SoftmaxConstants()

# extra fractional bits on public polynomial coefficients; the x^6 term at
# |x|=3 needs coefficient quantization below 2^-10 without breaking the
# truncation wrap margin
_POLY_COEFF_BITS = 4


def _poly_fixed(rt: PartyRuntime, terms, const: float) -> SharedTensor:
    """sum(c_k * X_k) + const with one truncation at the end.

    Coefficients carry frac_bits + _POLY_COEFF_BITS fractional bits so the
    single truncation returns the sum to working precision.
    """
    fc = rt.frac_bits + _POLY_COEFF_BITS
    acc = None
    for xk, c in terms:
        t = xk.scale_int(round(c * 2.0**fc))
        acc = t if acc is None else acc + t
    acc = add_public(rt.party, acc, u64(round(const * 2.0 ** (rt.frac_bits + fc))))
    return trunc(rt, acc, fc)


def secure_gelu(rt: PartyRuntime, x: SharedTensor, constants: GeluConstants = GELU) -> SharedTensor:
    """Piecewise-polynomial GeLU on shared fixed-point inputs.

    Interval bits: b0 = 1{x<-4}, b1 = 1{x<-1.95}, b2 = 1{3<x}; the segment
    selectors z0 = b0^b1, z1 = b1^b2^1, z2 = b2 pick the cubic, the sextic
    or the identity; everything below -4 falls through to zero.
    """
    enc = rt.codec.encode
    bp = [np.uint64(enc(b).value) for b in constants.breakpoints]
    shape = x.shape

    # all three comparisons ride one stacked msb evaluation
    d0 = add_public(rt.party, x, np.negative(np.full(shape, bp[0], dtype=np.uint64)))
    d1 = add_public(rt.party, x, np.negative(np.full(shape, bp[1], dtype=np.uint64)))
    d2 = add_public(rt.party, -x, np.full(shape, bp[2], dtype=np.uint64))
    bits = msb(rt, stack([d0, d1, d2]))
    b0 = bits[0]
    b1 = bits[1]
    b2 = bits[2]

    z0 = b0 ^ b1
    z1 = xor_public(rt.party, b1 ^ b2, 1)
    z2 = b2

    x2 = square_fixed(rt, x)
    x3 = mul_fixed(rt, x, x2)
    x46 = square_fixed(rt, stack([x2, x3]))  # one round for both powers
    x4 = x46[0]
    x6 = x46[1]

    c3, c2, c1, c0 = constants.f0_coeffs
    f0 = _poly_fixed(rt, [(x3, c3), (x2, c2), (x, c1)], c0)
    e6, e4, e2, e1, e0 = constants.f1_coeffs
    f1 = _poly_fixed(rt, [(x6, e6), (x4, e4), (x2, e2), (x, e1)], e0)

    sel = bool_stack([z0, z1, z2])
    branches = stack([f0, f1, x])
    picked = mul_ba(rt, sel, branches)
    return picked[0] + picked[1] + picked[2]


def secure_softmax(rt: PartyRuntime, x: SharedTensor, constants: SoftmaxConstants = SOFTMAX) -> SharedTensor:
    """Row softmax (last axis): shift by the secure max, clipped-Taylor
    exponential, one reciprocal per row broadcast over the entries."""
    if x.shape[-1] == 0:
        raise ValueError("softmax over an empty row")
    from .primitives import recip

    m = maximum(rt, x)
    mb = m.reshape(*m.shape, 1)
    xh = add_public(rt.party, x - mb, u64(-constants.epsilon_ulps))

    clip = np.full(xh.shape, np.uint64(rt.codec.encode(constants.clip).value), dtype=np.uint64)
    b = lt(rt, clip, xh)

    z = _neg_exp_core(rt, xh, constants.taylor_iters)
    s = z.sum(axis=-1)
    r = recip(rt, s)
    out = mul_fixed(rt, z, r.reshape(*r.shape, 1))
    return mul_ba(rt, b, out)


def secure_layernorm(
    rt: PartyRuntime,
    x: SharedTensor,
    gamma: SharedTensor,
    beta: SharedTensor,
    mode: str = "standard",
    eps: float = 1e-5,
) -> SharedTensor:
    """LayerNorm over the last axis.

    mode="paper" normalizes by rsqrt of the raw squared-deviation sum;
    mode="standard" uses the variance (sum/n) plus eps, which is what
    pre-trained plaintext models expect.
    """
    n = x.shape[-1]
    if n < 2:
        raise ValueError("layernorm needs rows of length >= 2")
    from .primitives import rsqrt

    mu = mul_public_fixed(rt, x.sum(axis=-1), 1.0 / n)
    d = x - mu.reshape(*mu.shape, 1)
    sigma = square_fixed(rt, d).sum(axis=-1)
    if mode == "paper":
        s = rsqrt(rt, sigma)
    elif mode == "standard":
        var = mul_public_fixed(rt, sigma, 1.0 / n)
        var = add_public(rt.party, var, np.uint64(rt.codec.encode(eps).value))
        s = rsqrt(rt, var)
    else:
        raise ValueError(f"unknown layernorm mode {mode!r}")
    c = mul_fixed(rt, d, s.reshape(*s.shape, 1))
    return mul_fixed(rt, gamma, c) + beta


def secure_embedding(rt: PartyRuntime, ids, table: SharedTensor) -> SharedTensor:
    """Select table rows by secret integer ids (no truncation, exact).

    ids holds raw ring integers: an (s,) SharedTensor, or a scalar
    ArithShare for a single lookup; table is (n, d). One-hot bits
    o[i] = eq(i, id) weight an injected 0/1 matrix that multiplies the
    table; out-of-range ids yield the zero vector.
    """
    scalar = isinstance(ids, ArithShare)
    if scalar:
        ids = SharedTensor(
            np.array([ids.lo.value], dtype=np.uint64), np.array([ids.hi.value], dtype=np.uint64)
        )
    n = table.shape[0]
    iota = np.arange(n, dtype=np.uint64)
    onehot = eq(rt, iota[None, :], ids.reshape(-1, 1))  # (s, n) bits
    inj = bit_inject(rt, onehot)
    out = matmul(rt, inj, table)  # (s, d), products of 0/1 with raw entries
    return out[0] if scalar else out
