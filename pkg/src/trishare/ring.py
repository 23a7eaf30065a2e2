"""Ring arithmetic modulo 2^64, fixed-point encoding and local share algebra.

Everything in this module is communication-free. Values live in Z_{2^64}
(numpy uint64 arrays, or ``RingElem`` for scalars) and reals are carried as
fixed-point integers with ``FRAC_BITS`` fractional bits. A secret x is split
into three additive components x0 + x1 + x2 = x; party i holds the replicated
pair (x_i, x_{i+1}) with indices mod 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RING_BITS = 64
MASK64 = (1 << 64) - 1
FRAC_BITS = 18
MAX_MAGNITUDE = float(2**20)

_SCALE = float(1 << FRAC_BITS)


class ShareConsistencyError(ValueError):
    """Replicated share components that should agree do not."""


class MagnitudeOverflowError(OverflowError):
    """Plaintext out of the representable fixed-point range."""


def u64(x) -> np.uint64:
    """Coerce a python int (any sign) into the ring."""
    return np.uint64(int(x) & MASK64)


def u64_array(values) -> np.ndarray:
    a = np.asarray(values)
    if a.dtype == np.uint64:
        return a
    if np.issubdtype(a.dtype, np.integer):
        return a.astype(np.int64).view(np.uint64) if a.dtype.kind == "i" else a.astype(np.uint64)
    return np.array([int(v) & MASK64 for v in a.reshape(-1)], dtype=np.uint64).reshape(a.shape)


def to_signed(a: np.ndarray) -> np.ndarray:
    """Reinterpret ring residues as two's-complement signed integers."""
    return a.view(np.int64) if isinstance(a, np.ndarray) else np.uint64(a).reshape(1).view(np.int64)[0]


def arith_rshift(a: np.ndarray, f: int) -> np.ndarray:
    """Signed (arithmetic) right shift of ring values."""
    return (a.view(np.int64) >> np.int64(f)).view(np.uint64)


class RingElem:
    """Immutable element of Z_{2^64}."""

    __slots__ = ("value",)

    def __init__(self, value: int):
        object.__setattr__(self, "value", int(value) & MASK64)

    def __setattr__(self, *a):
        raise AttributeError("RingElem is immutable")

    def __add__(self, other: "RingElem") -> "RingElem":
        return RingElem(self.value + other.value)

    def __sub__(self, other: "RingElem") -> "RingElem":
        return RingElem(self.value - other.value)

    def __mul__(self, other: "RingElem") -> "RingElem":
        return RingElem(self.value * other.value)

    def __neg__(self) -> "RingElem":
        return RingElem(-self.value)

    def __eq__(self, other) -> bool:
        return isinstance(other, RingElem) and self.value == other.value

    def __hash__(self) -> int:
        return hash(self.value)

    def __repr__(self) -> str:
        return f"RingElem({self.value})"

    def signed(self) -> int:
        return self.value - (1 << 64) if self.value >= (1 << 63) else self.value


@dataclass(frozen=True)
class FixedCodec:
    """Fixed-point codec: real v <-> round(v * 2^frac_bits) mod 2^64.

    Rounding is half-away-from-zero; residues >= 2^63 decode as negative.
    """

    frac_bits: int = FRAC_BITS
    max_magnitude: float = MAX_MAGNITUDE

    @property
    def scale(self) -> float:
        return float(1 << self.frac_bits)

    def encode(self, v: float) -> RingElem:
        if not abs(v) < self.max_magnitude:
            raise MagnitudeOverflowError(f"|{v}| >= {self.max_magnitude}")
        s = v * self.scale
        q = int(np.floor(s + 0.5)) if s >= 0 else -int(np.floor(-s + 0.5))
        return RingElem(q)

    def decode(self, r: RingElem) -> float:
        return r.signed() / self.scale

    def encode_array(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if not np.all(np.abs(v) < self.max_magnitude):
            raise MagnitudeOverflowError("input exceeds fixed-point range")
        s = v * self.scale
        q = np.where(s >= 0, np.floor(s + 0.5), -np.floor(-s + 0.5))
        return q.astype(np.int64).view(np.uint64)

    def decode_array(self, r: np.ndarray) -> np.ndarray:
        return r.view(np.int64).astype(np.float64) / self.scale


#: Repo-wide default codec (18 fractional bits).
CODEC = FixedCodec()


@dataclass(frozen=True)
class ArithShare:
    """One party's replicated pair (x_i, x_{i+1}) of a scalar secret."""

    lo: RingElem
    hi: RingElem


class SharedTensor:
    """One party's replicated share pair of a shaped tensor.

    ``lo`` holds this party's x_i components, ``hi`` the x_{i+1} components,
    both uint64 arrays of identical shape in row-major order. Supports the
    local (communication-free) share algebra: share+share add/sub/neg and
    scaling by public ring integers.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: np.ndarray, hi: np.ndarray):
        lo = np.ascontiguousarray(lo, dtype=np.uint64)
        hi = np.ascontiguousarray(hi, dtype=np.uint64)
        if lo.shape != hi.shape:
            raise ValueError(f"component shape mismatch: {lo.shape} vs {hi.shape}")
        self.lo = lo
        self.hi = hi

    @property
    def shape(self) -> tuple:
        return self.lo.shape

    @property
    def size(self) -> int:
        return self.lo.size

    @property
    def ndim(self) -> int:
        return self.lo.ndim

    def __add__(self, other: "SharedTensor") -> "SharedTensor":
        return SharedTensor(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "SharedTensor") -> "SharedTensor":
        return SharedTensor(self.lo - other.lo, self.hi - other.hi)

    def __neg__(self) -> "SharedTensor":
        return SharedTensor(np.negative(self.lo), np.negative(self.hi))

    def scale_int(self, c: int) -> "SharedTensor":
        """Multiply by a public ring integer (local)."""
        c = u64(c)
        return SharedTensor(self.lo * c, self.hi * c)

    def __getitem__(self, idx) -> "SharedTensor":
        return SharedTensor(self.lo[idx], self.hi[idx])

    def reshape(self, *shape) -> "SharedTensor":
        return SharedTensor(self.lo.reshape(*shape), self.hi.reshape(*shape))

    def transpose(self, *axes) -> "SharedTensor":
        return SharedTensor(self.lo.transpose(*axes), self.hi.transpose(*axes))

    @property
    def T(self) -> "SharedTensor":
        return SharedTensor(self.lo.T, self.hi.T)

    def copy(self) -> "SharedTensor":
        return SharedTensor(self.lo.copy(), self.hi.copy())

    def sum(self, axis=None, keepdims=False) -> "SharedTensor":
        return SharedTensor(
            self.lo.sum(axis=axis, keepdims=keepdims, dtype=np.uint64),
            self.hi.sum(axis=axis, keepdims=keepdims, dtype=np.uint64),
        )

    def item(self) -> ArithShare:
        if self.size != 1:
            raise ValueError("item() requires a single-element tensor")
        return ArithShare(RingElem(int(self.lo.reshape(-1)[0])), RingElem(int(self.hi.reshape(-1)[0])))

    def __repr__(self) -> str:
        return f"SharedTensor(shape={self.shape})"


def stack(tensors: list, axis: int = 0) -> SharedTensor:
    return SharedTensor(
        np.stack([t.lo for t in tensors], axis=axis),
        np.stack([t.hi for t in tensors], axis=axis),
    )


def concat(tensors: list, axis: int = 0) -> SharedTensor:
    return SharedTensor(
        np.concatenate([t.lo for t in tensors], axis=axis),
        np.concatenate([t.hi for t in tensors], axis=axis),
    )


class BoolShare:
    """Replicated XOR-sharing of bit vectors, packed into uint64 words.

    With ``nbits == 64`` each word carries the 64-bit binary decomposition of
    one logical element (bit k of the word shares bit k of the value). With
    ``nbits == 1`` each word carries a single 0/1 bit in its LSB.
    """

    __slots__ = ("lo", "hi", "nbits")

    def __init__(self, lo: np.ndarray, hi: np.ndarray, nbits: int = 64):
        lo = np.ascontiguousarray(lo, dtype=np.uint64)
        hi = np.ascontiguousarray(hi, dtype=np.uint64)
        if lo.shape != hi.shape:
            raise ValueError("component shape mismatch")
        self.lo = lo
        self.hi = hi
        self.nbits = nbits

    @property
    def shape(self) -> tuple:
        return self.lo.shape

    @property
    def size(self) -> int:
        return self.lo.size

    def __xor__(self, other: "BoolShare") -> "BoolShare":
        return BoolShare(self.lo ^ other.lo, self.hi ^ other.hi, self.nbits)

    def shift_left(self, k: int) -> "BoolShare":
        k = np.uint64(k)
        return BoolShare(self.lo << k, self.hi << k, self.nbits)

    def shift_right(self, k: int) -> "BoolShare":
        k = np.uint64(k)
        return BoolShare(self.lo >> k, self.hi >> k, self.nbits)

    def mask(self, m: int) -> "BoolShare":
        m = u64(m)
        return BoolShare(self.lo & m, self.hi & m, self.nbits)

    def __getitem__(self, idx) -> "BoolShare":
        return BoolShare(self.lo[idx], self.hi[idx], self.nbits)

    def reshape(self, *shape) -> "BoolShare":
        return BoolShare(self.lo.reshape(*shape), self.hi.reshape(*shape), self.nbits)

    def __repr__(self) -> str:
        return f"BoolShare(shape={self.shape}, nbits={self.nbits})"


def bool_stack(shares: list, axis: int = 0) -> BoolShare:
    return BoolShare(
        np.stack([s.lo for s in shares], axis=axis),
        np.stack([s.hi for s in shares], axis=axis),
        shares[0].nbits,
    )


# ---------------------------------------------------------------------------
# Sharing and reconstruction (harness-side: operates on all three shares)
# ---------------------------------------------------------------------------


def make_shares_from(x: RingElem, x0: RingElem, x1: RingElem) -> tuple:
    """Deterministic split: x2 = x - x0 - x1; party i gets (x_i, x_{i+1})."""
    x2 = x - x0 - x1
    comp = (x0, x1, x2)
    return tuple(ArithShare(comp[i], comp[(i + 1) % 3]) for i in range(3))


def make_shares(x: RingElem, rng: np.random.Generator) -> tuple:
    """Share a scalar with x0, x1 drawn uniformly from the ring."""
    r = rng.integers(0, 1 << 64, size=2, dtype=np.uint64)
    return make_shares_from(x, RingElem(int(r[0])), RingElem(int(r[1])))


def reconstruct(s0: ArithShare, s1: ArithShare, s2: ArithShare) -> RingElem:
    """Recombine three replicated share pairs, validating the overlaps."""
    shares = (s0, s1, s2)
    for i in range(3):
        if shares[i].hi != shares[(i + 1) % 3].lo:
            raise ShareConsistencyError(f"overlap mismatch between party {i} and {(i + 1) % 3}")
    return s0.lo + s1.lo + s2.lo


def share_tensor(values: np.ndarray, rng: np.random.Generator) -> list:
    """Split a uint64 tensor into the three parties' SharedTensors."""
    values = u64_array(values)
    x0 = rng.integers(0, 1 << 64, size=values.shape, dtype=np.uint64)
    x1 = rng.integers(0, 1 << 64, size=values.shape, dtype=np.uint64)
    x2 = values - x0 - x1
    comp = (x0, x1, x2)
    # each party owns its buffers; no cross-party aliasing
    return [SharedTensor(comp[i].copy(), comp[(i + 1) % 3].copy()) for i in range(3)]


def reconstruct_tensor(shares: list) -> np.ndarray:
    for i in range(3):
        if not np.array_equal(shares[i].hi, shares[(i + 1) % 3].lo):
            raise ShareConsistencyError(f"overlap mismatch between party {i} and {(i + 1) % 3}")
    return shares[0].lo + shares[1].lo + shares[2].lo


def share_bits(words: np.ndarray, rng: np.random.Generator, nbits: int = 64) -> list:
    """XOR-split packed bit words into three BoolShares."""
    words = u64_array(words)
    b0 = rng.integers(0, 1 << 64, size=words.shape, dtype=np.uint64)
    b1 = rng.integers(0, 1 << 64, size=words.shape, dtype=np.uint64)
    if nbits < 64:
        m = np.uint64((1 << nbits) - 1)
        b0 &= m
        b1 &= m
    b2 = words ^ b0 ^ b1
    comp = (b0, b1, b2)
    return [BoolShare(comp[i].copy(), comp[(i + 1) % 3].copy(), nbits) for i in range(3)]


def reconstruct_bits(shares: list) -> np.ndarray:
    for i in range(3):
        if not np.array_equal(shares[i].hi, shares[(i + 1) % 3].lo):
            raise ShareConsistencyError(f"overlap mismatch between party {i} and {(i + 1) % 3}")
    return shares[0].lo ^ shares[1].lo ^ shares[2].lo


# ---------------------------------------------------------------------------
# Local share algebra (party-side)
# ---------------------------------------------------------------------------


def local_add(a, b):
    """reconstruct(result) = a + b; works for ArithShare and SharedTensor."""
    if isinstance(a, ArithShare):
        return ArithShare(a.lo + b.lo, a.hi + b.hi)
    return a + b


def local_affine(party: int, c1: RingElem, c2: RingElem, c3: RingElem, a: ArithShare, b: ArithShare) -> ArithShare:
    """Share of c1*x + c2*y + c3 for public ring constants.

    The constant c3 is folded into component x_0 only, so parties 0 (lo copy)
    and 2 (hi copy) add it; this keeps the replication overlaps intact.
    """
    lo = RingElem(c1.value * a.lo.value + c2.value * b.lo.value)
    hi = RingElem(c1.value * a.hi.value + c2.value * b.hi.value)
    if party == 0:
        lo = lo + c3
    elif party == 2:
        hi = hi + c3
    return ArithShare(lo, hi)


def add_public(party: int, x: SharedTensor, c: np.ndarray) -> SharedTensor:
    """Add a public ring tensor to a shared tensor (folded into x_0)."""
    c = u64_array(c)
    if party == 0:
        return SharedTensor(x.lo + c, x.hi.copy())
    if party == 2:
        return SharedTensor(x.lo.copy(), x.hi + c)
    return SharedTensor(x.lo.copy(), x.hi.copy())


def xor_public(party: int, b: BoolShare, c: int) -> BoolShare:
    """XOR a public bit pattern into a boolean share (folded into b_0)."""
    c = u64(c)
    if party == 0:
        return BoolShare(b.lo ^ c, b.hi.copy(), b.nbits)
    if party == 2:
        return BoolShare(b.lo.copy(), b.hi ^ c, b.nbits)
    return BoolShare(b.lo.copy(), b.hi.copy(), b.nbits)


def zeros_like_share(shape) -> SharedTensor:
    z = np.zeros(shape, dtype=np.uint64)
    return SharedTensor(z, z.copy())
