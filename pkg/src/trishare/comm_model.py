"""Analytic per-party byte costs of every protocol.

Each function mirrors one protocol's implementation and returns the exact
payload bytes [party0, party1, party2] it sends. The acceptance suite
checks measured counters against these formulas, including the composed
tiny-forward total, so the model and the code cannot drift apart silently.

Conventions: resharing-style steps (mul, square, matmul outputs, boolean
AND) cost 8 bytes per element at every party; truncation and boolean input
sharing send one masked component from party 0 only.
"""

from __future__ import annotations

import math

import numpy as np

from .transformer import ModelConfig

RECIP_WINDOW_WIDTH = 36 - 9 + 1
RSQRT_WINDOW_WIDTH = 38 - 8 + 1


def _sym(nbytes: int) -> np.ndarray:
    return np.array([nbytes, nbytes, nbytes], dtype=np.int64)


def _p0(nbytes: int) -> np.ndarray:
    return np.array([nbytes, 0, 0], dtype=np.int64)


def open_cost(n: int) -> np.ndarray:
    return _sym(8 * n)


def mul_cost(n: int) -> np.ndarray:
    return _sym(8 * n)


square_cost = mul_cost


def matmul_cost(m: int, n: int) -> np.ndarray:
    """Reshare of the (m, n) output; the contraction is local."""
    return _sym(8 * m * n)


def trunc_cost(n: int) -> np.ndarray:
    return _p0(8 * n)


def and_cost(n_words: int) -> np.ndarray:
    return _sym(8 * n_words)


def ppa_cost(n: int) -> np.ndarray:
    # initial AND plus six levels of one stacked double AND
    return and_cost(n) + 6 * and_cost(2 * n)


def a2b_cost(n: int) -> np.ndarray:
    return _p0(8 * n) + ppa_cost(n)


lt_cost = a2b_cost
msb_cost = a2b_cost


def eq_cost(n: int) -> np.ndarray:
    return _p0(8 * n) + 6 * and_cost(n)


def inject_cost(n: int) -> np.ndarray:
    return 2 * mul_cost(n)


def mul_ba_cost(n: int) -> np.ndarray:
    return inject_cost(n) + mul_cost(n)


def maximum_cost(batch: int, length: int) -> np.ndarray:
    total = np.zeros(3, dtype=np.int64)
    while length > 1:
        half = length // 2
        total += lt_cost(batch * half) + mul_ba_cost(batch * half)
        length = half + (length % 2)
    return total


def fixed_mul_cost(n: int) -> np.ndarray:
    return mul_cost(n) + trunc_cost(n)


def neg_exp_core_cost(n: int, t: int, frac_bits: int = 18) -> np.ndarray:
    internal = 23 if frac_bits + t <= 23 else 21
    shift = frac_bits + t - internal
    total = trunc_cost(n) if shift > 0 else np.zeros(3, dtype=np.int64)
    total = total + t * fixed_mul_cost(n) + trunc_cost(n)
    return total


def neg_exp_cost(n: int, t: int = 5) -> np.ndarray:
    return neg_exp_core_cost(n, t) + lt_cost(n) + mul_ba_cost(n)


def _onehot_cost(n: int, width: int) -> np.ndarray:
    return a2b_cost(n) + math.ceil(math.log2(width)) * and_cost(n)


def recip_cost(n: int) -> np.ndarray:
    # onehot + inject + (normalize, e0, 4 w-updates, 3 e-squares, rescale)
    return _onehot_cost(n, RECIP_WINDOW_WIDTH) + inject_cost(n * RECIP_WINDOW_WIDTH) + 10 * fixed_mul_cost(n)


def rsqrt_cost(n: int) -> np.ndarray:
    # onehot + inject + (normalize, 3 iterations of 3 products, rescale)
    return _onehot_cost(n, RSQRT_WINDOW_WIDTH) + inject_cost(n * RSQRT_WINDOW_WIDTH) + 11 * fixed_mul_cost(n)


def gelu_cost(n: int) -> np.ndarray:
    total = msb_cost(3 * n)  # three stacked comparisons
    total = total + fixed_mul_cost(n) * 2  # x^2 then x^3
    total = total + fixed_mul_cost(2 * n)  # x^4 and x^6 stacked
    total = total + 2 * trunc_cost(n)  # the two polynomial sums
    total = total + mul_ba_cost(3 * n)  # stacked branch selection
    return total


def softmax_cost(batch: int, length: int, t: int = 10) -> np.ndarray:
    n = batch * length
    return (
        maximum_cost(batch, length)
        + lt_cost(n)
        + neg_exp_core_cost(n, t)
        + recip_cost(batch)
        + fixed_mul_cost(n)
        + mul_ba_cost(n)
    )


def layernorm_cost(batch: int, length: int, mode: str = "standard") -> np.ndarray:
    n = batch * length
    total = trunc_cost(batch)  # mean
    total = total + fixed_mul_cost(n)  # squared deviations
    if mode == "standard":
        total = total + trunc_cost(batch)  # variance
    total = total + rsqrt_cost(batch)
    total = total + 2 * fixed_mul_cost(n)  # broadcast normalize, gamma
    return total


def embedding_cost(s: int, vocab: int, d: int) -> np.ndarray:
    return eq_cost(s * vocab) + inject_cost(s * vocab) + matmul_cost(s, d)


def multihead_cost(s: int, config: ModelConfig) -> np.ndarray:
    c = config
    h, dh, d = c.n_heads, c.head_dim, c.d_model
    total = 3 * (matmul_cost(s, d) + trunc_cost(s * d))  # q, k, v projections
    total = total + h * matmul_cost(s, s) + trunc_cost(h * s * s)  # scores
    if c.attn_scale:
        total = total + trunc_cost(h * s * s)
    total = total + softmax_cost(h * s, s)
    total = total + h * (matmul_cost(s, dh) + trunc_cost(s * dh))  # probs @ v
    total = total + matmul_cost(s, d) + trunc_cost(s * d)  # output projection
    return total


def ffn_cost(s: int, config: ModelConfig) -> np.ndarray:
    c = config
    return (
        matmul_cost(s, c.d_ff)
        + trunc_cost(s * c.d_ff)
        + gelu_cost(s * c.d_ff)
        + matmul_cost(s, c.d_model)
        + trunc_cost(s * c.d_model)
    )


def block_cost(s: int, config: ModelConfig) -> np.ndarray:
    return (
        multihead_cost(s, config)
        + ffn_cost(s, config)
        + 2 * layernorm_cost(s, config.d_model)
    )


def forward_cost(s: int, config: ModelConfig) -> np.ndarray:
    c = config
    total = embedding_cost(s, c.vocab_size, c.d_model)
    total = total + c.n_layers * block_cost(s, c)
    total = total + layernorm_cost(s, c.d_model)
    total = total + matmul_cost(s, c.vocab_size) + trunc_cost(s * c.vocab_size)
    return total
