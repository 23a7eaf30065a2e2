"""Secure transformer layers and a tiny causal-LM forward pass.

Linear layers are local cross-product sums reshared once with a single
truncation per output element; attention composes secure matmul, the
softmax protocol and a public causal bias; blocks keep the invariant that
every layer consumes and produces well-formed replicated shares.

The float64 ``forward_ref`` mirrors the secure semantics (same additive
mask constant, same scaling and normalization placement) and is the parity
oracle for the secure pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinear import secure_embedding, secure_gelu, secure_layernorm, secure_softmax
from .oracle import gelu_exact, layernorm_ref, softmax_ref
from .primitives import matmul, mul_public_fixed, trunc
from .ring import FixedCodec, SharedTensor, add_public, share_tensor, stack, u64_array
from .runtime import PartyRuntime

#: Additive bias for masked attention positions. After max subtraction the
#: masked scores sit below the exponential clip, so masking is exact.
MASK_CONSTANT = -30.0


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    d_model: int
    n_heads: int
    d_ff: int
    vocab_size: int
    max_seq_len: int
    norm_placement: str = "post"  # "post" (encoder-style) or "pre" (GPT-style)
    attn_scale: bool = True

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.norm_placement not in ("post", "pre"):
            raise ValueError("norm_placement must be 'post' or 'pre'")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "d_ff": self.d_ff,
            "vocab_size": self.vocab_size,
            "max_seq_len": self.max_seq_len,
            "norm_placement": self.norm_placement,
            "attn_scale": self.attn_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def weight_names(config: ModelConfig) -> list:
    names = ["token_embedding", "position_embedding"]
    for i in range(config.n_layers):
        p = f"layers.{i}."
        names += [p + s for s in ("attn.wq", "attn.wk", "attn.wv", "attn.wo")]
        names += [p + s for s in ("ffn.w1", "ffn.b1", "ffn.w2", "ffn.b2")]
        names += [p + s for s in ("ln1.gamma", "ln1.beta", "ln2.gamma", "ln2.beta")]
    names += ["final_ln.gamma", "final_ln.beta", "lm_head"]
    return names


def weight_shapes(config: ModelConfig) -> dict:
    c = config
    shapes = {
        "token_embedding": (c.vocab_size, c.d_model),
        "position_embedding": (c.max_seq_len, c.d_model),
        "final_ln.gamma": (c.d_model,),
        "final_ln.beta": (c.d_model,),
        "lm_head": (c.vocab_size, c.d_model),
    }
    for i in range(c.n_layers):
        p = f"layers.{i}."
        for s in ("attn.wq", "attn.wk", "attn.wv", "attn.wo"):
            shapes[p + s] = (c.d_model, c.d_model)
        shapes[p + "ffn.w1"] = (c.d_model, c.d_ff)
        shapes[p + "ffn.b1"] = (c.d_ff,)
        shapes[p + "ffn.w2"] = (c.d_ff, c.d_model)
        shapes[p + "ffn.b2"] = (c.d_model,)
        for s in ("ln1.gamma", "ln1.beta", "ln2.gamma", "ln2.beta"):
            shapes[p + s] = (c.d_model,)
    return shapes


def random_weights(config: ModelConfig, rng: np.random.Generator) -> dict:
    """Random float32 weights scaled to keep activations in fixed-point
    friendly ranges (embeddings O(1), Xavier-style projections)."""
    w: dict = {}
    c = config
    w["token_embedding"] = rng.normal(0.0, 0.4, (c.vocab_size, c.d_model))
    w["position_embedding"] = rng.normal(0.0, 0.2, (c.max_seq_len, c.d_model))
    for i in range(c.n_layers):
        p = f"layers.{i}."
        for s in ("attn.wq", "attn.wk", "attn.wv", "attn.wo"):
            w[p + s] = rng.normal(0.0, c.d_model**-0.5, (c.d_model, c.d_model))
        w[p + "ffn.w1"] = rng.normal(0.0, c.d_model**-0.5, (c.d_model, c.d_ff))
        w[p + "ffn.b1"] = rng.normal(0.0, 0.02, (c.d_ff,))
        w[p + "ffn.w2"] = rng.normal(0.0, c.d_ff**-0.5, (c.d_ff, c.d_model))
        w[p + "ffn.b2"] = rng.normal(0.0, 0.02, (c.d_model,))
        w[p + "ln1.gamma"] = 1.0 + rng.normal(0.0, 0.05, (c.d_model,))
        w[p + "ln1.beta"] = rng.normal(0.0, 0.05, (c.d_model,))
        w[p + "ln2.gamma"] = 1.0 + rng.normal(0.0, 0.05, (c.d_model,))
        w[p + "ln2.beta"] = rng.normal(0.0, 0.05, (c.d_model,))
    w["final_ln.gamma"] = 1.0 + rng.normal(0.0, 0.05, (c.d_model,))
    w["final_ln.beta"] = rng.normal(0.0, 0.05, (c.d_model,))
    w["lm_head"] = rng.normal(0.0, c.d_model**-0.5, (c.vocab_size, c.d_model))
    return {k: v.astype(np.float32) for k, v in w.items()}


def causal_mask(s: int) -> np.ndarray:
    """Public additive bias: 0 on and below the diagonal, MASK_CONSTANT above."""
    m = np.zeros((s, s), dtype=np.float64)
    m[np.triu_indices(s, k=1)] = MASK_CONSTANT
    return m


# ---------------------------------------------------------------------------
# Secret sharing of model state (harness side)
# ---------------------------------------------------------------------------


def share_weights(weights: dict, rng: np.random.Generator, codec: FixedCodec | None = None) -> list:
    """Encode float weights to fixed point and split into three share dicts."""
    codec = codec or FixedCodec()
    out: list = [{}, {}, {}]
    for name, arr in weights.items():
        shares = share_tensor(codec.encode_array(np.asarray(arr, dtype=np.float64)), rng)
        for p in range(3):
            out[p][name] = shares[p]
    return out


def share_tokens(token_ids, rng: np.random.Generator) -> list:
    """Share raw token ids as ring integers (not fixed-point encoded)."""
    ids = u64_array(np.asarray(token_ids, dtype=np.uint64))
    return share_tensor(ids, rng)


# ---------------------------------------------------------------------------
# Secure layers
# ---------------------------------------------------------------------------


def secure_matmul(rt: PartyRuntime, a: SharedTensor, b: SharedTensor) -> SharedTensor:
    """Fixed-point matrix product: one resharing plus one truncation per
    output element."""
    return trunc(rt, matmul(rt, a, b), rt.frac_bits)


def secure_matmul_public(rt: PartyRuntime, a: SharedTensor, b_public: np.ndarray) -> SharedTensor:
    """a @ b for a public float matrix: local products, one truncation."""
    be = rt.codec.encode_array(np.asarray(b_public, dtype=np.float64))
    z = SharedTensor(a.lo @ be, a.hi @ be)
    return trunc(rt, z, rt.frac_bits)


def secure_attention(
    rt: PartyRuntime,
    q: SharedTensor,
    k: SharedTensor,
    v: SharedTensor,
    mask: np.ndarray,
    scale: float | None = None,
) -> SharedTensor:
    """softmax(q k^T * scale + mask) v on shared tensors; mask is public."""
    scores = secure_matmul(rt, q, k.T)
    if scale is not None:
        scores = mul_public_fixed(rt, scores, scale)
    scores = add_public(rt.party, scores, rt.codec.encode_array(mask))
    probs = secure_softmax(rt, scores)
    return secure_matmul(rt, probs, v)


def secure_multihead(
    rt: PartyRuntime,
    x: SharedTensor,
    lw: dict,
    mask: np.ndarray,
    config: ModelConfig,
) -> SharedTensor:
    """Project to Q/K/V, per-head attention with the softmax batched across
    heads, concatenate and apply the output projection."""
    s = x.shape[0]
    h, dh = config.n_heads, config.head_dim
    q = secure_matmul(rt, x, lw["attn.wq"])
    k = secure_matmul(rt, x, lw["attn.wk"])
    v = secure_matmul(rt, x, lw["attn.wv"])

    scale = dh**-0.5 if config.attn_scale else None
    scores = []
    for i in range(h):
        sl = slice(i * dh, (i + 1) * dh)
        scores.append(matmul(rt, q[:, sl], k[:, sl].T))
    scores = trunc(rt, stack(scores), rt.frac_bits)  # (h, s, s), one batched truncation
    if scale is not None:
        scores = mul_public_fixed(rt, scores, scale)
    scores = add_public(rt.party, scores, np.broadcast_to(rt.codec.encode_array(mask), (h, s, s)).copy())
    probs = secure_softmax(rt, scores)

    heads = [secure_matmul(rt, probs[i], v[:, slice(i * dh, (i + 1) * dh)]) for i in range(h)]
    merged = SharedTensor(
        np.concatenate([t.lo for t in heads], axis=1),
        np.concatenate([t.hi for t in heads], axis=1),
    )
    return secure_matmul(rt, merged, lw["attn.wo"])


def secure_ffn(
    rt: PartyRuntime,
    x: SharedTensor,
    w1: SharedTensor,
    b1: SharedTensor,
    w2: SharedTensor,
    b2: SharedTensor,
) -> SharedTensor:
    """w2 gelu(w1 x + b1) + b2."""
    h = secure_matmul(rt, x, w1) + b1
    g = secure_gelu(rt, h)
    return secure_matmul(rt, g, w2) + b2


def secure_block(
    rt: PartyRuntime,
    x: SharedTensor,
    lw: dict,
    mask: np.ndarray,
    config: ModelConfig,
) -> SharedTensor:
    """One transformer block; residual adds are local."""
    ffn_args = (lw["ffn.w1"], lw["ffn.b1"], lw["ffn.w2"], lw["ffn.b2"])
    if config.norm_placement == "post":
        h = secure_layernorm(rt, x + secure_multihead(rt, x, lw, mask, config), lw["ln1.gamma"], lw["ln1.beta"])
        return secure_layernorm(rt, h + secure_ffn(rt, h, *ffn_args), lw["ln2.gamma"], lw["ln2.beta"])
    a = secure_layernorm(rt, x, lw["ln1.gamma"], lw["ln1.beta"])
    h = x + secure_multihead(rt, a, lw, mask, config)
    f = secure_layernorm(rt, h, lw["ln2.gamma"], lw["ln2.beta"])
    return h + secure_ffn(rt, f, *ffn_args)


def _layer_weights(sw: dict, i: int) -> dict:
    p = f"layers.{i}."
    return {k[len(p) :]: v for k, v in sw.items() if k.startswith(p)}


def secure_forward(
    rt: PartyRuntime,
    token_ids: SharedTensor,
    sw: dict,
    config: ModelConfig,
    trace: list | None = None,
) -> SharedTensor:
    """Full causal-LM forward pass to logits (s, vocab).

    ``trace``, when a list, receives the opened output of every block
    (debug mode for the layer invariant; leaks plaintext by design).
    """
    s = token_ids.shape[0]
    if s > config.max_seq_len:
        raise ValueError(f"sequence length {s} exceeds max_seq_len {config.max_seq_len}")
    emb = secure_embedding(rt, token_ids, sw["token_embedding"])
    h = emb + sw["position_embedding"][:s]  # positions are public indices
    mask = causal_mask(s)
    for i in range(config.n_layers):
        h = secure_block(rt, h, _layer_weights(sw, i), mask, config)
        if trace is not None:
            trace.append(rt.open_tensor(h))
    h = secure_layernorm(rt, h, sw["final_ln.gamma"], sw["final_ln.beta"])
    return secure_matmul(rt, h, sw["lm_head"].T)


# ---------------------------------------------------------------------------
# Float64 reference forward (the parity oracle)
# ---------------------------------------------------------------------------


def forward_ref(
    token_ids,
    weights: dict,
    config: ModelConfig,
    activation: str = "piecewise",
    softmax: str = "clipped",
) -> np.ndarray:
    """Plaintext float64 forward with the same structure and mask constant.

    The defaults mirror the secure semantics (piecewise GeLU polynomial and
    clipped-Taylor softmax) so comparisons isolate fixed-point error;
    activation="exact" / softmax="true" give the unapproximated model.
    """
    from .oracle import gelu_piecewise, softmax_clipped_ref

    act = {"piecewise": gelu_piecewise, "exact": gelu_exact}[activation]
    sm = {"clipped": softmax_clipped_ref, "true": softmax_ref}[softmax]
    w = {k: np.asarray(v, dtype=np.float64) for k, v in weights.items()}
    ids = np.asarray(token_ids, dtype=np.int64)
    s = len(ids)
    if s > config.max_seq_len:
        raise ValueError(f"sequence length {s} exceeds max_seq_len {config.max_seq_len}")
    in_range = (ids >= 0) & (ids < config.vocab_size)
    h = np.where(in_range[:, None], w["token_embedding"][np.clip(ids, 0, config.vocab_size - 1)], 0.0)
    h = h + w["position_embedding"][:s]
    mask = causal_mask(s)
    scale = config.head_dim**-0.5 if config.attn_scale else 1.0

    def mha(x, lw):
        q, k, v = x @ lw["attn.wq"], x @ lw["attn.wk"], x @ lw["attn.wv"]
        outs = []
        for i in range(config.n_heads):
            sl = slice(i * config.head_dim, (i + 1) * config.head_dim)
            scores = (q[:, sl] @ k[:, sl].T) * scale + mask
            outs.append(sm(scores) @ v[:, sl])
        return np.concatenate(outs, axis=1) @ lw["attn.wo"]

    def ffn(x, lw):
        return act(x @ lw["ffn.w1"] + lw["ffn.b1"]) @ lw["ffn.w2"] + lw["ffn.b2"]

    for i in range(config.n_layers):
        lw = {k[len(f"layers.{i}.") :]: v for k, v in w.items() if k.startswith(f"layers.{i}.")}
        if config.norm_placement == "post":
            h = layernorm_ref(h + mha(h, lw), lw["ln1.gamma"], lw["ln1.beta"])
            h = layernorm_ref(h + ffn(h, lw), lw["ln2.gamma"], lw["ln2.beta"])
        else:
            h = h + mha(layernorm_ref(h, lw["ln1.gamma"], lw["ln1.beta"]), lw)
            h = h + ffn(layernorm_ref(h, lw["ln2.gamma"], lw["ln2.beta"]), lw)
    h = layernorm_ref(h, w["final_ln.gamma"], w["final_ln.beta"])
    return h @ w["lm_head"].T
