"""Double-precision reference implementations and error statistics.

These are the ground truth for every verification test: exact GeLU, the
piecewise polynomial, true and clipped-Taylor softmax, both LayerNorm
modes, attention and the full forward pass. The clipped variants mirror
the secure protocols' constants so fixed-point error can be isolated from
approximation error.
"""

from __future__ import annotations

import json

import numpy as np

from .nonlinear import GELU, SOFTMAX, GeluConstants, SoftmaxConstants


def gelu_exact(x):
    """tanh-form GeLU: (x/2)(1 + tanh(sqrt(2/pi)(x + 0.044715 x^3)))."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x**3)))


def gelu_piecewise(x, constants: GeluConstants = GELU, frac_bits: int = 18):
    """Exact float evaluation of the deployed piecewise polynomial.

    Segment ownership uses the codec-quantized breakpoints (the thresholds
    the comparison protocol actually sees), so boundary points match the
    secure evaluation bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    scale = 2.0**frac_bits
    b0, b1, b2 = (np.round(b * scale) / scale for b in constants.breakpoints)
    c3, c2, c1, c0 = constants.f0_coeffs
    f0 = ((c3 * x + c2) * x + c1) * x + c0
    e6, e4, e2, e1, e0 = constants.f1_coeffs
    xx = x * x
    f1 = ((e6 * xx + e4) * xx + e2) * xx + e1 * x + e0
    return np.select([x < b0, x < b1, x <= b2], [0.0, f0, f1], default=x)


def neg_exp_ref(x, t: int = 5, clip: float = -14.0):
    """Clipped-Taylor exponential (1 + x/2^t)^(2^t); zero below the clip."""
    x = np.asarray(x, dtype=np.float64)
    val = (1.0 + x / 2.0**t) ** (2.0**t)
    return np.where(x < clip, 0.0, val)


def softmax_ref(x, axis: int = -1):
    """True softmax with max subtraction."""
    x = np.asarray(x, dtype=np.float64)
    m = x.max(axis=axis, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_clipped_ref(x, constants: SoftmaxConstants = SOFTMAX, frac_bits: int = 18):
    """The secure protocol's semantics in floats: shift by max and one
    fixed-point ulp, clipped-Taylor exponential, normalize, clip output."""
    x = np.asarray(x, dtype=np.float64)
    eps = constants.epsilon_ulps * 2.0**-frac_bits
    m = x.max(axis=-1, keepdims=True)
    xh = x - m - eps
    z = (1.0 + xh / 2.0**constants.taylor_iters) ** (2.0**constants.taylor_iters)
    out = z / z.sum(axis=-1, keepdims=True)
    return np.where(xh < constants.clip, 0.0, out)


def layernorm_ref(x, gamma, beta, mode: str = "standard", eps: float = 1e-5):
    """LayerNorm over the last axis; mode="paper" divides by sqrt of the
    raw squared-deviation sum, mode="standard" by sqrt(var + eps)."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    d = x - mu
    sigma = (d * d).sum(axis=-1, keepdims=True)
    if mode == "paper":
        s = 1.0 / np.sqrt(sigma)
    elif mode == "standard":
        s = 1.0 / np.sqrt(sigma / x.shape[-1] + eps)
    else:
        raise ValueError(f"unknown layernorm mode {mode!r}")
    return gamma * (d * s) + beta


def attention_ref(q, k, v, mask, scale: float | None = None):
    """softmax(q k^T * scale + mask) v in float64."""
    scores = q @ k.T
    if scale is not None:
        scores = scores * scale
    scores = scores + mask
    return softmax_ref(scores) @ v


def approx_error_stats(f_ref, f_approx, interval, grid_points: int) -> dict:
    """Max / mean / median absolute error on a uniform grid."""
    g = np.linspace(interval[0], interval[1], grid_points)
    err = np.abs(np.asarray(f_ref(g), dtype=np.float64) - np.asarray(f_approx(g), dtype=np.float64))
    return {
        "max": float(err.max()),
        "mean": float(err.mean()),
        "median": float(np.median(err)),
        "n_points": grid_points,
    }


def error_report(name: str, ref: np.ndarray, got: np.ndarray) -> dict:
    """JSON-ready error record comparing two same-shape tensors."""
    err = np.abs(np.asarray(ref, dtype=np.float64) - np.asarray(got, dtype=np.float64))
    return {
        "name": name,
        "max_err": float(err.max()) if err.size else 0.0,
        "mean_err": float(err.mean()) if err.size else 0.0,
        "median_err": float(np.median(err)) if err.size else 0.0,
        "n_points": int(err.size),
    }


def dump_report(report: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
