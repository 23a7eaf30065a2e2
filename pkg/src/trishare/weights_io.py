"""PUMAW1 binary weight files.

Layout (all little-endian): magic ``PUMAW1\\0\\0``; u32 tensor count; then
per tensor: u16 name length, UTF-8 name, u8 dtype (0 = float32), u8 rank,
u32 dims[rank], raw float32 data. Bit-exact at float32 and trivially
writable from any ecosystem.

A model file carries one meta tensor ``__config__`` holding the eight
architecture numbers (layers, d_model, heads, d_ff, vocab, max_seq_len,
norm placement flag 0=post/1=pre, attention scale flag).
"""

from __future__ import annotations

import struct

import numpy as np

from .transformer import ModelConfig, weight_shapes

MAGIC = b"PUMAW1\x00\x00"
DTYPE_F32 = 0
CONFIG_TENSOR = "__config__"


class WeightFormatError(ValueError):
    """Malformed weight file; message carries the byte offset."""


def save_weights(weights: dict, path: str) -> None:
    """Write a name->float32-array map; iteration order is preserved."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(weights)))
        for name, arr in weights.items():
            arr = np.asarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_weights(path: str) -> dict:
    """Read a PUMAW1 file back into {name: float32 array}."""
    with open(path, "rb") as fh:
        buf = fh.read()

    def need(off: int, n: int) -> None:
        if off + n > len(buf):
            raise WeightFormatError(f"truncated file: need {n} bytes at offset {off}, have {len(buf) - off}")

    off = 0
    need(off, 8)
    if buf[:8] != MAGIC:
        raise WeightFormatError(f"bad magic at offset 0: {buf[:8]!r}")
    off = 8
    need(off, 4)
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    out: dict = {}
    for _ in range(count):
        need(off, 2)
        (nlen,) = struct.unpack_from("<H", buf, off)
        off += 2
        need(off, nlen)
        name = buf[off : off + nlen].decode("utf-8")
        off += nlen
        need(off, 2)
        dtype, rank = struct.unpack_from("<BB", buf, off)
        off += 2
        if dtype != DTYPE_F32:
            raise WeightFormatError(f"unsupported dtype {dtype} at offset {off - 2}")
        need(off, 4 * rank)
        dims = struct.unpack_from(f"<{rank}I", buf, off)
        off += 4 * rank
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        need(off, 4 * size)
        arr = np.frombuffer(buf, dtype="<f4", count=size, offset=off).reshape(dims).copy()
        off += 4 * size
        out[name] = arr
    if off != len(buf):
        raise WeightFormatError(f"{len(buf) - off} trailing bytes at offset {off}")
    return out


def config_to_tensor(config: ModelConfig) -> np.ndarray:
    return np.array(
        [
            config.n_layers,
            config.d_model,
            config.n_heads,
            config.d_ff,
            config.vocab_size,
            config.max_seq_len,
            0 if config.norm_placement == "post" else 1,
            1 if config.attn_scale else 0,
        ],
        dtype=np.float32,
    )


def config_from_tensor(arr: np.ndarray) -> ModelConfig:
    if arr.size != 8:
        raise WeightFormatError(f"{CONFIG_TENSOR} must hold 8 values, got {arr.size}")
    v = [int(x) for x in np.asarray(arr).reshape(-1)]
    return ModelConfig(
        n_layers=v[0],
        d_model=v[1],
        n_heads=v[2],
        d_ff=v[3],
        vocab_size=v[4],
        max_seq_len=v[5],
        norm_placement="post" if v[6] == 0 else "pre",
        attn_scale=bool(v[7]),
    )


def save_model(weights: dict, config: ModelConfig, path: str) -> None:
    out = {CONFIG_TENSOR: config_to_tensor(config)}
    out.update(weights)
    save_weights(out, path)


def load_model(path: str) -> tuple:
    """Load (weights, config), validating names and shapes."""
    raw = load_weights(path)
    if CONFIG_TENSOR not in raw:
        raise WeightFormatError(f"missing {CONFIG_TENSOR} tensor")
    config = config_from_tensor(raw.pop(CONFIG_TENSOR))
    expected = weight_shapes(config)
    missing = sorted(set(expected) - set(raw))
    if missing:
        raise WeightFormatError(f"missing tensors: {missing[:4]}{'...' if len(missing) > 4 else ''}")
    extra = sorted(set(raw) - set(expected))
    if extra:
        raise WeightFormatError(f"unrecognized tensors: {extra[:4]}{'...' if len(extra) > 4 else ''}")
    for name, shape in expected.items():
        if raw[name].shape != shape:
            raise WeightFormatError(f"tensor {name}: shape {raw[name].shape}, expected {shape}")
    return raw, config
