"""Party identity, correlated randomness and protocol execution.

Each party runs the same (SPMD) program against its ``PartyRuntime``. The
runtime owns the two channels, the pairwise AES-128-CTR streams used for
zero-sharing and masking, and the communication counters.

Key material is derived deterministically from a shared session seed; this
models the offline setup phase of a semi-honest deployment, where each edge
key would instead be exchanged once between its two parties.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .channels import (
    CommStats,
    ProtocolOrderError,
    SimChannel,
    TcpChannel,
    connect_mesh,
)
from .ring import BoolShare, FixedCodec, SharedTensor

DEFAULT_DEADLOCK_TIMEOUT = 30.0


@dataclass(frozen=True)
class PartyId:
    """Identity in the three-party ring: 0, 1 or 2."""

    id: int

    def __post_init__(self):
        if self.id not in (0, 1, 2):
            raise ValueError("party id must be 0, 1 or 2")

    @property
    def next(self) -> int:
        return (self.id + 1) % 3

    @property
    def prev(self) -> int:
        return (self.id + 2) % 3


class PrfStream:
    """Deterministic u64 stream: AES-128-CTR keystream under a shared key."""

    def __init__(self, key: bytes):
        if len(key) != 16:
            raise ValueError("PRF key must be 128-bit")
        self.key = key
        self.counter = 0  # consumed 16-byte blocks

    def draw_u64(self, n: int) -> np.ndarray:
        nblocks = (n * 8 + 15) // 16
        iv = self.counter.to_bytes(16, "big")
        enc = Cipher(algorithms.AES(self.key), modes.CTR(iv)).encryptor()
        stream = enc.update(bytes(nblocks * 16))
        self.counter += nblocks
        return np.frombuffer(stream, dtype="<u8")[:n].copy()


def derive_edge_key(seed: int, edge: int) -> bytes:
    return hashlib.sha256(b"trishare-edge-key" + edge.to_bytes(1, "big") + int(seed).to_bytes(8, "little")).digest()[
        :16
    ]


@dataclass
class PrfSetup:
    """A party's pairwise keys: edge i connects parties i and i+1."""

    key_with_next: bytes
    key_with_prev: bytes

    @classmethod
    def from_seed(cls, seed: int, party: int) -> "PrfSetup":
        return cls(
            key_with_next=derive_edge_key(seed, party),
            key_with_prev=derive_edge_key(seed, (party + 2) % 3),
        )


class PartyRuntime:
    """One party's execution context: channels, PRF streams, counters."""

    def __init__(self, party: int, channels: dict, prf: PrfSetup, codec: FixedCodec | None = None):
        self.pid = PartyId(party)
        self.party = party
        self.chans = channels  # peer id -> channel
        self.stats = CommStats()
        self.codec = codec or FixedCodec()
        self._next_stream = PrfStream(prf.key_with_next)
        self._prev_stream = PrfStream(prf.key_with_prev)

    @property
    def next(self) -> int:
        return self.pid.next

    @property
    def prev(self) -> int:
        return self.pid.prev

    @property
    def frac_bits(self) -> int:
        return self.codec.frac_bits

    # -- raw transport ------------------------------------------------------

    def send_bytes(self, to: int, payload: bytes) -> None:
        frames = self.chans[to].send(payload)
        self.stats.on_send(len(payload), frames)

    def recv_bytes(self, frm: int, nbytes: int) -> bytes:
        self.stats.on_recv()
        return self.chans[frm].recv_exact(nbytes)

    def send_u64(self, to: int, arr: np.ndarray) -> None:
        self.send_bytes(to, np.ascontiguousarray(arr, dtype="<u8").tobytes())

    def recv_u64(self, frm: int, shape) -> np.ndarray:
        n = int(np.prod(shape)) if not np.isscalar(shape) else int(shape)
        data = self.recv_bytes(frm, n * 8)
        out = np.frombuffer(data, dtype="<u8").copy()
        return out.reshape(shape) if not np.isscalar(shape) else out

    def send_bits(self, to: int, words: np.ndarray, nbits: int = 64) -> None:
        """Send packed bit-vectors; single-bit vectors pack 8 per byte."""
        if nbits == 1:
            bits = (np.ascontiguousarray(words, dtype=np.uint64) & np.uint64(1)).astype(np.uint8)
            self.send_bytes(to, np.packbits(bits.reshape(-1), bitorder="little").tobytes())
        else:
            self.send_u64(to, words)

    def recv_bits(self, frm: int, shape, nbits: int = 64) -> np.ndarray:
        n = int(np.prod(shape))
        if nbits == 1:
            data = self.recv_bytes(frm, (n + 7) // 8)
            bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")[:n]
            return bits.astype(np.uint64).reshape(shape)
        return self.recv_u64(frm, shape)

    # -- correlated randomness ----------------------------------------------

    def zero_share(self, shape) -> np.ndarray:
        """Additive zero-share component: alpha_i = F(k_next) - F(k_prev)."""
        n = int(np.prod(shape))
        a = self._next_stream.draw_u64(n) - self._prev_stream.draw_u64(n)
        return a.reshape(shape)

    def zero_share_bits(self, shape) -> np.ndarray:
        """XOR zero-share component over packed words."""
        n = int(np.prod(shape))
        a = self._next_stream.draw_u64(n) ^ self._prev_stream.draw_u64(n)
        return a.reshape(shape)

    def edge_rand(self, edge: int, shape) -> np.ndarray:
        """Shared uniform values on edge (edge, edge+1); caller must be on it."""
        n = int(np.prod(shape))
        if self.party == edge:
            return self._next_stream.draw_u64(n).reshape(shape)
        if self.party == (edge + 1) % 3:
            return self._prev_stream.draw_u64(n).reshape(shape)
        raise ValueError(f"party {self.party} is not on edge {edge}")

    # -- reconstruction -------------------------------------------------------

    def open_tensor(self, x: SharedTensor) -> np.ndarray:
        """Open toward all parties: send lo to the next party (1 round, 8n bytes)."""
        self.send_u64(self.next, x.lo)
        missing = self.recv_u64(self.prev, x.shape)
        return x.lo + x.hi + missing

    def open_bits(self, b: BoolShare) -> np.ndarray:
        self.send_bits(self.next, b.lo, b.nbits)
        missing = self.recv_bits(self.prev, b.shape, b.nbits)
        return b.lo ^ b.hi ^ missing

    def open_scalar(self, x: SharedTensor) -> float:
        """Open and decode a fixed-point shared tensor (tests and harnesses)."""
        return float(self.codec.decode_array(self.open_tensor(x)).reshape(-1)[0])


# ---------------------------------------------------------------------------
# Execution drivers
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    outputs: list
    stats: list


def run_simulated(
    program,
    args=None,
    seed: int = 0,
    timeout: float = DEFAULT_DEADLOCK_TIMEOUT,
) -> RunResult:
    """Run ``program(rt, *args[i])`` for the three parties on in-memory channels.

    ``args`` is a list of three tuples (one per party) or None. Outputs and
    per-party CommStats are returned in party order; the first party
    exception, if any, is re-raised.
    """
    abort = threading.Event()
    # one SimChannel per directed edge
    pipes = {(i, j): SimChannel(abort, timeout) for i in range(3) for j in range(3) if i != j}

    class _Endpoint:
        def __init__(self, me, peer):
            self._in = pipes[(peer, me)]
            self._out = pipes[(me, peer)]

        def send(self, payload):
            return self._out.send(payload)

        def recv_exact(self, n):
            return self._in.recv_exact(n)

    runtimes = [
        PartyRuntime(p, {q: _Endpoint(p, q) for q in range(3) if q != p}, PrfSetup.from_seed(seed, p))
        for p in range(3)
    ]
    outputs = [None, None, None]
    errors = [None, None, None]

    def worker(p):
        try:
            a = args[p] if args is not None else ()
            outputs[p] = program(runtimes[p], *a)
        except BaseException as e:  # noqa: BLE001 - propagated to caller
            errors[p] = e
            abort.set()

    threads = [threading.Thread(target=worker, args=(p,), daemon=True) for p in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=timeout + 10.0)
    for p in range(3):
        if threads[p].is_alive():
            abort.set()
            raise ProtocolOrderError(f"party {p} still blocked after timeout")
    for e in errors:
        if e is not None:
            raise e
    return RunResult(outputs=outputs, stats=[rt.stats for rt in runtimes])


def run_tcp(
    party: int,
    endpoints: list,
    program,
    args=(),
    seed: int = 0,
    timeout: float = DEFAULT_DEADLOCK_TIMEOUT,
):
    """Run one party of ``program`` over TCP. Returns (output, CommStats)."""
    chans = connect_mesh(party, endpoints, timeout=timeout)
    try:
        rt = PartyRuntime(party, chans, PrfSetup.from_seed(seed, party))
        out = program(rt, *args)
        return out, rt.stats
    finally:
        for ch in chans.values():
            if isinstance(ch, TcpChannel):
                ch.close()


def run_tcp_local(
    program,
    args=None,
    seed: int = 0,
    base_port: int = 0,
    timeout: float = DEFAULT_DEADLOCK_TIMEOUT,
) -> RunResult:
    """Run all three parties over real TCP sockets on localhost.

    Used by tests and the CLI's single-host tcp mode; semantically identical
    to ``run_simulated`` (transport equivalence).
    """
    import socket as _socket

    if base_port == 0:
        # grab three free ports
        socks = []
        ports = []
        for _ in range(3):
            s = _socket.socket()
            s.bind(("127.0.0.1", 0))
            ports.append(s.getsockname()[1])
            socks.append(s)
        for s in socks:
            s.close()
    else:
        ports = [base_port + i for i in range(3)]
    endpoints = [("127.0.0.1", p) for p in ports]

    outputs = [None, None, None]
    stats = [None, None, None]
    errors = [None, None, None]

    def worker(p):
        try:
            a = args[p] if args is not None else ()
            outputs[p], stats[p] = run_tcp(p, endpoints, program, a, seed=seed, timeout=timeout)
        except BaseException as e:  # noqa: BLE001
            errors[p] = e

    threads = [threading.Thread(target=worker, args=(p,), daemon=True) for p in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=timeout + 10.0)
    for p in range(3):
        if threads[p].is_alive():
            raise ProtocolOrderError(f"party {p} still blocked after timeout")
    for e in errors:
        if e is not None:
            raise e
    return RunResult(outputs=outputs, stats=stats)


# ---------------------------------------------------------------------------
# Config file: one `key = value` per line, '#' comments
# ---------------------------------------------------------------------------


def parse_config(text: str) -> dict:
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        cfg[key] = val
    return cfg


def endpoints_from_config(cfg: dict) -> list:
    eps = []
    for p in range(3):
        key = f"party{p}"
        if key not in cfg:
            raise ValueError(f"config missing '{key} = host:port'")
        host, port = cfg[key].rsplit(":", 1)
        eps.append((host, int(port)))
    return eps
