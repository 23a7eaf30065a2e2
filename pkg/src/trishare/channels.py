"""Pairwise channels: in-process simulator queues and TCP sockets.

Wire format (identical on both transports): each logical payload is split
into frames of at most ``CHUNK_BYTES``; a frame is [u32 little-endian length
| payload bytes]. Ring elements travel as raw little-endian u64; bit-vectors
travel packed LSB-first within bytes. ``CommStats`` counts payload bytes
only (frame headers excluded) so simulator and TCP accounting agree.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
from dataclasses import dataclass, field

CHUNK_BYTES = 64 * 1024 * 1024
_LEN = struct.Struct("<I")


class ChannelError(ConnectionError):
    """Transport failure on a party-to-party channel."""


class ProtocolOrderError(RuntimeError):
    """A receive blocked past the deadlock timeout (mismatched protocol order)."""


@dataclass
class CommStats:
    """Per-party communication counters for one protocol execution.

    A round is counted when the party blocks on a receive after having sent
    since its previous counted round (send->receive alternation).
    """

    bytes_sent: int = 0
    messages: int = 0
    rounds: int = 0
    label: str = ""
    _sent_since_recv: bool = field(default=False, repr=False)

    def on_send(self, payload_bytes: int, frames: int) -> None:
        self.bytes_sent += payload_bytes
        self.messages += frames
        self._sent_since_recv = True

    def on_recv(self) -> None:
        if self._sent_since_recv:
            self.rounds += 1
            self._sent_since_recv = False

    def snapshot(self) -> tuple:
        return (self.bytes_sent, self.messages, self.rounds)

    def delta(self, before: tuple) -> "CommStats":
        return CommStats(
            bytes_sent=self.bytes_sent - before[0],
            messages=self.messages - before[1],
            rounds=self.rounds - before[2],
            label=self.label,
        )


def _split(payload: bytes):
    if len(payload) <= CHUNK_BYTES:
        return [payload]
    return [payload[i : i + CHUNK_BYTES] for i in range(0, len(payload), CHUNK_BYTES)]


class SimChannel:
    """One direction of an in-process channel: a FIFO of frames."""

    def __init__(self, abort: threading.Event, timeout: float):
        self._q: queue.Queue = queue.Queue()
        self._abort = abort
        self._timeout = timeout

    def send(self, payload: bytes) -> int:
        frames = _split(payload)
        for f in frames:
            self._q.put(f)
        return len(frames)

    def recv_exact(self, nbytes: int) -> bytes:
        got = bytearray()
        deadline = self._timeout
        while len(got) < nbytes:
            try:
                frame = self._q.get(timeout=min(0.05, deadline))
            except queue.Empty:
                if self._abort.is_set():
                    raise ProtocolOrderError("peer aborted")
                deadline -= 0.05
                if deadline <= 0:
                    raise ProtocolOrderError(f"receive timed out waiting for {nbytes} bytes")
                continue
            got.extend(frame)
        if len(got) != nbytes:
            raise ProtocolOrderError(f"frame overrun: wanted {nbytes}, got {len(got)}")
        return bytes(got)


class TcpChannel:
    """Bidirectional channel over one TCP socket (shared by both directions).

    Sends are drained by a background writer thread: every party in a
    resharing round sends before it receives, so synchronous sendall calls
    would deadlock on the cycle once payloads exceed the socket buffers.
    """

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._outbox: queue.Queue = queue.Queue()
        self._send_error: OSError | None = None
        self._writer = threading.Thread(target=self._drain, daemon=True)
        self._writer.start()

    def _drain(self) -> None:
        while True:
            item = self._outbox.get()
            if item is None:
                return
            try:
                self._sock.sendall(item)
            except OSError as e:
                self._send_error = e
                return

    def send(self, payload: bytes) -> int:
        if self._send_error is not None:
            raise ChannelError(f"send failed: {self._send_error}")
        frames = _split(payload)
        for f in frames:
            self._outbox.put(_LEN.pack(len(f)) + f)
        return len(frames)

    def _read(self, n: int) -> bytes:
        chunks = []
        while n > 0:
            try:
                c = self._sock.recv(min(n, 1 << 20))
            except socket.timeout as e:
                raise ProtocolOrderError("receive timed out") from e
            except OSError as e:
                raise ChannelError(f"recv failed: {e}") from e
            if not c:
                raise ChannelError("peer closed connection")
            chunks.append(c)
            n -= len(c)
        return b"".join(chunks)

    def recv_exact(self, nbytes: int) -> bytes:
        if self._send_error is not None:
            raise ChannelError(f"send failed: {self._send_error}")
        got = bytearray()
        while len(got) < nbytes:
            (flen,) = _LEN.unpack(self._read(4))
            frame = self._read(flen)
            got.extend(frame)
        if len(got) != nbytes:
            raise ProtocolOrderError(f"frame overrun: wanted {nbytes}, got {len(got)}")
        return bytes(got)

    def close(self) -> None:
        self._outbox.put(None)
        self._writer.join(timeout=5.0)
        try:
            self._sock.close()
        except OSError:
            pass


def connect_mesh(party: int, endpoints: list, timeout: float = 30.0) -> dict:
    """Establish the two TCP channels of one party.

    ``endpoints`` is [(host, port)] * 3. For each unordered pair the
    higher-numbered party dials the lower one's listener; a one-byte hello
    identifies the dialer. Returns {peer_id: TcpChannel}.
    """
    import time

    dial_to = [p for p in range(3) if p < party]
    accept_from = [p for p in range(3) if p > party]
    chans: dict = {}

    listener = None
    if accept_from:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(endpoints[party])
        listener.listen(2)
        listener.settimeout(timeout)

    for peer in dial_to:
        deadline = time.monotonic() + timeout
        while True:
            try:
                s = socket.create_connection(endpoints[peer], timeout=timeout)
                break
            except OSError as e:
                if time.monotonic() >= deadline:
                    raise ChannelError(f"party {party} cannot reach party {peer}: {e}") from e
                time.sleep(0.05)
        s.sendall(bytes([party]))
        chans[peer] = TcpChannel(s)

    for _ in accept_from:
        try:
            s, _addr = listener.accept()
        except socket.timeout as e:
            raise ChannelError(f"party {party} timed out waiting for peers") from e
        hello = s.recv(1)
        if len(hello) != 1 or hello[0] not in accept_from:
            raise ChannelError(f"party {party} got bad hello {hello!r}")
        chans[hello[0]] = TcpChannel(s)

    if listener is not None:
        listener.close()
    for ch in chans.values():
        ch._sock.settimeout(timeout)
    return chans
