"""Message transports: a deterministic simulated network and TCP sockets.

Socket framing is a 4-byte big-endian length followed by one encoded
:class:`~hetauth.wire.WireMessage`; frames above 64 KiB close the connection.
The registration "secure channel" is a pre-shared-key AES-GCM wrapper around
the same frames, configured out of band.
"""

from __future__ import annotations

import heapq
import logging
import os
import random
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from hetauth import wire
from hetauth.wire import MalformedMessage, WireMessage

logger = logging.getLogger(__name__)

MAX_FRAME = 64 * 1024
_NONCE = 12
_CHANNEL_AAD = b"hetauth-registration-channel"


class TransportError(Exception):
    pass


class ConnectError(TransportError):
    pass


class FrameTooLarge(TransportError):
    pass


class ChannelError(TransportError):
    """Secure-channel frame failed authentication."""


# ---------------------------------------------------------------- simnet


class SimClock:
    """Virtual millisecond clock; callable so parties can use it directly."""

    def __init__(self, start: int = 1_700_000_000_000) -> None:
        self.now = start

    def __call__(self) -> int:
        return self.now

    def advance(self, ms: int) -> None:
        self.now += ms


@dataclass(frozen=True)
class Fault:
    kind: str = "none"
    delay_ms: int = 0

    KINDS = ("none", "delay", "duplicate", "drop", "reorder")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown fault {self.kind!r}")


NO_FAULT = Fault()
DUPLICATE = Fault("duplicate")
DROP = Fault("drop")
REORDER = Fault("reorder")


def delay(ms: int) -> Fault:
    return Fault("delay", ms)


@dataclass
class DeliveryEvent:
    time_ms: int
    src: str
    dst: str
    msg_type: str
    payload: bytes
    outcome: str = "delivered"
    decision: str = ""


Handler = Callable[[str, bytes], Tuple[Optional[bytes], str]]


@dataclass(order=True)
class _Queued:
    at: int
    seq: int
    src: str = field(compare=False)
    dst: str = field(compare=False)
    payload: bytes = field(compare=False)


class SimNetwork:
    """Single-threaded discrete-event network.

    Node handlers take ``(src, payload)`` and return ``(reply_or_None,
    decision)``.  Replies travel back with the base latency.  All randomness
    (reorder jitter) comes from the seeded generator, so a run is a pure
    function of its seed and inputs.
    """

    def __init__(self, seed: int = 0, latency_ms: int = 5, clock: Optional[SimClock] = None) -> None:
        self.rng = random.Random(seed)
        self.latency = latency_ms
        self.clock = clock or SimClock()
        self.nodes: Dict[str, Handler] = {}
        self.events: List[DeliveryEvent] = []
        self.taps: List[Callable[[DeliveryEvent], None]] = []
        self._queue: List[_Queued] = []
        self._seq = 0

    def attach(self, name: str, handler: Handler) -> None:
        self.nodes[name] = handler

    def send(self, src: str, dst: str, payload: bytes, fault: Fault = NO_FAULT) -> None:
        payload = bytes(payload)
        if fault.kind == "drop":
            self._log(DeliveryEvent(self.clock(), src, dst, _type_name(payload), payload, "dropped"))
            return
        at = self.clock() + self.latency
        if fault.kind == "delay":
            at += fault.delay_ms
        elif fault.kind == "reorder":
            at += self.rng.randint(self.latency + 1, 4 * self.latency + 1)
        self._push(at, src, dst, payload)
        if fault.kind == "duplicate":
            self._push(at, src, dst, payload)

    def _push(self, at: int, src: str, dst: str, payload: bytes) -> None:
        heapq.heappush(self._queue, _Queued(at, self._seq, src, dst, payload))
        self._seq += 1

    def _log(self, event: DeliveryEvent) -> None:
        self.events.append(event)
        for tap in self.taps:
            tap(event)

    def step(self) -> Optional[DeliveryEvent]:
        if not self._queue:
            return None
        item = heapq.heappop(self._queue)
        if item.at > self.clock.now:
            self.clock.now = item.at
        event = DeliveryEvent(self.clock(), item.src, item.dst, _type_name(item.payload), item.payload)
        handler = self.nodes.get(item.dst)
        if handler is None:
            event.outcome = "no-route"
            self._log(event)
            return event
        reply, event.decision = handler(item.src, item.payload)
        self._log(event)
        if reply is not None:
            self._push(self.clock() + self.latency, item.dst, item.src, reply)
        return event

    def run(self, max_steps: int = 1_000_000) -> List[DeliveryEvent]:
        start = len(self.events)
        for _ in range(max_steps):
            if self.step() is None:
                break
        return self.events[start:]

    def pending(self) -> int:
        return len(self._queue)


def simnet_deliver(net: SimNetwork, src: str, dst: str, msg: WireMessage, fault: Fault = NO_FAULT) -> List[DeliveryEvent]:
    net.send(src, dst, wire.encode(msg), fault)
    return net.run()


def _type_name(payload: bytes) -> str:
    if len(payload) >= 2:
        try:
            return wire.MsgType(payload[1]).name.lower()
        except ValueError:
            pass
    return "unknown"


# ---------------------------------------------------------------- sockets


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            if buf:
                raise TransportError("connection closed mid-frame")
            return None
        buf.extend(chunk)
    return bytes(buf)


class FrameStream:
    """Length-prefixed frames over a connected socket."""

    secure = False

    def __init__(self, sock: socket.socket, max_frame: int = MAX_FRAME) -> None:
        self.sock = sock
        self.max_frame = max_frame

    def send_frame(self, data: bytes) -> None:
        if len(data) > self.max_frame:
            raise FrameTooLarge(f"{len(data)} > {self.max_frame}")
        self.sock.sendall(struct.pack(">I", len(data)) + data)

    def recv_frame(self) -> Optional[bytes]:
        header = _recv_exact(self.sock, 4)
        if header is None:
            return None
        (n,) = struct.unpack(">I", header)
        if n > self.max_frame:
            raise FrameTooLarge(f"peer announced {n} bytes")
        data = _recv_exact(self.sock, n)
        if data is None:
            raise TransportError("connection closed mid-frame")
        return data


class SecureFrameStream(FrameStream):
    """AES-GCM under a pre-shared key; stands in for the registration channel."""

    secure = True

    def __init__(self, sock: socket.socket, psk: bytes, max_frame: int = MAX_FRAME) -> None:
        super().__init__(sock, max_frame)
        if len(psk) not in (16, 24, 32):
            raise ValueError("pre-shared key must be 16, 24 or 32 bytes")
        self._aead = AESGCM(psk)

    def send_frame(self, data: bytes) -> None:
        nonce = os.urandom(_NONCE)
        super().send_frame(nonce + self._aead.encrypt(nonce, data, _CHANNEL_AAD))

    def recv_frame(self) -> Optional[bytes]:
        frame = super().recv_frame()
        if frame is None:
            return None
        if len(frame) < _NONCE:
            raise ChannelError("short secure frame")
        try:
            return self._aead.decrypt(frame[:_NONCE], frame[_NONCE:], _CHANNEL_AAD)
        except InvalidTag as exc:
            raise ChannelError("secure frame failed authentication") from exc


def _stream(sock: socket.socket, psk: Optional[bytes], max_frame: int) -> FrameStream:
    return SecureFrameStream(sock, psk, max_frame) if psk else FrameStream(sock, max_frame)


MessageHandler = Callable[[WireMessage, bool], WireMessage]


class _ConnectionHandler(socketserver.BaseRequestHandler):
    server: "NodeServer"

    def handle(self) -> None:
        srv = self.server
        stream = _stream(self.request, srv.psk, srv.max_frame)
        while True:
            try:
                frame = stream.recv_frame()
            except (TransportError, OSError) as exc:
                logger.info("closing connection from %s: %s", self.client_address, exc)
                return
            if frame is None:
                return
            try:
                msg = wire.decode(frame)
            except MalformedMessage:
                reply: WireMessage = wire.Reject(int(wire.RejectCode.MALFORMED))
            else:
                with srv.dispatch_lock:
                    reply = srv.message_handler(msg, stream.secure)
            try:
                stream.send_frame(wire.encode(reply))
            except (TransportError, OSError) as exc:
                logger.info("send to %s failed: %s", self.client_address, exc)
                return


class NodeServer(socketserver.ThreadingTCPServer):
    """Threaded TCP server; message handling is serialised by ``dispatch_lock``."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(
        self,
        address: Tuple[str, int],
        handler: MessageHandler,
        psk: Optional[bytes] = None,
        max_frame: int = MAX_FRAME,
    ) -> None:
        self.message_handler = handler
        self.psk = psk
        self.max_frame = max_frame
        self.dispatch_lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None
        super().__init__(address, _ConnectionHandler)

    @property
    def address(self) -> Tuple[str, int]:
        host, port = self.server_address[:2]
        return host, port

    def start(self) -> "NodeServer":
        self._thread = threading.Thread(
            target=self.serve_forever, kwargs={"poll_interval": 0.05}, name="hetauth-server", daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "NodeServer":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(
    address: Tuple[str, int],
    handler: MessageHandler,
    psk: Optional[bytes] = None,
    max_frame: int = MAX_FRAME,
) -> NodeServer:
    """Bind and start serving in a background thread."""
    try:
        server = NodeServer(address, handler, psk, max_frame)
    except OSError as exc:
        raise TransportError(f"cannot bind {address[0]}:{address[1]}: {exc}") from exc
    return server.start()


class Client:
    def __init__(self, sock: socket.socket, psk: Optional[bytes] = None, max_frame: int = MAX_FRAME) -> None:
        self.sock = sock
        self.stream = _stream(sock, psk, max_frame)
        self.sent: List[bytes] = []
        self.received: List[bytes] = []

    def request(self, msg: WireMessage) -> WireMessage:
        return wire.decode(self.request_raw(wire.encode(msg)))

    def request_raw(self, payload: bytes) -> bytes:
        try:
            self.stream.send_frame(payload)
            self.sent.append(payload)
            reply = self.stream.recv_frame()
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        if reply is None:
            raise TransportError("server closed the connection")
        self.received.append(reply)
        return reply

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self) -> "Client":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def connect(address: Tuple[str, int], psk: Optional[bytes] = None, timeout: float = 10.0) -> Client:
    try:
        sock = socket.create_connection(address, timeout=timeout)
    except OSError as exc:
        raise ConnectError(f"cannot connect to {address[0]}:{address[1]}: {exc}") from exc
    return Client(sock, psk)


def parse_address(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        raise ValueError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)
