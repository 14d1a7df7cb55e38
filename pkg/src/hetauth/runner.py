"""Drive parties over a transport.

Adapters turn a :class:`~hetauth.engine.Sensor` or
:class:`~hetauth.engine.User` into a simnet node handler; the ``handshake_*``
helpers run one authentication round end to end.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from hetauth import wire
from hetauth.algebra import get_backend
from hetauth.engine import Deployment, Gateway, Sensor, Session, User
from hetauth.errors import AuthenticationFailed, Rejected
from hetauth.transport import Client, Fault, NO_FAULT, SimClock, SimNetwork
from hetauth.wire import MacConfirm, MalformedMessage, Reject, RejectCode, ServiceRequest


def sensor_node(sensor: Sensor):
    def handle(src: str, payload: bytes) -> Tuple[Optional[bytes], str]:
        try:
            msg = wire.decode(payload)
        except MalformedMessage as exc:
            return wire.encode(Reject(int(RejectCode.MALFORMED))), f"reject:malformed({exc.kind})"
        if not isinstance(msg, ServiceRequest):
            return wire.encode(Reject(int(RejectCode.UNSUPPORTED))), "reject:unsupported"
        try:
            reply: wire.WireMessage = sensor.handle_request(msg)
        except Rejected as exc:
            code = RejectCode.MALFORMED if exc.reason.value == "malformed" else RejectCode.DENIED
            return wire.encode(Reject(int(code))), f"reject:{exc.reason.value}"
        return wire.encode(reply), "accept"

    return handle


def user_node(user: User, id_c: bytes):
    def handle(src: str, payload: bytes) -> Tuple[Optional[bytes], str]:
        try:
            msg = wire.decode(payload)
        except MalformedMessage:
            return None, "ignored:malformed"
        if isinstance(msg, Reject):
            user.pending.pop(id_c, None)
            return None, f"peer-rejected:{msg.code}"
        if not isinstance(msg, MacConfirm):
            return None, "ignored"
        try:
            user.complete_auth(msg, id_c)
        except AuthenticationFailed as exc:
            return None, f"failed:{exc.reason.value}"
        return None, "established"

    return handle


@dataclass
class HandshakeResult:
    user_session: Optional[Session]
    sensor_session: Optional[Session]
    request: bytes = b""
    confirm: bytes = b""
    decisions: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.user_session is not None
            and self.sensor_session is not None
            and self.user_session.key == self.sensor_session.key
        )


def attach(net: SimNetwork, dep: Deployment) -> None:
    net.attach("sensor", sensor_node(dep.sensor))
    for i, user in enumerate(dep.users):
        net.attach(f"user-{i}", user_node(user, dep.sensor.id_c))


def handshake_sim(
    net: SimNetwork,
    dep: Deployment,
    user_index: int = 0,
    fault: Fault = NO_FAULT,
    m: Optional[bytes] = None,
) -> HandshakeResult:
    """One authentication round over the simulated network."""
    user = dep.users[user_index]
    name = f"user-{user_index}"
    if name not in net.nodes:
        attach(net, dep)
    before = dict(dep.sensor.sessions)
    u_before = user.sessions.get(dep.sensor.id_c)
    req = wire.encode(user.begin_auth(dep.sensor.id_c, m))
    net.send(name, "sensor", req, fault)
    events = net.run()
    confirm = next((e.payload for e in events if e.dst == name and e.msg_type == "mac_confirm"), b"")
    acd = user.credential.Acd.encode()
    s_session = dep.sensor.sessions.get(acd)
    if s_session is not None and before.get(acd) is s_session:
        s_session = None
    u_session = user.sessions.get(dep.sensor.id_c)
    if u_session is u_before:
        u_session = None
    return HandshakeResult(
        user_session=u_session,
        sensor_session=s_session,
        request=req,
        confirm=confirm,
        decisions=[e.decision for e in events],
    )


def handshake_direct(dep: Deployment, user_index: int = 0, m: Optional[bytes] = None) -> HandshakeResult:
    """In-process round trip through the codec, no network model."""
    user = dep.users[user_index]
    req = wire.encode(user.begin_auth(dep.sensor.id_c, m))
    reply = wire.encode(dep.sensor.handle_request(wire.decode(req)))
    session = user.complete_auth(wire.decode(reply), dep.sensor.id_c)
    acd = user.credential.Acd.encode()
    return HandshakeResult(session, dep.sensor.sessions.get(acd), req, reply, ["accept", "established"])


def handshake_socket(client: Client, user: User, id_c: bytes, m: Optional[bytes] = None) -> HandshakeResult:
    req = user.begin_auth(id_c, m)
    req_bytes = wire.encode(req)
    reply_bytes = client.request_raw(req_bytes)
    reply = wire.decode(reply_bytes)
    if isinstance(reply, Reject):
        user.pending.pop(bytes(id_c), None)
        return HandshakeResult(None, None, req_bytes, reply_bytes, [f"peer-rejected:{reply.code}"])
    try:
        session = user.complete_auth(reply, id_c)
    except AuthenticationFailed as exc:
        return HandshakeResult(None, None, req_bytes, reply_bytes, [f"failed:{exc.reason.value}"])
    return HandshakeResult(session, None, req_bytes, reply_bytes, ["established"])


def record_transcript(seed: int, backend: str = "toy", m: Optional[bytes] = None) -> dict:
    """Every message of setup, registration and one handshake, hex-encoded.

    Deterministic in ``seed``: the same seed yields byte-identical output, so
    the result can be stored and byte-compared by other implementations.
    """
    rng = random.Random(seed)
    clock = SimClock()
    be = get_backend(backend)
    gateway = Gateway.create(be, rng, clock=clock)
    params = gateway.params
    messages: List[Tuple[str, str, bytes]] = []

    def log(src: str, dst: str, msg: wire.WireMessage) -> wire.WireMessage:
        raw = wire.encode(msg)
        messages.append((src, dst, raw))
        return wire.decode(raw)

    sensor = Sensor(params, b"sensor-0", rng, clock)
    req = log("sensor", "gwn", sensor.registration_request())
    resp, push = gateway.register_sensor(req)
    sensor.install_partial_key(log("gwn", "sensor", resp))

    user = User(params, b"user-0", rng, clock)
    ureq = log("user", "gwn", user.registration_request())
    user.install_credential(log("gwn", "user", gateway.register_user(ureq)))
    sensor.install_directory(log("gwn", "sensor", gateway.directory_push()))
    user.add_sensor(log("sensor", "user", sensor.info()))

    sreq = log("user", "sensor", user.begin_auth(sensor.id_c, m))
    clock.advance(5)
    conf = log("sensor", "user", sensor.handle_request(sreq))
    clock.advance(5)
    session = user.complete_auth(conf, sensor.id_c)
    return {
        "backend": be.name,
        "seed": seed,
        "params": params.describe(),
        "messages": [
            {"src": s, "dst": d, "type": wire.MsgType(raw[1]).name.lower(), "hex": raw.hex()}
            for s, d, raw in messages
        ],
        "session_key": session.key.hex(),
    }
