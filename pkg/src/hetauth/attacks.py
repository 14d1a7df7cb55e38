"""Executable attack scenarios against the engine over the simulated network.

Each ``run_*`` function is deterministic for a given seed and returns a
:class:`Verdict`.  Adversary code only ever sees public parameters, the
sensor's published key and bytes observed on the wire; where a scenario needs
an honest party's cooperation (the user confirming a tampered exchange) it
drives that party through its normal API.

Default backends differ per scenario.  Statistical checks (tamper, DOS) run on
``toy-wide`` because at q = 1009 a 1/q hash collision is a routine event, and
anonymity/impersonation default to the production curve.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from hetauth import scheme, wire
from hetauth.algebra import get_backend, scalar_random
from hetauth.engine import Deployment, FreshnessPolicy, Phase, deploy
from hetauth.errors import AuthenticationFailed
from hetauth.instrument import OpCounter, counting
from hetauth.runner import attach, handshake_sim, sensor_node
from hetauth.scheme import SensorPublicKey, UserCredential
from hetauth.transport import DUPLICATE, DeliveryEvent, SimClock, SimNetwork
from hetauth.wire import MacConfirm, ServiceRequest


@dataclass
class Step:
    name: str
    expected: Any
    observed: Any

    @property
    def ok(self) -> bool:
        return self.expected == self.observed


@dataclass
class Verdict:
    scenario: str
    seed: int
    backend: str
    steps: List[Step] = field(default_factory=list)
    report: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.steps) and all(s.ok for s in self.steps)

    def check(self, name: str, expected: Any, observed: Any) -> Step:
        step = Step(name, expected, observed)
        self.steps.append(step)
        return step

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "backend": self.backend,
            "passed": self.passed,
            "steps": [
                {"name": s.name, "expected": s.expected, "observed": s.observed, "ok": s.ok}
                for s in self.steps
            ],
            "report": self.report,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=str)

    def to_text(self) -> str:
        lines = [f"{self.scenario} [{self.backend}, seed={self.seed}]: {'PASS' if self.passed else 'FAIL'}"]
        for s in self.steps:
            mark = "ok " if s.ok else "BAD"
            lines.append(f"  {mark} {s.name}: expected={s.expected!r} observed={s.observed!r}")
        for k, v in self.report.items():
            lines.append(f"  - {k}: {v}")
        return "\n".join(lines)


def _setup(seed: int, backend: str, users: int = 1) -> tuple[Deployment, SimNetwork, SimClock]:
    clock = SimClock()
    net = SimNetwork(seed, clock=clock)
    dep = deploy(get_backend(backend), random.Random(seed), users=users, clock=clock)
    attach(net, dep)
    net.attach("adversary", lambda src, payload: (None, "observed"))
    return dep, net, clock


def _sensor_decisions(events) -> List[str]:
    return [e.decision for e in events if e.dst == "sensor"]


def _public_sensor_key(dep: Deployment) -> SensorPublicKey:
    info = dep.sensor.info()
    b = dep.params.backend
    return SensorPublicKey(b.decode_g1(info.T), b.decode_g1(info.PK_c1), b.decode_scalar(info.gamma))


def _request(R2, sigma: scheme.Ciphertext, t_c: int, params) -> ServiceRequest:
    return ServiceRequest(
        R2=R2.encode(),
        c=params.backend.encode_scalar(sigma.c),
        R1=sigma.R1.encode(),
        r1=sigma.r1,
        r2=sigma.r2,
        U=sigma.U.encode(),
        t_c=t_c,
    )


def run_replay_attack(seed: int = 0, backend: str = "toy") -> Verdict:
    v = Verdict("replay", seed, backend)
    dep, net, clock = _setup(seed, backend)
    captured: List[bytes] = []
    net.taps.append(lambda e: captured.append(e.payload) if e.msg_type == "service_request" else None)

    first = handshake_sim(net, dep)
    v.check("original delivery", "accept", first.decisions[0] if first.decisions else None)
    v.check("original completes with equal keys", True, first.ok)

    original = captured[0]
    net.send("adversary", "sensor", original)
    v.check("in-window resend", ["reject:replayed"], _sensor_decisions(net.run()))

    clock.advance(2 * dep.params.delta_t)
    net.send("adversary", "sensor", original)
    v.check("after-window resend", ["reject:stale-timestamp"], _sensor_decisions(net.run()))

    dup = handshake_sim(net, dep, fault=DUPLICATE)
    v.check("network duplicate", ["accept", "reject:replayed"], [d for d in dup.decisions if d.startswith(("accept", "reject"))])
    v.report["delta_t_ms"] = dep.params.delta_t
    v.report["replay_cache_entries"] = len(dep.sensor.policy)
    return v


def run_dos_attack(seed: int = 0, volume: int = 1000, backend: str = "toy-wide") -> Verdict:
    """Flood the sensor with well-formed requests carrying made-up accounts."""
    v = Verdict("dos", seed, backend)
    dep, net, clock = _setup(seed, backend)
    params = dep.params
    adv_rng = random.Random(seed ^ 0xD05)
    mallory = scheme.user_keygen(b"mallory", params, adv_rng)
    pk_c = _public_sensor_key(dep)

    bogus = OpCounter()
    honest = None
    for i in range(volume):
        if i == volume // 2:
            honest = handshake_sim(net, dep)
        fake = UserCredential(scalar_random(adv_rng, params.q) * params.P, 0, 0)
        m = adv_rng.getrandbits(params.n).to_bytes(params.n_bytes, "big")
        R2, sigma = scheme.signcrypt(mallory, fake, pk_c, m, params, adv_rng)
        net.send("adversary", "sensor", wire.encode(_request(R2, sigma, clock(), params)))
        with counting(bogus):
            net.run()
    if honest is None:
        honest = handshake_sim(net, dep)

    work = bogus.total("sensor", "authentication")
    honest_acd = dep.user.credential.Acd.encode()
    bogus_sessions = sum(1 for acd in dep.sensor.sessions if acd != honest_acd)
    reasons = {r.value: n for r, n in dep.sensor.rejections.items() if n}
    v.check("bogus rejected as unknown-account", volume, reasons.get("unknown-account", 0))
    v.check("sessions established by bogus requests", 0, bogus_sessions)
    v.check("pairings spent on bogus requests", 0, work.pairings)
    v.check("digest/key/MAC evaluations on bogus requests", 0, work.labels["h1"] + work.labels["mac"])
    v.check("interleaved honest request established", True, honest.ok)
    v.report["volume"] = volume
    v.report["work_total"] = work.as_dict()
    v.report["work_per_request"] = {k: n / volume for k, n in work.as_dict().items()}
    v.report["hash_calls"] = dict(work.labels)
    v.report["rejections"] = reasons
    return v


def service_request_fields(payload: bytes) -> List[tuple[str, int, int]]:
    """``(name, start, end)`` byte spans of a ServiceRequest, header included."""
    spans = [("header", 0, wire.HEADER_SIZE)]
    pos = wire.HEADER_SIZE
    for name, _ in ServiceRequest.SCHEMA:
        n = int.from_bytes(payload[pos : pos + 2], "big")
        spans.append((f"{name}.len", pos, pos + 2))
        spans.append((name, pos + 2, pos + 2 + n))
        pos += 2 + n
    return spans


def _field_of(spans, byte_index: int) -> str:
    for name, start, end in spans:
        if start <= byte_index < end:
            return name
    return "?"


def _flip(data: bytes, bit: int) -> bytes:
    out = bytearray(data)
    out[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(out)


def run_tamper_attack(seed: int = 0, backend: str = "toy-wide", samples: Optional[int] = None) -> Verdict:
    """Flip single bits of one pinned service request.

    Every flip must be refused by the sensor or, if the sensor accepts, the
    user must reject the returned MAC.  Exhaustive on dlog-transparent
    backends unless ``samples`` is given; 1000 sampled flips otherwise.
    """
    v = Verdict("tamper", seed, backend)
    b = get_backend(backend)
    clock = SimClock()
    dep = deploy(b, random.Random(seed), clock=clock)
    user, sensor = dep.user, dep.sensor
    id_c = sensor.id_c
    request = wire.encode(user.begin_auth(id_c))
    snapshot = dict(user.pending)
    handler = sensor_node(sensor)
    spans = service_request_fields(request)

    nbits = len(request) * 8
    if samples is None and b.oracle_dlog:
        positions = list(range(nbits))
    else:
        positions = sorted(random.Random(seed).sample(range(nbits), min(samples or 1000, nbits)))

    outcomes: Counter = Counter()
    by_field: Dict[str, Counter] = {}
    breaches: List[Dict[str, Any]] = []

    def deliver(payload: bytes) -> str:
        sensor.policy = FreshnessPolicy(dep.params.delta_t)
        user.pending = dict(snapshot)
        user.phase = Phase.AWAITING_CONFIRM
        reply, decision = handler("adversary", payload)
        if decision != "accept":
            return decision
        try:
            user.complete_auth(wire.decode(reply), id_c)
        except AuthenticationFailed as exc:
            return f"user:{exc.reason.value}"
        return "accepted-by-both"

    for bit in positions:
        outcome = deliver(_flip(request, bit))
        fld = _field_of(spans, bit // 8)
        outcomes[outcome] += 1
        by_field.setdefault(fld, Counter())[outcome] += 1
        if outcome == "accepted-by-both":
            breaches.append({"bit": bit, "field": fld})

    v.check("unmodified request accepted", "accepted-by-both", deliver(request))
    v.check("flips accepted by both parties", 0, len(breaches))
    v.report["bits_tested"] = len(positions)
    v.report["exhaustive"] = len(positions) == nbits
    v.report["request_bytes"] = len(request)
    v.report["outcomes"] = dict(outcomes)
    v.report["by_field"] = {k: dict(c) for k, c in by_field.items()}
    if breaches:
        v.report["breaches"] = breaches[:20]
    return v


def run_impersonation_attack(seed: int = 0, attempts: int = 10_000, backend: str = "production") -> Verdict:
    """Forgery attempts by an adversary holding only public values and transcripts."""
    v = Verdict("impersonation", seed, backend)
    dep, net, clock = _setup(seed, backend)
    params = dep.params
    handler = sensor_node(dep.sensor)
    adv = random.Random(seed ^ 0x1A7)

    observed: List[bytes] = []
    net.taps.append(lambda e: observed.append(e.payload) if e.msg_type == "service_request" else None)
    honest = handshake_sim(net, dep)
    v.check("honest handshake", True, honest.ok)
    seen = wire.decode(observed[0])

    def point():
        return scalar_random(adv, params.q) * params.P

    def attempt(msg: ServiceRequest) -> str:
        dep.sensor.policy = FreshnessPolicy(params.delta_t)
        return handler("adversary", wire.encode(msg))[1]

    random_accepts = 0
    reasons: Counter = Counter()
    for _ in range(attempts):
        forged = ServiceRequest(
            R2=point().encode(),
            c=params.backend.encode_scalar(scalar_random(adv, params.q)),
            R1=point().encode(),
            r1=adv.getrandbits(params.n).to_bytes(params.n_bytes, "big"),
            r2=adv.getrandbits(params.n).to_bytes(params.n_bytes, "big"),
            U=point().encode(),
            t_c=clock(),
        )
        decision = attempt(forged)
        reasons[decision] += 1
        random_accepts += decision == "accept"
    v.check(f"{attempts} random forgeries accepted", 0, random_accepts)

    structured = 0
    for _ in range(100):
        c = params.backend.encode_scalar(scalar_random(adv, params.q))
        d = attempt(ServiceRequest(seen.R2, c, seen.R1, seen.r1, seen.r2, seen.U, clock()))
        structured += d == "accept"
    v.check("observed R1 with fresh c accepted", 0, structured)

    # stolen account identifier, adversary's own signing key
    mallory = scheme.user_keygen(b"mallory", params, adv)
    stolen = UserCredential(dep.user.credential.Acd, 0, 0)
    pk_c = _public_sensor_key(dep)
    stolen_decisions = Counter()
    for _ in range(20):
        m = adv.getrandbits(params.n).to_bytes(params.n_bytes, "big")
        R2, sigma = scheme.signcrypt(mallory, stolen, pk_c, m, params, adv)
        stolen_decisions[attempt(_request(R2, sigma, clock(), params))] += 1
    v.check("stolen Acd without x_p", {"reject:bad-signature": 20}, dict(stolen_decisions))

    # sensor impersonation: answer a genuine request with a guessed MAC
    user = dep.user
    user.begin_auth(dep.sensor.id_c)
    try:
        user.complete_auth(MacConfirm(bytes(adv.getrandbits(8) for _ in range(32))), dep.sensor.id_c)
        sensor_forgery = "established"
    except AuthenticationFailed as exc:
        sensor_forgery = exc.reason.value
    v.check("forged sensor confirmation", "bad-mac", sensor_forgery)
    v.report["random_forgery_outcomes"] = dict(reasons)
    return v


def run_anonymity_check(seed: int = 0, sessions: int = 100, backend: str = "production") -> Verdict:
    """Scan authentication-phase traffic of two users for identifying bytes."""
    v = Verdict("anonymity", seed, backend)
    dep, net, clock = _setup(seed, backend, users=2)
    traffic: List[DeliveryEvent] = []
    net.taps.append(traffic.append)

    established = 0
    for _ in range(sessions):
        for idx in range(len(dep.users)):
            established += handshake_sim(net, dep, user_index=idx).ok
    v.check("handshakes established", sessions * len(dep.users), established)

    needles = {}
    for user in dep.users:
        needles[f"ID_p[{user.id_p.decode()}]"] = user.id_p
        needles[f"Acd[{user.id_p.decode()}]"] = user.credential.Acd.encode()
    hits = [
        {"needle": name, "msg": ev.msg_type, "src": ev.src}
        for ev in traffic
        for name, needle in needles.items()
        if needle in ev.payload
    ]
    v.check("identifier hits in auth-phase traffic", 0, len(hits))

    r2_by_user: Dict[str, List[bytes]] = {}
    for ev in traffic:
        if ev.msg_type == "service_request":
            r2_by_user.setdefault(ev.src, []).append(wire.decode(ev.payload).R2)
    all_r2 = [r2 for vals in r2_by_user.values() for r2 in vals]
    v.check("repeated R2 values across all sessions", 0, len(all_r2) - len(set(all_r2)))
    v.report["r2_values"] = {src: len(vals) for src, vals in r2_by_user.items()}

    reg = dep.users[0].registration_request().encode()
    v.check("registration request carries ID_p (secure channel, not scanned)", True, dep.users[0].id_p in reg)
    v.report["messages_scanned"] = len(traffic)
    v.report["sessions_per_user"] = sessions
    if hits:
        v.report["hits"] = hits[:20]
    return v


SCENARIOS: Dict[str, Callable[..., Verdict]] = {
    "replay": run_replay_attack,
    "dos": run_dos_attack,
    "tamper": run_tamper_attack,
    "impersonation": run_impersonation_attack,
    "anonymity": run_anonymity_check,
}


def run_scenario(name: str, seed: int = 0, backend: Optional[str] = None, **kwargs) -> Verdict:
    try:
        fn = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None
    if backend is not None:
        kwargs["backend"] = backend
    return fn(seed=seed, **kwargs)
