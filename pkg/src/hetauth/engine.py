"""Stateful gateway, user and sensor parties.

Parties exchange :mod:`hetauth.wire` message objects and never touch sockets.
Each party serialises calls with its own lock, so one party is a single-writer
state machine while distinct parties can run in parallel.

Service-request processing order at the sensor:

1. timestamp freshness ``|t_c - now| < delta_t``
2. field widths and point/scalar decoding
3. recovery of R1, k, m (two scalar multiplications, no pairings)
4. account lookup and signature check; ``lookup="account-index"`` finds the
   directory entry by ``R2 - R1`` first, ``"signature-first"`` tries each
   registered PK_p before comparing the account
5. replay cache on ``(Acd, t_c)``
6. digest, session key, MAC

Nothing past step 4 runs for an unregistered account.
"""

from __future__ import annotations

import enum
import heapq
import hmac
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from hetauth import scheme
from hetauth.algebra import DecodeError, G1Element, PairingBackend, random_bits
from hetauth.errors import (
    AuthenticationFailed,
    FailureReason,
    RegistrationError,
    RejectReason,
    Rejected,
    StateError,
)
from hetauth.instrument import op_scope
from hetauth.scheme import (
    Ciphertext,
    PartialKey,
    SensorPublicKey,
    SystemParams,
    UserCredential,
)
from hetauth.wire import (
    DirectoryEntry,
    DirectoryPush,
    MacConfirm,
    Reject,
    RejectCode,
    SensorInfo,
    SensorInfoRequest,
    SensorRegRequest,
    SensorRegResponse,
    ServiceRequest,
    UserRegRequest,
    UserRegResponse,
    WireMessage,
)

Clock = Callable[[], int]

ACCOUNT_INDEX = "account-index"
SIGNATURE_FIRST = "signature-first"


def wall_clock() -> int:
    """Milliseconds since the epoch."""
    return time.time_ns() // 1_000_000


class Phase(str, enum.Enum):
    UNINITIALIZED = "uninitialized"
    REGISTERED = "registered"
    AWAITING_CONFIRM = "awaiting-confirm"
    ESTABLISHED = "established"
    FAILED = "failed"


_ALLOWED = {
    Phase.UNINITIALIZED: {Phase.REGISTERED},
    Phase.REGISTERED: {Phase.AWAITING_CONFIRM, Phase.ESTABLISHED},
    Phase.AWAITING_CONFIRM: {Phase.AWAITING_CONFIRM, Phase.ESTABLISHED},
    Phase.ESTABLISHED: {Phase.AWAITING_CONFIRM, Phase.ESTABLISHED},
    Phase.FAILED: {Phase.AWAITING_CONFIRM},
}


@dataclass(frozen=True)
class Session:
    key: bytes
    h1: int
    peer: bytes
    established_at: int


class FreshnessPolicy:
    """Timestamp window plus a replay cache of ``(account, t_c)`` pairs.

    Entries expire once ``now - t_c >= delta_t``; past that point the
    timestamp check alone rejects the message.
    """

    def __init__(self, delta_t: int = scheme.DEFAULT_DELTA_T_MS, max_entries: int = 1 << 16) -> None:
        if delta_t <= 0:
            raise ValueError("delta_t must be positive")
        self.delta_t = delta_t
        self.max_entries = max_entries
        self._seen: Dict[Tuple[bytes, int], int] = {}
        self._expiry: List[Tuple[int, bytes]] = []

    def is_fresh(self, t_c: int, now: int) -> bool:
        return abs(t_c - now) < self.delta_t

    def prune(self, now: int) -> None:
        while self._expiry and now - self._expiry[0][0] >= self.delta_t:
            t_c, account = heapq.heappop(self._expiry)
            self._seen.pop((account, t_c), None)

    def seen(self, account: bytes, t_c: int, now: int) -> bool:
        self.prune(now)
        return (account, t_c) in self._seen

    def remember(self, account: bytes, t_c: int, now: int) -> None:
        self.prune(now)
        if len(self._seen) >= self.max_entries:
            raise Rejected(RejectReason.REPLAYED, "replay cache full")
        self._seen[(account, t_c)] = now
        heapq.heappush(self._expiry, (t_c, account))

    def oldest_age(self, now: int) -> Optional[int]:
        if not self._expiry:
            return None
        return now - self._expiry[0][0]

    def __len__(self) -> int:
        return len(self._seen)


class Party:
    role = "party"

    def __init__(self, params: SystemParams, rng: Optional[random.Random] = None, clock: Optional[Clock] = None) -> None:
        self.params = params
        self.rng = rng or scheme.default_rng()
        self.clock = clock or wall_clock
        self.phase = Phase.UNINITIALIZED
        self._lock = threading.RLock()

    @property
    def backend(self) -> PairingBackend:
        return self.params.backend

    def _transition(self, new: Phase) -> None:
        if new is Phase.FAILED:
            self.phase = new
            return
        if new not in _ALLOWED[self.phase]:
            raise StateError(f"{self.role}: {self.phase.value} -> {new.value} not allowed")
        self.phase = new

    def _g1(self, data: bytes) -> G1Element:
        try:
            return self.backend.decode_g1(data)
        except DecodeError as exc:
            raise Rejected(RejectReason.MALFORMED, str(exc)) from exc

    def _scalar(self, data: bytes) -> int:
        try:
            return self.backend.decode_scalar(data)
        except DecodeError as exc:
            raise Rejected(RejectReason.MALFORMED, str(exc)) from exc

    def _enc(self, k: int) -> bytes:
        return self.backend.encode_scalar(k)


@dataclass(frozen=True)
class _DirectoryRecord:
    Acd: G1Element
    sigma1: int
    PK_p: G1Element
    delta: int


class Gateway(Party):
    """Trusted authority: issues user credentials and sensor partial keys."""

    role = "gwn"

    def __init__(self, params: SystemParams, master: scheme.MasterKey, rng: Optional[random.Random] = None, clock: Optional[Clock] = None) -> None:
        super().__init__(params, rng, clock)
        self._master = master
        self._users: Dict[bytes, DirectoryEntry] = {}
        self.sensors: Dict[bytes, SensorRegResponse] = {}
        self._transition(Phase.REGISTERED)

    @classmethod
    def create(
        cls,
        backend: PairingBackend,
        rng: Optional[random.Random] = None,
        n: int = scheme.DEFAULT_N,
        delta_t: int = scheme.DEFAULT_DELTA_T_MS,
        clock: Optional[Clock] = None,
    ) -> "Gateway":
        rng = rng or scheme.default_rng()
        with op_scope("gwn", "setup"):
            params, master = scheme.setup(backend, n=n, delta_t=delta_t, rng=rng)
        return cls(params, master, rng, clock)

    def register_user(self, req: UserRegRequest) -> UserRegResponse:
        with self._lock, op_scope("gwn", "registration", "issue-credential"):
            PK_p = self._g1(req.PK_p)
            if PK_p.is_identity():
                raise Rejected(RejectReason.MALFORMED, "identity public key")
            cred = scheme.issue_credential(self._master, req.id_p, PK_p, self.params, self.rng)
            entry = DirectoryEntry(
                cred.Acd.encode(), self._enc(cred.sigma1), PK_p.encode(), self._enc(cred.delta)
            )
            self._users[bytes(req.id_p)] = entry
            return UserRegResponse(entry.Acd, entry.sigma1, entry.delta)

    def register_sensor(self, req: SensorRegRequest) -> Tuple[SensorRegResponse, DirectoryPush]:
        with self._lock, op_scope("gwn", "registration", "issue-partial-key"):
            if not req.id_c:
                raise Rejected(RejectReason.MALFORMED, "empty sensor identity")
            pk = scheme.issue_partial_key(self._master, req.id_c, self.params, self.rng)
            resp = SensorRegResponse(pk.T.encode(), self._enc(pk.d), self._enc(pk.gamma))
            self.sensors[bytes(req.id_c)] = resp
            return resp, self.directory_push()

    def directory_push(self) -> DirectoryPush:
        """Account records for sensors; real identities are not included."""
        with self._lock:
            return DirectoryPush(tuple(self._users.values()))

    def registered_ids(self) -> List[bytes]:
        return list(self._users)


@dataclass(frozen=True)
class _Pending:
    id_c: bytes
    Acd: G1Element
    c: int
    R1: G1Element
    t_c: int


class User(Party):
    """PKI-side user holding ``x_p`` and a gateway-issued credential."""

    role = "user"

    def __init__(self, params: SystemParams, id_p: bytes, rng: Optional[random.Random] = None, clock: Optional[Clock] = None) -> None:
        super().__init__(params, rng, clock)
        self.id_p = bytes(id_p)
        self.keys: Optional[scheme.UserKeyPair] = None
        self.credential: Optional[UserCredential] = None
        self.sensors: Dict[bytes, SensorPublicKey] = {}
        self.pending: Dict[bytes, _Pending] = {}
        self.sessions: Dict[bytes, Session] = {}
        self._last: Optional[bytes] = None

    @property
    def session(self) -> Optional[Session]:
        if self.phase is Phase.ESTABLISHED and self._last is not None:
            return self.sessions.get(self._last)
        return None

    def registration_request(self) -> UserRegRequest:
        with self._lock, op_scope("user", "registration", "keygen"):
            if self.keys is None:
                self.keys = scheme.user_keygen(self.id_p, self.params, self.rng)
            return UserRegRequest(self.id_p, self.keys.PK_p.encode())

    def install_credential(self, resp: UserRegResponse) -> UserCredential:
        with self._lock, op_scope("user", "registration", "verify-credential"):
            if self.keys is None:
                raise StateError("no key pair; call registration_request first")
            try:
                cred = UserCredential(self._g1(resp.Acd), self._scalar(resp.sigma1), self._scalar(resp.delta))
            except Rejected as exc:
                self._transition(Phase.FAILED)
                raise RegistrationError(f"malformed credential: {exc}") from exc
            if not scheme.verify_credential(cred, self.params):
                self._transition(Phase.FAILED)
                raise RegistrationError("credential check Acd = sigma1 P - delta P_pub failed")
            self.credential = cred
            if self.phase is Phase.UNINITIALIZED:
                self._transition(Phase.REGISTERED)
            return cred

    def add_sensor(self, info: SensorInfo) -> SensorPublicKey:
        with self._lock:
            try:
                pk = SensorPublicKey(self._g1(info.T), self._g1(info.PK_c1), self._scalar(info.gamma))
            except Rejected as exc:
                raise RegistrationError(f"malformed sensor info: {exc}") from exc
            self.sensors[bytes(info.id_c)] = pk
            return pk

    def begin_auth(self, id_c: bytes, m: Optional[bytes] = None) -> ServiceRequest:
        """Build ``{R2, sigma, t_c}``; supersedes any pending run with ``id_c``."""
        with self._lock, op_scope("user", "authentication", "signcrypt"):
            if self.credential is None or self.keys is None:
                raise StateError("user is not registered")
            id_c = bytes(id_c)
            if id_c not in self.sensors:
                raise StateError(f"unknown sensor {id_c!r}")
            if m is None:
                m = random_bits(self.rng, self.params.n)
            R2, sigma = scheme.signcrypt(self.keys, self.credential, self.sensors[id_c], m, self.params, self.rng)
            t_c = self.clock()
            self.pending[id_c] = _Pending(id_c, self.credential.Acd, sigma.c, sigma.R1, t_c)
            self._transition(Phase.AWAITING_CONFIRM)
            return ServiceRequest(
                R2=R2.encode(),
                c=self._enc(sigma.c),
                R1=sigma.R1.encode(),
                r1=sigma.r1,
                r2=sigma.r2,
                U=sigma.U.encode(),
                t_c=t_c,
            )

    def complete_auth(self, msg: MacConfirm, id_c: Optional[bytes] = None) -> Session:
        """Check ``M1`` against the locally derived tag; establishes on success."""
        with self._lock, op_scope("user", "authentication", "confirm"):
            if id_c is None and len(self.pending) == 1:
                id_c = next(iter(self.pending))
            pend = self.pending.pop(bytes(id_c), None) if id_c is not None else None
            if pend is None:
                self._transition(Phase.FAILED)
                raise AuthenticationFailed(FailureReason.NO_PENDING_SESSION)
            secrets_ = scheme.derive_session(pend.id_c, pend.t_c, pend.Acd, pend.c, pend.R1, self.params)
            if not hmac.compare_digest(bytes(msg.m1), secrets_.m1):
                self._transition(Phase.FAILED)
                raise AuthenticationFailed(FailureReason.BAD_MAC)
            session = Session(secrets_.key, secrets_.h1, pend.id_c, self.clock())
            self.sessions[pend.id_c] = session
            self._last = pend.id_c
            self._transition(Phase.ESTABLISHED)
            return session


class Sensor(Party):
    """CLC-side sensor node terminating the handshake."""

    role = "sensor"

    def __init__(
        self,
        params: SystemParams,
        id_c: bytes,
        rng: Optional[random.Random] = None,
        clock: Optional[Clock] = None,
        policy: Optional[FreshnessPolicy] = None,
        lookup: str = ACCOUNT_INDEX,
    ) -> None:
        super().__init__(params, rng, clock)
        if lookup not in (ACCOUNT_INDEX, SIGNATURE_FIRST):
            raise ValueError(f"unknown lookup policy {lookup!r}")
        self.id_c = bytes(id_c)
        self.lookup = lookup
        self.policy = policy or FreshnessPolicy(params.delta_t)
        self.keys: Optional[scheme.SensorKeyMaterial] = None
        self.directory: Dict[bytes, _DirectoryRecord] = {}
        self.sessions: Dict[bytes, Session] = {}
        self.rejections: Dict[RejectReason, int] = {r: 0 for r in RejectReason}
        self.last_rejection: Optional[Rejected] = None

    @property
    def session(self) -> Optional[Session]:
        if self.phase is not Phase.ESTABLISHED or not self.sessions:
            return None
        return max(self.sessions.values(), key=lambda s: s.established_at)

    def registration_request(self) -> SensorRegRequest:
        return SensorRegRequest(self.id_c)

    def install_partial_key(self, resp: SensorRegResponse) -> scheme.SensorKeyMaterial:
        with self._lock:
            with op_scope("sensor", "registration", "verify-partial-key"):
                try:
                    pk = PartialKey(self._g1(resp.T), self._scalar(resp.d), self._scalar(resp.gamma))
                except Rejected as exc:
                    self._transition(Phase.FAILED)
                    raise RegistrationError(f"malformed partial key: {exc}") from exc
                if not scheme.verify_partial_key(pk.T, pk.d, pk.gamma, self.params):
                    self._transition(Phase.FAILED)
                    raise RegistrationError("partial key pairing check failed")
            with op_scope("sensor", "registration", "finalize"):
                self.keys = scheme.sensor_finalize_keys(self.id_c, pk, self.params, self.rng)
            self._transition(Phase.REGISTERED)
            return self.keys

    def install_directory(self, push: DirectoryPush) -> int:
        """Verify and store pushed accounts; all-or-nothing."""
        with self._lock, op_scope("sensor", "registration", "verify-credential"):
            if self.keys is None:
                raise StateError("partial key must be installed first")
            records = []
            for entry in push.entries:
                try:
                    rec = _DirectoryRecord(
                        self._g1(entry.Acd), self._scalar(entry.sigma1), self._g1(entry.PK_p), self._scalar(entry.delta)
                    )
                except Rejected as exc:
                    raise RegistrationError(f"malformed directory entry: {exc}") from exc
                if entry.Acd in self.directory and self.directory[entry.Acd] == rec:
                    continue
                if not scheme.verify_credential(UserCredential(rec.Acd, rec.sigma1, rec.delta), self.params):
                    raise RegistrationError("directory credential check failed")
                records.append(rec)
            for rec in records:
                self.directory[rec.Acd.encode()] = rec
            return len(records)

    def info(self) -> SensorInfo:
        if self.keys is None:
            raise StateError("sensor has no keys yet")
        k = self.keys
        return SensorInfo(self.id_c, k.T.encode(), k.PK_c1.encode(), self._enc(k.gamma))

    def handle_request(self, msg: ServiceRequest) -> MacConfirm:
        with self._lock:
            try:
                return self._handle(msg)
            except Rejected as exc:
                self.rejections[exc.reason] += 1
                self.last_rejection = exc
                raise

    def _decode_request(self, msg: ServiceRequest) -> Tuple[G1Element, Ciphertext]:
        n_bytes = self.params.n_bytes
        if len(msg.r1) != n_bytes or len(msg.r2) != n_bytes:
            raise Rejected(RejectReason.MALFORMED, "r1/r2 width")
        sigma = Ciphertext(
            c=self._scalar(msg.c),
            R1=self._g1(msg.R1),
            r1=bytes(msg.r1),
            r2=bytes(msg.r2),
            U=self._g1(msg.U),
        )
        return self._g1(msg.R2), sigma

    def _handle(self, msg: ServiceRequest) -> MacConfirm:
        if self.keys is None:
            raise StateError("sensor is not registered")
        now = self.clock()
        if not self.policy.is_fresh(msg.t_c, now):
            raise Rejected(RejectReason.STALE_TIMESTAMP)
        params = self.params
        with op_scope("sensor", "authentication", "unsigncrypt"):
            R2, sigma = self._decode_request(msg)
            rec = scheme.recover(self.keys, sigma, params)
            if self.lookup == ACCOUNT_INDEX:
                account = self.directory.get((R2 - rec.R1).encode())
                if account is None:
                    raise Rejected(RejectReason.UNKNOWN_ACCOUNT)
                if not scheme.check_signature(sigma, rec.m, account.PK_p, rec.R1, params):
                    raise Rejected(RejectReason.BAD_SIGNATURE)
            else:
                signer = next(
                    (a for a in self.directory.values() if scheme.check_signature(sigma, rec.m, a.PK_p, rec.R1, params)),
                    None,
                )
                if signer is None:
                    raise Rejected(RejectReason.BAD_SIGNATURE)
                if R2 - rec.R1 != signer.Acd:
                    raise Rejected(RejectReason.UNKNOWN_ACCOUNT)
                account = signer
        acd_bytes = account.Acd.encode()
        if self.policy.seen(acd_bytes, msg.t_c, now):
            raise Rejected(RejectReason.REPLAYED)
        with op_scope("sensor", "authentication", "key-agreement"):
            secrets_ = scheme.derive_session(self.id_c, msg.t_c, account.Acd, sigma.c, rec.R1, params)
        self.policy.remember(acd_bytes, msg.t_c, now)
        self.sessions[acd_bytes] = Session(secrets_.key, secrets_.h1, acd_bytes, now)
        self._transition(Phase.ESTABLISHED)
        return MacConfirm(secrets_.m1)

    def respond(self, msg: ServiceRequest) -> WireMessage:
        """Wire-facing wrapper: every refusal collapses to an opaque code."""
        try:
            return self.handle_request(msg)
        except Rejected as exc:
            if exc.reason is RejectReason.MALFORMED:
                return Reject(int(RejectCode.MALFORMED))
            return Reject(int(RejectCode.DENIED))


class ServiceNode:
    """Gateway and sensor co-hosted behind one message dispatcher.

    Registration messages are only honoured when ``secure`` is set, i.e. when
    they arrived over the pre-shared-key channel.
    """

    def __init__(self, gateway: Gateway, sensor: Sensor) -> None:
        self.gateway = gateway
        self.sensor = sensor
        self._lock = threading.Lock()

    def handle(self, msg: WireMessage, secure: bool = False) -> WireMessage:
        with self._lock:
            if isinstance(msg, ServiceRequest):
                return self.sensor.respond(msg)
            if isinstance(msg, SensorInfoRequest):
                if bytes(msg.id_c) not in (b"", self.sensor.id_c):
                    return Reject(int(RejectCode.DENIED))
                return self.sensor.info()
            if isinstance(msg, UserRegRequest):
                if not secure:
                    return Reject(int(RejectCode.UNSUPPORTED))
                try:
                    resp = self.gateway.register_user(msg)
                except Rejected:
                    return Reject(int(RejectCode.MALFORMED))
                self.sensor.install_directory(self.gateway.directory_push())
                return resp
            return Reject(int(RejectCode.UNSUPPORTED))


@dataclass
class Deployment:
    """A gateway, one sensor and registered users, wired in-process."""

    params: SystemParams
    gateway: Gateway
    sensor: Sensor
    users: List[User] = field(default_factory=list)

    @property
    def user(self) -> User:
        return self.users[0]


def register_user(gateway: Gateway, user: User, sensors: Tuple[Sensor, ...] = ()) -> UserCredential:
    cred = user.install_credential(gateway.register_user(user.registration_request()))
    for sensor in sensors:
        sensor.install_directory(gateway.directory_push())
        user.add_sensor(sensor.info())
    return cred


def deploy(
    backend: PairingBackend,
    rng: Optional[random.Random] = None,
    users: int = 1,
    clock: Optional[Clock] = None,
    id_c: bytes = b"sensor-0",
    delta_t: int = scheme.DEFAULT_DELTA_T_MS,
    lookup: str = ACCOUNT_INDEX,
    policy: Optional[FreshnessPolicy] = None,
) -> Deployment:
    """Run system setup and both registration steps over the secure channel."""
    rng = rng or scheme.default_rng()
    gateway = Gateway.create(backend, rng, delta_t=delta_t, clock=clock)
    params = gateway.params
    sensor = Sensor(params, id_c, rng, clock, policy=policy, lookup=lookup)
    resp, _ = gateway.register_sensor(sensor.registration_request())
    sensor.install_partial_key(resp)
    dep = Deployment(params, gateway, sensor)
    for i in range(users):
        user = User(params, f"user-{i}".encode(), rng, clock)
        register_user(gateway, user, (sensor,))
        dep.users.append(user)
    return dep
