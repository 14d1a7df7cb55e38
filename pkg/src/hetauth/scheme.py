"""PKI-to-CLC signcryption and the registration algorithms around it.

Everything here is stateless: callers supply parameters, keys and a random
source.  Notation follows the protocol: the gateway holds ``s`` with
``P_pub = sP``; a PKI user holds ``x_p`` with ``PK_p = x_p P`` and a credential
``(Acd, sigma1, delta)``; a CLC sensor holds the partial key ``(T, d, gamma)``
plus its own secret ``x_c`` with ``PK_c1 = x_c P``.
"""

from __future__ import annotations

import random
import secrets
import struct
from dataclasses import dataclass
from typing import Optional

from hetauth.algebra import (
    G1Element,
    GTElement,
    PairingBackend,
    random_bits,
    scalar_random,
)
from hetauth.errors import RejectReason, Rejected
from hetauth.hashes import HashSuite, encode_parts, xor_bytes

DEFAULT_N = 256
DEFAULT_DELTA_T_MS = 5000


def default_rng() -> random.Random:
    return secrets.SystemRandom()


@dataclass(frozen=True)
class SystemParams:
    backend: PairingBackend
    P: G1Element
    P_pub: G1Element
    g: GTElement
    l: int
    n: int
    hash: HashSuite
    delta_t: int = DEFAULT_DELTA_T_MS

    @property
    def q(self) -> int:
        return self.backend.q

    @property
    def n_bytes(self) -> int:
        return self.n // 8

    def describe(self) -> dict:
        return {
            "backend": self.backend.name,
            "l": self.l,
            "n": self.n,
            "delta_t_ms": self.delta_t,
            "g1_bytes": self.backend.g1_size,
            "scalar_bytes": self.backend.scalar_size,
            "P_pub": self.P_pub.encode().hex(),
        }


@dataclass(frozen=True)
class MasterKey:
    s: int


@dataclass(frozen=True)
class UserKeyPair:
    id_p: bytes
    x_p: int
    PK_p: G1Element


@dataclass(frozen=True)
class UserCredential:
    Acd: G1Element
    sigma1: int
    delta: int


@dataclass(frozen=True)
class PartialKey:
    T: G1Element
    d: int
    gamma: int


@dataclass(frozen=True)
class SensorPublicKey:
    """The composite public key ``PK_c = {T, PK_c1, gamma}``."""

    T: G1Element
    PK_c1: G1Element
    gamma: int


@dataclass(frozen=True)
class SensorKeyMaterial:
    id_c: bytes
    T: G1Element
    d: int
    gamma: int
    x_c: int
    PK_c1: G1Element

    @property
    def public(self) -> SensorPublicKey:
        return SensorPublicKey(self.T, self.PK_c1, self.gamma)


@dataclass(frozen=True)
class Ciphertext:
    c: int
    R1: G1Element
    r1: bytes
    r2: bytes
    U: G1Element


@dataclass(frozen=True)
class Recovery:
    """What the sensor learns from sigma before any identity check."""

    R1: G1Element
    k: bytes
    m: bytes
    r: int


@dataclass(frozen=True)
class Unsigncrypted:
    m: bytes
    Acd: G1Element
    R1: G1Element


@dataclass(frozen=True)
class SessionSecrets:
    h1: int
    key: bytes
    m1: bytes


def setup(
    backend: PairingBackend,
    l: Optional[int] = None,
    n: int = DEFAULT_N,
    delta_t: int = DEFAULT_DELTA_T_MS,
    rng: Optional[random.Random] = None,
) -> tuple[SystemParams, MasterKey]:
    rng = rng or default_rng()
    s = scalar_random(rng, backend.q)
    P = backend.generator()
    params = SystemParams(
        backend=backend,
        P=P,
        P_pub=s * P,
        g=backend.pair(P, P),
        l=l if l is not None else min(128, (backend.q.bit_length() + 1) // 2),
        n=n,
        hash=HashSuite(backend, n),
        delta_t=delta_t,
    )
    return params, MasterKey(s)


def params_from_public(
    backend: PairingBackend,
    P_pub: bytes,
    l: int,
    n: int = DEFAULT_N,
    delta_t: int = DEFAULT_DELTA_T_MS,
) -> SystemParams:
    """Rebuild public parameters on a party that did not run setup."""
    P = backend.generator()
    return SystemParams(
        backend=backend,
        P=P,
        P_pub=backend.decode_g1(bytes(P_pub)),
        g=backend.pair(P, P),
        l=l,
        n=n,
        hash=HashSuite(backend, n),
        delta_t=delta_t,
    )


def user_keygen(id_p: bytes, params: SystemParams, rng: Optional[random.Random] = None) -> UserKeyPair:
    rng = rng or default_rng()
    x_p = scalar_random(rng, params.q)
    return UserKeyPair(bytes(id_p), x_p, x_p * params.P)


def issue_credential(
    master: MasterKey,
    id_p: bytes,
    PK_p: G1Element,
    params: SystemParams,
    rng: Optional[random.Random] = None,
) -> UserCredential:
    rng = rng or default_rng()
    q = params.q
    w1 = scalar_random(rng, q)
    base = (w1 + params.hash.h0(id_p)) % q
    delta = params.hash.h1(id_p, PK_p)
    Acd = base * params.P
    sigma1 = (base + master.s * delta) % q
    return UserCredential(Acd, sigma1, delta)


def verify_credential(cred: UserCredential, params: SystemParams) -> bool:
    """Check ``Acd = sigma1 P - delta P_pub``."""
    return cred.Acd == cred.sigma1 * params.P - cred.delta * params.P_pub


def issue_partial_key(
    master: MasterKey,
    id_c: bytes,
    params: SystemParams,
    rng: Optional[random.Random] = None,
) -> PartialKey:
    rng = rng or default_rng()
    t = scalar_random(rng, params.q)
    T = t * params.P
    gamma = params.hash.h1(id_c, T)
    return PartialKey(T, (t + master.s * gamma) % params.q, gamma)


def verify_partial_key(T: G1Element, d: int, gamma: int, params: SystemParams) -> bool:
    """Pairing check ``e(dP, P) = e(T, P) e(P_pub, gamma P)``."""
    pair = params.backend.pair
    P = params.P
    lhs = pair(d * P, P)
    rhs = pair(T, P) * pair(params.P_pub, gamma * P)
    return lhs == rhs


def verify_partial_key_scalar(T: G1Element, d: int, gamma: int, params: SystemParams) -> bool:
    """Pairing-free equivalent ``dP = T + gamma P_pub``."""
    return d * params.P == T + gamma * params.P_pub


def sensor_finalize_keys(
    id_c: bytes,
    partial: PartialKey,
    params: SystemParams,
    rng: Optional[random.Random] = None,
) -> SensorKeyMaterial:
    rng = rng or default_rng()
    x_c = scalar_random(rng, params.q)
    return SensorKeyMaterial(
        bytes(id_c), partial.T, partial.d, partial.gamma, x_c, x_c * params.P
    )


def signcrypt(
    user: UserKeyPair,
    cred: UserCredential,
    pk_c: SensorPublicKey,
    m: bytes,
    params: SystemParams,
    rng: Optional[random.Random] = None,
) -> tuple[G1Element, Ciphertext]:
    """Signcrypt the n-bit payload ``m`` to a CLC sensor.

    Returns ``(R2, sigma)`` where ``R2 = R1 + Acd`` hides the account.
    """
    if len(m) != params.n_bytes:
        raise ValueError(f"payload must be exactly {params.n} bits")
    rng = rng or default_rng()
    H = params.hash
    k = random_bits(rng, params.n)
    r = H.h2(k, m)
    R1 = r * params.P
    r1 = xor_bytes(m, H.h3(k))
    r2 = xor_bytes(k, H.h3(r1))
    U = r * pk_c.PK_c1 + pk_c.T + pk_c.gamma * params.P_pub
    c = (user.x_p * H.h4(m) + r) % params.q
    sigma = Ciphertext(c, R1, r1, r2, U)
    return R1 + cred.Acd, sigma


def recover(sensor: SensorKeyMaterial, sigma: Ciphertext, params: SystemParams) -> Recovery:
    """Strip the encryption layer: R1, then k and m from the XOR masks."""
    if len(sigma.r1) != params.n_bytes or len(sigma.r2) != params.n_bytes:
        raise Rejected(RejectReason.MALFORMED, "r1/r2 width")
    if not 0 <= sigma.c < params.q:
        raise Rejected(RejectReason.MALFORMED, "c out of range")
    H = params.hash
    inv_xc = pow(sensor.x_c, -1, params.q)
    R1 = inv_xc * (sigma.U - sensor.d * params.P)
    if R1 != sigma.R1:
        # the transmitted R1 is otherwise never authenticated
        raise Rejected(RejectReason.BAD_SIGNATURE, "R1 does not match U")
    k = xor_bytes(sigma.r2, H.h3(sigma.r1))
    m = xor_bytes(sigma.r1, H.h3(k))
    r = H.h2(k, m)
    return Recovery(R1, k, m, r)


def check_signature(sigma: Ciphertext, m: bytes, PK_p: G1Element, R1: G1Element, params: SystemParams) -> bool:
    """``R1 = cP - H4(m) PK_p``."""
    return R1 == sigma.c * params.P - params.hash.h4(m) * PK_p


def unsigncrypt(
    sensor: SensorKeyMaterial,
    PK_p: G1Element,
    R2: G1Element,
    sigma: Ciphertext,
    params: SystemParams,
) -> Unsigncrypted:
    """Recover and verify; raises :class:`Rejected` where the protocol returns bottom."""
    rec = recover(sensor, sigma, params)
    if not check_signature(sigma, rec.m, PK_p, rec.R1, params):
        raise Rejected(RejectReason.BAD_SIGNATURE)
    return Unsigncrypted(rec.m, R2 - rec.R1, rec.R1)


def session_digest(id_c: bytes, t_c: int, Acd: G1Element, c: int, params: SystemParams) -> int:
    """``h1 = H1(ID_c || t_c, Acd || c)``."""
    left = encode_parts(bytes(id_c), struct.pack(">Q", t_c))
    right = encode_parts(Acd.encode(), params.backend.encode_scalar(c))
    return params.hash.h1(left, right)


def derive_session(
    id_c: bytes,
    t_c: int,
    Acd: G1Element,
    c: int,
    R1: G1Element,
    params: SystemParams,
) -> SessionSecrets:
    """Digest, session key ``H2(h1, R1)`` and confirmation tag ``MAC_key(h1)``."""
    enc = params.backend.encode_scalar
    h1 = session_digest(id_c, t_c, Acd, c, params)
    key = enc(params.hash.h2(enc(h1), R1))
    return SessionSecrets(h1, key, params.hash.mac(key, enc(h1)))
