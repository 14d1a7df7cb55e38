"""Domain-separated hash functions H0..H4 and the session MAC.

Every hash is SHAKE256 over a length-prefixed encoding whose first part is a
distinct domain tag.  Scalar-valued hashes squeeze ``scalar_size + 16`` bytes
and reduce mod q; a zero result is re-hashed with an incremented counter so
outputs always land in ``Z_q^*``.  The MAC is HMAC-SHA3-256.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from typing import Union

from hetauth import instrument
from hetauth.algebra import G1Element, PairingBackend

TAG_H0 = b"HETAUTH/H0"
TAG_H1 = b"HETAUTH/H1"
TAG_H2 = b"HETAUTH/H2"
TAG_H3 = b"HETAUTH/H3"
TAG_H4 = b"HETAUTH/H4"
TAG_MAC = b"HETAUTH/MAC"

MAC_SIZE = 32


def encode_parts(*parts: bytes) -> bytes:
    """Prefix each part with its 4-byte big-endian length and concatenate."""
    return b"".join(struct.pack(">I", len(p)) + bytes(p) for p in parts)


def _as_bytes(x: Union[bytes, G1Element]) -> bytes:
    return x.encode() if isinstance(x, G1Element) else bytes(x)


class HashSuite:
    """The five protocol hashes and the MAC for one backend and payload width."""

    def __init__(self, backend: PairingBackend, n: int = 256) -> None:
        if n <= 0 or n % 8:
            raise ValueError("payload width n must be a positive multiple of 8")
        self.backend = backend
        self.q = backend.q
        self.n = n
        self._squeeze = backend.scalar_size + 16

    @property
    def n_bytes(self) -> int:
        return self.n // 8

    def _to_scalar(self, tag: bytes, *parts: bytes) -> int:
        ctr = 0
        while True:
            data = encode_parts(tag, struct.pack(">I", ctr), *parts)
            v = int.from_bytes(hashlib.shake_256(data).digest(self._squeeze), "big") % self.q
            if v:
                return v
            ctr += 1

    def h0(self, identity: bytes) -> int:
        instrument.record(instrument.HASH, "h0")
        return self._to_scalar(TAG_H0, bytes(identity))

    def h1(self, msg: bytes, point: Union[bytes, G1Element]) -> int:
        """``H1: {0,1}* x G1 -> Z_q^*``.

        ``point`` may also be pre-encoded bytes, which is how the session digest
        feeds ``Acd || c`` through this function.
        """
        instrument.record(instrument.HASH, "h1")
        return self._to_scalar(TAG_H1, bytes(msg), _as_bytes(point))

    def h2(self, a: Union[bytes, G1Element], b: Union[bytes, G1Element]) -> int:
        instrument.record(instrument.HASH, "h2")
        return self._to_scalar(TAG_H2, _as_bytes(a), _as_bytes(b))

    def h3(self, x: bytes) -> bytes:
        """n-bit mask used by the XOR layer."""
        instrument.record(instrument.HASH, "h3")
        return hashlib.shake_256(encode_parts(TAG_H3, bytes(x))).digest(self.n_bytes)

    def h4(self, m: bytes) -> int:
        instrument.record(instrument.HASH, "h4")
        return self._to_scalar(TAG_H4, bytes(m))

    def mac(self, key: bytes, msg: bytes) -> bytes:
        instrument.record(instrument.HASH, "mac")
        return hmac.new(key, encode_parts(TAG_MAC, bytes(msg)), hashlib.sha3_256).digest()

    def mac_verify(self, tag: bytes, key: bytes, msg: bytes) -> bool:
        return hmac.compare_digest(bytes(tag), self.mac(key, msg))


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError("xor operands differ in length")
    return bytes(x ^ y for x, y in zip(a, b))
