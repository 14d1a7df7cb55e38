"""Symmetric bilinear-pairing arithmetic over two interchangeable backends.

The protocol is written against a Type-1 pairing ``e: G1 x G1 -> GT``.  Two
backends provide it:

``ToyBackend``
    A pairing "in the exponent": every element carries its discrete log, so
    ``e(aP, bP) = g^(ab)`` is a multiplication mod q.  Completely insecure and
    flagged ``oracle_dlog``; used to check algebraic identities by reading
    exponents directly.

``BLS12Backend``
    BLS12-381 via arkworks.  The curve is Type-3, so each protocol element is
    mirrored: the same scalar chain is applied to the G1 and G2 generators and
    ``pair(X, Y)`` uses X's G1 half and Y's G2 half.  Elements decoded from
    bytes only carry the G1 half and are therefore valid as the first pairing
    argument only.

Scalars are plain ``int`` values in ``[0, q)``.  Multiplication ``k * X`` and
``pair`` report to :mod:`hetauth.instrument`; additions do not.
"""

from __future__ import annotations

import random
from abc import ABC, abstractmethod
from typing import Any, Callable, Optional

import py_arkworks_bls12381 as ark

from hetauth import instrument


class EntropyError(RuntimeError):
    """The random source failed to produce output."""


class DecodeError(ValueError):
    """Bytes are not the canonical encoding of a group element or scalar."""


class G1Element:
    """Element of the additive source group, bound to its backend."""

    __slots__ = ("backend", "value")

    def __init__(self, backend: "PairingBackend", value: Any) -> None:
        self.backend = backend
        self.value = value

    def __add__(self, other: "G1Element") -> "G1Element":
        return self.backend.g1_add(self, other)

    def __sub__(self, other: "G1Element") -> "G1Element":
        return self.backend.g1_add(self, self.backend.g1_neg(other))

    def __neg__(self) -> "G1Element":
        return self.backend.g1_neg(self)

    def __rmul__(self, k: int) -> "G1Element":
        if not isinstance(k, int):
            return NotImplemented
        return self.backend.g1_mul(k, self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, G1Element):
            return NotImplemented
        return self.backend is other.backend and self.encode() == other.encode()

    def __hash__(self) -> int:
        return hash(self.encode())

    def __bytes__(self) -> bytes:
        return self.encode()

    def encode(self) -> bytes:
        return self.backend.encode_g1(self)

    def is_identity(self) -> bool:
        return self == self.backend.identity()

    def __repr__(self) -> str:
        return f"G1Element({self.backend.name}, {self.encode().hex()[:16]}...)"


class GTElement:
    """Element of the multiplicative target group."""

    __slots__ = ("backend", "value")

    def __init__(self, backend: "PairingBackend", value: Any) -> None:
        self.backend = backend
        self.value = value

    def __mul__(self, other: "GTElement") -> "GTElement":
        return self.backend.gt_mul(self, other)

    def __pow__(self, k: int) -> "GTElement":
        return self.backend.gt_pow(self, k)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GTElement):
            return NotImplemented
        return self.backend is other.backend and self.backend.gt_eq(self, other)

    def __hash__(self) -> int:
        return hash((self.backend.name, repr(self.value)))

    def __repr__(self) -> str:
        return f"GTElement({self.backend.name})"


class PairingBackend(ABC):
    name: str
    q: int
    oracle_dlog: bool = False

    @property
    def scalar_size(self) -> int:
        return (self.q.bit_length() + 7) // 8

    @property
    @abstractmethod
    def g1_size(self) -> int:
        """Length in bytes of the canonical G1 encoding."""

    @abstractmethod
    def generator(self) -> G1Element: ...

    @abstractmethod
    def identity(self) -> G1Element: ...

    @abstractmethod
    def g1_add(self, a: G1Element, b: G1Element) -> G1Element: ...

    @abstractmethod
    def g1_neg(self, a: G1Element) -> G1Element: ...

    @abstractmethod
    def _g1_mul(self, k: int, a: G1Element) -> G1Element: ...

    @abstractmethod
    def encode_g1(self, a: G1Element) -> bytes: ...

    @abstractmethod
    def decode_g1(self, data: bytes) -> G1Element: ...

    @abstractmethod
    def _pair(self, a: G1Element, b: G1Element) -> GTElement: ...

    @abstractmethod
    def gt_one(self) -> GTElement: ...

    @abstractmethod
    def gt_mul(self, a: GTElement, b: GTElement) -> GTElement: ...

    @abstractmethod
    def _gt_pow(self, a: GTElement, k: int) -> GTElement: ...

    @abstractmethod
    def gt_eq(self, a: GTElement, b: GTElement) -> bool: ...

    def g1_mul(self, k: int, a: G1Element) -> G1Element:
        instrument.record(instrument.G1_MULT)
        return self._g1_mul(k % self.q, a)

    def pair(self, a: G1Element, b: G1Element) -> GTElement:
        instrument.record(instrument.PAIRING)
        return self._pair(a, b)

    def gt_pow(self, a: GTElement, k: int) -> GTElement:
        instrument.record(instrument.G2_EXP)
        return self._gt_pow(a, k % self.q)

    def encode_scalar(self, k: int) -> bytes:
        if not 0 <= k < self.q:
            raise ValueError("scalar out of range")
        return k.to_bytes(self.scalar_size, "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_size:
            raise DecodeError(f"scalar must be {self.scalar_size} bytes")
        k = int.from_bytes(data, "big")
        if k >= self.q:
            raise DecodeError("scalar not reduced mod q")
        return k

    def dlog(self, a: G1Element) -> int:
        raise NotImplementedError(f"{self.name} backend has no discrete-log oracle")

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name} q~2^{self.q.bit_length()}>"


def scalar_random(rng: random.Random, q: int) -> int:
    """Uniform draw from Z_q^*."""
    try:
        return rng.randrange(1, q)
    except (OSError, NotImplementedError) as exc:
        raise EntropyError("random source failed") from exc


def random_bits(rng: random.Random, nbits: int) -> bytes:
    try:
        return rng.getrandbits(nbits).to_bytes(nbits // 8, "big")
    except (OSError, NotImplementedError) as exc:
        raise EntropyError("random source failed") from exc


TOY_Q = 1009
# Mersenne prime 2^61 - 1: still dlog-transparent, but wide enough that
# 1/q hash collisions stop dominating statistical scenarios.
WIDE_TOY_Q = (1 << 61) - 1


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin with the first twelve prime bases (exact below 3.3e24)."""
    if n < 2:
        return False
    bases = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for p in bases:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in bases:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class ToyBackend(PairingBackend):
    """Pairing simulated on discrete logs.  Never use for real keys."""

    oracle_dlog = True

    def __init__(self, q: int = TOY_Q, name: Optional[str] = None) -> None:
        if q < 3 or not is_probable_prime(q):
            raise ValueError("toy modulus must be an odd prime")
        self.q = q
        self.name = name or ("toy" if q == TOY_Q else f"toy-{q}")

    @property
    def g1_size(self) -> int:
        return self.scalar_size

    def element(self, exponent: int) -> G1Element:
        """Build ``exponent * P`` without going through the counted path."""
        return G1Element(self, exponent % self.q)

    def gt_element(self, exponent: int) -> GTElement:
        return GTElement(self, exponent % self.q)

    def dlog(self, a: G1Element) -> int:
        return a.value

    def gt_dlog(self, a: GTElement) -> int:
        return a.value

    def generator(self) -> G1Element:
        return G1Element(self, 1)

    def identity(self) -> G1Element:
        return G1Element(self, 0)

    def g1_add(self, a: G1Element, b: G1Element) -> G1Element:
        return G1Element(self, (a.value + b.value) % self.q)

    def g1_neg(self, a: G1Element) -> G1Element:
        return G1Element(self, (-a.value) % self.q)

    def _g1_mul(self, k: int, a: G1Element) -> G1Element:
        return G1Element(self, (k * a.value) % self.q)

    def encode_g1(self, a: G1Element) -> bytes:
        return a.value.to_bytes(self.g1_size, "big")

    def decode_g1(self, data: bytes) -> G1Element:
        if len(data) != self.g1_size:
            raise DecodeError(f"G1 encoding must be {self.g1_size} bytes")
        v = int.from_bytes(data, "big")
        if v >= self.q:
            raise DecodeError("G1 encoding out of range")
        return G1Element(self, v)

    def _pair(self, a: G1Element, b: G1Element) -> GTElement:
        return GTElement(self, (a.value * b.value) % self.q)

    def gt_one(self) -> GTElement:
        return GTElement(self, 0)

    def gt_mul(self, a: GTElement, b: GTElement) -> GTElement:
        return GTElement(self, (a.value + b.value) % self.q)

    def _gt_pow(self, a: GTElement, k: int) -> GTElement:
        return GTElement(self, (a.value * k) % self.q)

    def gt_eq(self, a: GTElement, b: GTElement) -> bool:
        return a.value == b.value


BLS12_381_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001

class _Mirror:
    """G2 half of a mirrored element, evaluated only when a pairing needs it."""

    __slots__ = ("_value", "_thunk")

    def __init__(self, value: Any = None, thunk: Optional[Callable[[], Any]] = None) -> None:
        self._value = value
        self._thunk = thunk

    def get(self) -> Any:
        if self._value is None:
            self._value = self._thunk()
            self._thunk = None
        return self._value


def _ark_scalar(k: int) -> "ark.Scalar":
    return ark.Scalar.from_le_bytes(k.to_bytes(32, "little"))


class BLS12Backend(PairingBackend):
    """BLS12-381 with mirrored G1/G2 representation of each protocol element.

    ``value`` is ``(G1Point, _Mirror | None)``; ``None`` marks an element that
    arrived as bytes and has no known G2 counterpart.
    """

    name = "bls12-381"
    q = BLS12_381_ORDER

    def __init__(self) -> None:
        self._g1 = ark.G1Point()
        self._g2 = ark.G2Point()

    @property
    def g1_size(self) -> int:
        return 48

    def generator(self) -> G1Element:
        return G1Element(self, (self._g1, _Mirror(self._g2)))

    def identity(self) -> G1Element:
        return G1Element(self, (ark.G1Point.identity(), _Mirror(ark.G2Point.identity())))

    def g1_add(self, a: G1Element, b: G1Element) -> G1Element:
        (a1, a2), (b1, b2) = a.value, b.value
        mirror = None
        if a2 is not None and b2 is not None:
            mirror = _Mirror(thunk=lambda: a2.get() + b2.get())
        return G1Element(self, (a1 + b1, mirror))

    def g1_neg(self, a: G1Element) -> G1Element:
        a1, a2 = a.value
        return G1Element(self, (-a1, _Mirror(thunk=lambda: -a2.get()) if a2 is not None else None))

    def _g1_mul(self, k: int, a: G1Element) -> G1Element:
        a1, a2 = a.value
        if k == 0:
            return G1Element(
                self,
                (ark.G1Point.identity(), _Mirror(ark.G2Point.identity()) if a2 is not None else None),
            )
        s = _ark_scalar(k)
        mirror = _Mirror(thunk=lambda: a2.get() * s) if a2 is not None else None
        return G1Element(self, (a1 * s, mirror))

    def encode_g1(self, a: G1Element) -> bytes:
        return bytes(a.value[0].to_compressed_bytes())

    def decode_g1(self, data: bytes) -> G1Element:
        if len(data) != self.g1_size:
            raise DecodeError(f"G1 encoding must be {self.g1_size} bytes")
        try:
            pt = ark.G1Point.from_compressed_bytes(bytes(data))
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc
        # the infinity flag makes the remaining bits ignored; insist on one encoding per point
        if bytes(pt.to_compressed_bytes()) != bytes(data):
            raise DecodeError("non-canonical G1 encoding")
        return G1Element(self, (pt, None))

    def has_mirror(self, a: G1Element) -> bool:
        return a.value[1] is not None

    def mirror(self, a: G1Element) -> "ark.G2Point":
        if a.value[1] is None:
            raise ValueError("element has no G2 mirror")
        return a.value[1].get()

    def _pair(self, a: G1Element, b: G1Element) -> GTElement:
        if b.value[1] is None:
            raise ValueError(
                "second pairing argument has no G2 mirror (decoded elements "
                "may only appear as the first argument)"
            )
        return GTElement(self, ark.GT.pairing(a.value[0], b.value[1].get()))

    def gt_one(self) -> GTElement:
        return GTElement(self, ark.GT.one())

    def gt_mul(self, a: GTElement, b: GTElement) -> GTElement:
        return GTElement(self, a.value * b.value)

    def _gt_pow(self, a: GTElement, k: int) -> GTElement:
        acc = ark.GT.one()
        base = a.value
        while k:
            if k & 1:
                acc = acc * base
            base = base * base
            k >>= 1
        return GTElement(self, acc)

    def gt_eq(self, a: GTElement, b: GTElement) -> bool:
        return a.value == b.value


_FACTORIES = {
    "toy": lambda: ToyBackend(TOY_Q),
    "toy-wide": lambda: ToyBackend(WIDE_TOY_Q, "toy-wide"),
    "production": BLS12Backend,
}
_ALIASES = {"bls12-381": "production"}
BACKEND_NAMES = tuple(_FACTORIES)
_cache: dict = {}


def get_backend(name: str) -> PairingBackend:
    """Resolve ``toy``, ``toy-wide`` or ``production`` to a shared instance."""
    key = _ALIASES.get(name, name)
    if key not in _FACTORIES:
        raise ValueError(f"unknown backend {name!r}; choose one of {', '.join(BACKEND_NAMES)}")
    if key not in _cache:
        _cache[key] = _FACTORIES[key]()
    return _cache[key]
