"""Bit-exact message codec.

Layout (all integers big-endian)::

    version  u8     always 1
    type     u8     MsgType
    length   u32    byte length of body
    body            fields in schema order, each ``u16 length || value``

The codec is backend-agnostic: group elements and scalars travel as opaque
fixed-width byte strings and are validated by the protocol engine.  Decoding
is total: any input either yields a message or raises :class:`MalformedMessage`.
``docs/wire.md`` documents every field.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, fields
from typing import ClassVar, Dict, Tuple, Type

VERSION = 1
HEADER_SIZE = 6
FIELD_OVERHEAD = 2
MAX_FIELD = 0xFFFF


class MsgType(enum.IntEnum):
    REG_USER_REQ = 0x01
    REG_USER_RESP = 0x02
    REG_SENSOR_REQ = 0x03
    REG_SENSOR_RESP = 0x04
    DIRECTORY_PUSH = 0x05
    SERVICE_REQUEST = 0x06
    MAC_CONFIRM = 0x07
    REJECT = 0x08
    SENSOR_INFO_REQ = 0x09
    SENSOR_INFO = 0x0A


class RejectCode(enum.IntEnum):
    """Opaque on purpose: every authentication failure maps to ``DENIED``."""

    DENIED = 0x01
    MALFORMED = 0x02
    UNSUPPORTED = 0x03


class MalformedMessage(ValueError):
    def __init__(self, kind: str, detail: str = "") -> None:
        self.kind = kind
        super().__init__(f"malformed({kind}){': ' + detail if detail else ''}")


_U8 = "u8"
_U16 = "u16"
_U64 = "u64"
_BYTES = "bytes"
_INT_WIDTH = {_U8: 1, _U16: 2, _U64: 8}


class WireMessage:
    TYPE: ClassVar[MsgType]
    SCHEMA: ClassVar[Tuple[Tuple[str, str], ...]]

    def encode(self) -> bytes:
        return encode(self)

    @property
    def msg_type(self) -> MsgType:
        return self.TYPE


@dataclass(frozen=True)
class UserRegRequest(WireMessage):
    id_p: bytes
    PK_p: bytes
    TYPE = MsgType.REG_USER_REQ
    SCHEMA = (("id_p", _BYTES), ("PK_p", _BYTES))


@dataclass(frozen=True)
class UserRegResponse(WireMessage):
    Acd: bytes
    sigma1: bytes
    delta: bytes
    TYPE = MsgType.REG_USER_RESP
    SCHEMA = (("Acd", _BYTES), ("sigma1", _BYTES), ("delta", _BYTES))


@dataclass(frozen=True)
class SensorRegRequest(WireMessage):
    id_c: bytes
    TYPE = MsgType.REG_SENSOR_REQ
    SCHEMA = (("id_c", _BYTES),)


@dataclass(frozen=True)
class SensorRegResponse(WireMessage):
    T: bytes
    d: bytes
    gamma: bytes
    TYPE = MsgType.REG_SENSOR_RESP
    SCHEMA = (("T", _BYTES), ("d", _BYTES), ("gamma", _BYTES))


@dataclass(frozen=True)
class DirectoryEntry:
    Acd: bytes
    sigma1: bytes
    PK_p: bytes
    delta: bytes


@dataclass(frozen=True)
class DirectoryPush(WireMessage):
    entries: Tuple[DirectoryEntry, ...]
    TYPE = MsgType.DIRECTORY_PUSH
    SCHEMA = ()


@dataclass(frozen=True)
class ServiceRequest(WireMessage):
    R2: bytes
    c: bytes
    R1: bytes
    r1: bytes
    r2: bytes
    U: bytes
    t_c: int
    TYPE = MsgType.SERVICE_REQUEST
    SCHEMA = (
        ("R2", _BYTES),
        ("c", _BYTES),
        ("R1", _BYTES),
        ("r1", _BYTES),
        ("r2", _BYTES),
        ("U", _BYTES),
        ("t_c", _U64),
    )


@dataclass(frozen=True)
class MacConfirm(WireMessage):
    m1: bytes
    TYPE = MsgType.MAC_CONFIRM
    SCHEMA = (("m1", _BYTES),)


@dataclass(frozen=True)
class Reject(WireMessage):
    code: int
    TYPE = MsgType.REJECT
    SCHEMA = (("code", _U8),)


@dataclass(frozen=True)
class SensorInfoRequest(WireMessage):
    id_c: bytes
    TYPE = MsgType.SENSOR_INFO_REQ
    SCHEMA = (("id_c", _BYTES),)


@dataclass(frozen=True)
class SensorInfo(WireMessage):
    id_c: bytes
    T: bytes
    PK_c1: bytes
    gamma: bytes
    TYPE = MsgType.SENSOR_INFO
    SCHEMA = (("id_c", _BYTES), ("T", _BYTES), ("PK_c1", _BYTES), ("gamma", _BYTES))


MESSAGE_TYPES: Dict[MsgType, Type[WireMessage]] = {
    cls.TYPE: cls
    for cls in (
        UserRegRequest,
        UserRegResponse,
        SensorRegRequest,
        SensorRegResponse,
        DirectoryPush,
        ServiceRequest,
        MacConfirm,
        Reject,
        SensorInfoRequest,
        SensorInfo,
    )
}

_ENTRY_FIELDS = ("Acd", "sigma1", "PK_p", "delta")


def _field(value: bytes) -> bytes:
    if len(value) > MAX_FIELD:
        raise ValueError("field exceeds 65535 bytes")
    return struct.pack(">H", len(value)) + value


def _pack_value(kind: str, value) -> bytes:
    if kind == _BYTES:
        return bytes(value)
    return int(value).to_bytes(_INT_WIDTH[kind], "big")


def encode(msg: WireMessage) -> bytes:
    if isinstance(msg, DirectoryPush):
        parts = [_field(struct.pack(">H", len(msg.entries)))]
        for entry in msg.entries:
            parts.extend(_field(getattr(entry, name)) for name in _ENTRY_FIELDS)
    else:
        parts = [_field(_pack_value(kind, getattr(msg, name))) for name, kind in msg.SCHEMA]
    body = b"".join(parts)
    return struct.pack(">BBI", VERSION, int(msg.TYPE), len(body)) + body


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def field(self) -> bytes:
        if self.pos + FIELD_OVERHEAD > len(self.data):
            raise MalformedMessage("length", "truncated field header")
        (n,) = struct.unpack_from(">H", self.data, self.pos)
        self.pos += FIELD_OVERHEAD
        if self.pos + n > len(self.data):
            raise MalformedMessage("length", "truncated field value")
        value = self.data[self.pos : self.pos + n]
        self.pos += n
        return value

    def done(self) -> None:
        if self.pos != len(self.data):
            raise MalformedMessage("length", "trailing bytes in body")


def _unpack_value(kind: str, raw: bytes):
    if kind == _BYTES:
        return raw
    if len(raw) != _INT_WIDTH[kind]:
        raise MalformedMessage("length", f"{kind} field has {len(raw)} bytes")
    return int.from_bytes(raw, "big")


def decode(data: bytes) -> WireMessage:
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise MalformedMessage("length", "shorter than header")
    version, mtype, length = struct.unpack_from(">BBI", data, 0)
    if version != VERSION:
        raise MalformedMessage("version", f"got {version}")
    try:
        cls = MESSAGE_TYPES[MsgType(mtype)]
    except ValueError:
        raise MalformedMessage("tag", f"unknown type 0x{mtype:02x}") from None
    if len(data) != HEADER_SIZE + length:
        raise MalformedMessage("length", "body length mismatch")
    reader = _Reader(data[HEADER_SIZE:])
    if cls is DirectoryPush:
        count = _unpack_value(_U16, reader.field())
        entries = []
        for _ in range(count):
            entries.append(DirectoryEntry(*(reader.field() for _ in _ENTRY_FIELDS)))
        reader.done()
        return DirectoryPush(tuple(entries))
    values = {name: _unpack_value(kind, reader.field()) for name, kind in cls.SCHEMA}
    reader.done()
    return cls(**values)


def service_request_size(g1_size: int, scalar_size: int, n_bytes: int) -> int:
    """Analytic size of an encoded ServiceRequest from field widths alone."""
    n_fields = len(ServiceRequest.SCHEMA)
    return HEADER_SIZE + n_fields * FIELD_OVERHEAD + 3 * g1_size + scalar_size + 2 * n_bytes + 8


def mac_confirm_size(mac_size: int) -> int:
    return HEADER_SIZE + FIELD_OVERHEAD + mac_size


def payload_bits(g1_size: int, scalar_size: int, n_bytes: int, mac_size: int) -> int:
    """Bits of protocol content in {R2, sigma, t_c} + M1, excluding framing."""
    return 8 * (3 * g1_size + scalar_size + 2 * n_bytes + 8 + mac_size)


def message_fields(msg: WireMessage) -> Dict[str, object]:
    return {f.name: getattr(msg, f.name) for f in fields(msg)}
