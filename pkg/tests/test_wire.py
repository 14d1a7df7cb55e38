import json
import pathlib
import random
import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetauth import wire
from hetauth.runner import record_transcript
from hetauth.wire import (
    DirectoryEntry,
    DirectoryPush,
    MacConfirm,
    MalformedMessage,
    MsgType,
    Reject,
    SensorInfo,
    SensorInfoRequest,
    SensorRegRequest,
    SensorRegResponse,
    ServiceRequest,
    UserRegRequest,
    UserRegResponse,
)

TESTDATA = pathlib.Path(__file__).parent / "testdata"

blob = st.binary(max_size=80)

messages = st.one_of(
    st.builds(UserRegRequest, blob, blob),
    st.builds(UserRegResponse, blob, blob, blob),
    st.builds(SensorRegRequest, blob),
    st.builds(SensorRegResponse, blob, blob, blob),
    st.builds(DirectoryPush, st.lists(st.builds(DirectoryEntry, blob, blob, blob, blob), max_size=4).map(tuple)),
    st.builds(ServiceRequest, blob, blob, blob, blob, blob, blob, st.integers(0, 2**64 - 1)),
    st.builds(MacConfirm, blob),
    st.builds(Reject, st.integers(0, 255)),
    st.builds(SensorInfoRequest, blob),
    st.builds(SensorInfo, blob, blob, blob, blob),
)


@given(messages)
def test_roundtrip(msg):
    raw = wire.encode(msg)
    assert wire.decode(raw) == msg
    assert raw[0] == wire.VERSION
    assert raw[1] == msg.TYPE
    assert struct.unpack(">I", raw[2:6])[0] == len(raw) - wire.HEADER_SIZE


@given(messages, st.data())
def test_truncation_is_malformed(msg, data):
    raw = wire.encode(msg)
    cut = data.draw(st.integers(0, len(raw) - 1))
    with pytest.raises(MalformedMessage):
        wire.decode(raw[:cut])


def test_error_kinds():
    raw = wire.encode(MacConfirm(b"x" * 32))
    with pytest.raises(MalformedMessage) as e:
        wire.decode(b"\x02" + raw[1:])
    assert e.value.kind == "version"
    with pytest.raises(MalformedMessage) as e:
        wire.decode(raw[:1] + b"\x7f" + raw[2:])
    assert e.value.kind == "tag"
    with pytest.raises(MalformedMessage) as e:
        wire.decode(raw + b"\x00")
    assert e.value.kind == "length"


def test_trailing_bytes_inside_body():
    body = struct.pack(">H", 1) + b"m" + b"\x00"
    raw = struct.pack(">BBI", 1, MsgType.MAC_CONFIRM, len(body)) + body
    with pytest.raises(MalformedMessage) as e:
        wire.decode(raw)
    assert e.value.kind == "length"


def test_fixed_int_widths():
    body = struct.pack(">H", 2) + b"\x00\x01"
    raw = struct.pack(">BBI", 1, MsgType.REJECT, len(body)) + body
    with pytest.raises(MalformedMessage):
        wire.decode(raw)


def test_oversized_field_refused():
    with pytest.raises(ValueError):
        wire.encode(MacConfirm(b"x" * 70000))


def test_fuzz_decode_is_total():
    rng = random.Random(1234)
    seeds = [wire.encode(m) for m in _sample_messages()]
    outcomes = {"ok": 0, "malformed": 0}
    for i in range(10_000):
        if i % 2:
            data = bytes(rng.getrandbits(8) for _ in range(rng.randrange(0, 64)))
        else:
            data = bytearray(rng.choice(seeds))
            for _ in range(rng.randrange(1, 4)):
                if data:
                    data[rng.randrange(len(data))] = rng.getrandbits(8)
            data = bytes(data)
        try:
            wire.decode(data)
            outcomes["ok"] += 1
        except MalformedMessage:
            outcomes["malformed"] += 1
    assert sum(outcomes.values()) == 10_000
    assert outcomes["malformed"] > 0


def _sample_messages():
    return [
        ServiceRequest(b"a" * 48, b"c" * 32, b"b" * 48, b"1" * 32, b"2" * 32, b"u" * 48, 1_700_000_000_000),
        MacConfirm(b"m" * 32),
        DirectoryPush((DirectoryEntry(b"a" * 48, b"s" * 32, b"p" * 48, b"d" * 32),)),
        Reject(1),
        SensorInfo(b"sensor-0", b"t" * 48, b"k" * 48, b"g" * 32),
    ]


# -- sizes


@pytest.mark.parametrize("g1,sc", [(48, 32), (2, 2), (8, 8)])
def test_analytic_sizes_match_encoding(g1, sc):
    req = ServiceRequest(b"a" * g1, b"c" * sc, b"b" * g1, b"1" * 32, b"2" * 32, b"u" * g1, 5)
    assert len(wire.encode(req)) == wire.service_request_size(g1, sc, 32)
    assert len(wire.encode(MacConfirm(b"m" * 32))) == wire.mac_confirm_size(32)


def test_production_sizes():
    assert wire.service_request_size(48, 32, 32) == 268
    assert wire.mac_confirm_size(32) == 40
    assert wire.payload_bits(48, 32, 32, 32) == 2240


def test_message_fields():
    f = wire.message_fields(MacConfirm(b"z"))
    assert f == {"m1": b"z"}


# -- golden transcripts


@pytest.mark.parametrize("path", sorted(TESTDATA.glob("golden_toy_seed*.json")), ids=lambda p: p.stem)
def test_golden_transcript(path):
    golden = json.loads(path.read_text())
    fresh = record_transcript(golden["seed"], "toy")
    assert fresh == golden
    for m in golden["messages"]:
        raw = bytes.fromhex(m["hex"])
        assert wire.encode(wire.decode(raw)) == raw


def test_golden_files_present():
    assert len(list(TESTDATA.glob("golden_toy_seed*.json"))) == 3
