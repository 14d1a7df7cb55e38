import json

import pytest

from hetauth import attacks


def test_replay():
    v = attacks.run_replay_attack(seed=3)
    assert v.passed, v.to_text()
    names = [s.name for s in v.steps]
    assert "in-window resend" in names and "after-window resend" in names


def test_dos_small_volume():
    v = attacks.run_dos_attack(seed=3, volume=200)
    assert v.passed, v.to_text()
    assert v.report["work_total"]["P"] == 0
    # recovery costs 2M+3H per bogus request, then the account lookup fails
    assert v.report["work_per_request"]["M"] == 2
    assert v.report["work_per_request"]["H"] == 3


def test_tamper_sampled():
    v = attacks.run_tamper_attack(seed=5, samples=300)
    assert v.passed, v.to_text()
    assert v.report["bits_tested"] == 300
    assert not v.report["exhaustive"]


def test_tamper_production_sampled():
    v = attacks.run_tamper_attack(seed=5, backend="production", samples=120)
    assert v.passed, v.to_text()


def test_impersonation_small():
    v = attacks.run_impersonation_attack(seed=2, attempts=200)
    assert v.passed, v.to_text()
    assert v.backend == "production"


def test_impersonation_toy_wide():
    v = attacks.run_impersonation_attack(seed=2, attempts=500, backend="toy-wide")
    assert v.passed, v.to_text()


def test_anonymity_small():
    v = attacks.run_anonymity_check(seed=1, sessions=10)
    assert v.passed, v.to_text()
    assert v.report["r2_values"] == {"user-0": 10, "user-1": 10}


@pytest.mark.parametrize("name", ["replay", "dos", "tamper"])
def test_deterministic(name):
    kw = {"dos": {"volume": 50}, "tamper": {"samples": 64}}.get(name, {})
    a = attacks.run_scenario(name, seed=9, **kw).to_dict()
    b = attacks.run_scenario(name, seed=9, **kw).to_dict()
    assert a == b


def test_verdict_serialises():
    v = attacks.run_replay_attack(seed=1)
    d = json.loads(v.to_json())
    assert d["passed"] is True
    assert all(s["ok"] for s in d["steps"])
    assert v.to_text().splitlines()[0].endswith("PASS")


def test_failed_verdict():
    v = attacks.Verdict("x", 0, "toy")
    assert not v.passed  # no steps is not a pass
    v.check("a", 1, 2)
    assert not v.passed
    assert "BAD" in v.to_text()


def test_unknown_scenario():
    with pytest.raises(ValueError):
        attacks.run_scenario("teleport")


def test_field_spans_cover_request():
    from hetauth.engine import deploy
    from hetauth.algebra import get_backend
    from hetauth import wire
    import random

    dep = deploy(get_backend("production"), random.Random(0))
    raw = wire.encode(dep.user.begin_auth(dep.sensor.id_c))
    spans = attacks.service_request_fields(raw)
    assert spans[0][1] == 0 and spans[-1][2] == len(raw) == 268
    assert all(a[2] == b[1] for a, b in zip(spans, spans[1:]))
