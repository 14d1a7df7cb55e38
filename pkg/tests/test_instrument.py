import random
import threading

import pytest

from hetauth.instrument import OpCounter, OpCounts, counting, op_scope, suspended


def test_nothing_counted_without_counter(toy):
    P = toy.generator()
    c = OpCounter()
    5 * P  # no active counter
    assert c.scopes() == {}


def test_scoped_totals(toy):
    P = toy.generator()
    c = OpCounter()
    with counting(c):
        with op_scope("user", "authentication", "a"):
            3 * P
            toy.pair(P, P)
        with op_scope("user", "registration", "b"):
            toy.pair(P, P) ** 2
        with op_scope("gwn", "registration"):
            2 * P
    assert c.total("user").as_dict() == {"P": 2, "M": 1, "E": 1, "H": 0}
    assert c.total("user", "authentication").notation() == "P+M"
    assert c.total(phase="registration").notation() == "P+E+M"
    assert c.entities() == ["gwn", "user"]
    assert c.phases("user") == ["authentication", "registration"]
    assert c.steps("user", "authentication") == ["a"]


def test_unscoped_bucket(toy):
    c = OpCounter()
    with counting(c):
        7 * toy.generator()
    assert c.total("unscoped").g1_mults == 1


def test_suspended(toy):
    c = OpCounter()
    with counting(c), op_scope("user", "x"):
        with suspended():
            7 * toy.generator()
        8 * toy.generator()
    assert c.total().g1_mults == 1


def test_monotone_and_reset(toy):
    c = OpCounter()
    seen = []
    with counting(c), op_scope("sensor", "authentication"):
        for _ in range(5):
            2 * toy.generator()
            seen.append(c.total().g1_mults)
    assert seen == sorted(seen) == [1, 2, 3, 4, 5]
    c.reset()
    assert c.total().as_dict() == {"P": 0, "M": 0, "E": 0, "H": 0}


def test_independent_counters_per_thread(toy):
    results = {}

    def work(name, n):
        c = OpCounter()
        with counting(c), op_scope(name, "p"):
            for _ in range(n):
                2 * toy.generator()
        results[name] = c.total().g1_mults

    threads = [threading.Thread(target=work, args=(f"t{i}", 50 + i)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == {f"t{i}": 50 + i for i in range(4)}


def test_notation():
    assert OpCounts(3, 4, 0, 6).notation() == "3P+4M+6H"
    assert OpCounts(0, 1, 0, 1).notation() == "M+H"
    assert OpCounts().notation() == "0"
    with pytest.raises(ValueError):
        OpCounts().add("Z")


def test_instrumentation_does_not_change_results(toy):
    from hetauth.engine import deploy
    from hetauth.runner import handshake_direct
    from hetauth.transport import SimClock

    plain = handshake_direct(deploy(toy, random.Random(3), clock=SimClock()))
    with counting(OpCounter()):
        counted = handshake_direct(deploy(toy, random.Random(3), clock=SimClock()))
    assert plain.user_session.key == counted.user_session.key
    assert plain.request == counted.request
