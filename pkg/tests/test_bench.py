import json
import pathlib
import re

import jsonschema
import pytest

from hetauth.bench import REFERENCE, parse_notation, run_benchmark, without_mac
from hetauth.instrument import OpCounts

DOCS = pathlib.Path(__file__).resolve().parent.parent / "docs" / "bench-schema.md"


def _schema():
    text = DOCS.read_text()
    return json.loads(re.search(r"```json\n(.*?)```", text, re.S).group(1))


@pytest.fixture(scope="module")
def toy_report():
    return run_benchmark("toy", iterations=5, seed=1)


def test_parse_notation():
    assert parse_notation("3P+4M+6H") == {"P": 3, "M": 4, "E": 0, "H": 6}
    assert parse_notation("M+H") == {"P": 0, "M": 1, "E": 0, "H": 1}
    assert parse_notation("0") == {"P": 0, "M": 0, "E": 0, "H": 0}
    with pytest.raises(ValueError):
        parse_notation("3X")


def test_without_mac():
    c = OpCounts(hashes=3)
    c.labels.update({"h1": 1, "h2": 1, "mac": 1})
    assert without_mac(c).hashes == 2
    assert c.hashes == 3


def test_schema_valid(toy_report):
    jsonschema.validate(json.loads(toy_report.to_json()), _schema())


def test_counts_per_scope(toy_report):
    r = toy_report
    assert r.count("user", "authentication", "signcrypt") == {"P": 0, "M": 3, "E": 0, "H": 4}
    assert r.count("user", "authentication", mac=False) == {"P": 0, "M": 3, "E": 0, "H": 6}
    assert r.count("sensor", "authentication", mac=False) == {"P": 0, "M": 4, "E": 0, "H": 6}
    assert r.count("sensor", "registration", "verify-partial-key")["P"] == 3
    assert r.count("sensor", "registration")["P"] == 3
    assert r.count("gwn", "registration") == {"P": 0, "M": 2, "E": 0, "H": 3}


def test_totals_are_sums_of_scopes(toy_report):
    for entity, node in toy_report.counts.items():
        for sym in "PMEH":
            assert node["total"][sym] == sum(p["total"][sym] for p in node["phases"].values())
            for phase in node["phases"].values():
                assert phase["total"][sym] == sum(s["counts"][sym] for s in phase["steps"].values())


def test_comparison_flags_deltas(toy_report):
    cmp = {c.entity: c for c in toy_report.comparison}
    assert cmp["sensor"].match and cmp["sensor"].measured == REFERENCE["sensor"]
    assert not cmp["gwn"].match and cmp["gwn"].delta == {"H": 1}
    assert not cmp["user"].match and cmp["user"].delta == {"H": 2}


def test_wire_sizes(toy_report):
    w = toy_report.wire
    assert w["agree"]
    assert w["service_request_bytes"]["measured"] == w["service_request_bytes"]["analytic"]
    assert w["reference_bits"] == 2012


def test_timings_present(toy_report):
    for name in ("setup", "authentication", "user:signcrypt", "sensor:handle", "user:confirm"):
        t = toy_report.timings[name]
        assert t.samples == 5 and t.mean_ms >= 0 and t.variance_ms2 >= 0


def test_counts_deterministic():
    a = run_benchmark("toy", iterations=1, seed=4)
    b = run_benchmark("toy", iterations=1, seed=4)
    assert a.counts == b.counts


def test_production_report_schema():
    r = run_benchmark("production", iterations=3, seed=0)
    jsonschema.validate(json.loads(r.to_json()), _schema())
    assert r.wire["service_request_bytes"]["measured"] == 268
    assert r.wire["payload_bits"] == 2240
    assert "sensor" in r.to_text()


def test_iterations_validated():
    with pytest.raises(ValueError):
        run_benchmark("toy", iterations=0)
