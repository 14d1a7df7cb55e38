"""Operation-count, timing and communication-cost benchmark.

Counts come from the algebra and hash layers through
:mod:`hetauth.instrument`; this module only runs the protocol, collects the
scoped totals and lines them up against the published cost row.

MAC evaluations are recorded as hashes.  The reference row predates that
convention, so comparisons use an "excluding MAC" view alongside the raw
totals.
"""

from __future__ import annotations

import json
import platform
import random
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

from hetauth import wire
from hetauth.algebra import PairingBackend, get_backend
from hetauth.engine import Gateway, Sensor, User, register_user
from hetauth.hashes import MAC_SIZE
from hetauth.instrument import OpCounter, OpCounts, counting

SCHEMA_ID = "hetauth-bench/1"

# Published "Proposed" cost row, kept verbatim for comparison.
REFERENCE = {
    "user": "3M+4H",
    "gwn": "2M+2H",
    "sensor": "3P+4M+6H",
    "communication_bits": 2012,
    "total_ms": 16.913,
}

ENTITIES = ("user", "gwn", "sensor")
TIMED_PHASES = ("setup", "sensor-registration", "user-registration", "authentication")


def parse_notation(text: str) -> Dict[str, int]:
    """``"3P+4M+6H"`` -> ``{"P": 3, "M": 4, "E": 0, "H": 6}``."""
    out = {"P": 0, "M": 0, "E": 0, "H": 0}
    if text.strip() in ("", "0"):
        return out
    for term in text.split("+"):
        term = term.strip()
        sym = term[-1]
        if sym not in out:
            raise ValueError(f"unknown operation symbol in {text!r}")
        out[sym] += int(term[:-1]) if term[:-1] else 1
    return out


def without_mac(counts: OpCounts) -> OpCounts:
    out = OpCounts(counts.pairings, counts.g1_mults, counts.g2_exps, counts.hashes)
    out.labels.update(counts.labels)
    macs = out.labels.pop("mac", 0)
    out.hashes -= macs
    return out


def _counts_dict(counts: OpCounts) -> dict:
    d = counts.as_dict()
    d["notation"] = counts.notation()
    return d


def _delta(measured: Dict[str, int], reference: Dict[str, int]) -> Dict[str, int]:
    return {k: measured[k] - reference[k] for k in ("P", "M", "E", "H") if measured[k] != reference[k]}


@dataclass
class Comparison:
    entity: str
    reference: str
    measured: str
    basis: str
    match: bool
    delta: Dict[str, int] = field(default_factory=dict)
    note: str = ""


@dataclass
class TimingStats:
    mean_ms: float
    variance_ms2: float
    stdev_ms: float
    min_ms: float
    max_ms: float
    samples: int

    @classmethod
    def from_samples(cls, samples: List[float]) -> "TimingStats":
        var = statistics.variance(samples) if len(samples) > 1 else 0.0
        return cls(
            mean_ms=statistics.fmean(samples),
            variance_ms2=var,
            stdev_ms=var ** 0.5,
            min_ms=min(samples),
            max_ms=max(samples),
            samples=len(samples),
        )


@dataclass
class BenchReport:
    backend: str
    iterations: int
    seed: Optional[int]
    counts: Dict[str, dict]
    comparison: List[Comparison]
    timings: Dict[str, TimingStats]
    wire: dict
    environment: dict
    schema: str = SCHEMA_ID

    def count(self, entity: str, phase: Optional[str] = None, step: Optional[str] = None, mac: bool = True) -> Dict[str, int]:
        node = self.counts[entity]
        if phase is not None:
            node = node["phases"][phase]
            if step is not None:
                node = node["steps"][step]
        key = "total" if mac else "total_excluding_mac"
        if step is not None:
            key = "counts" if mac else "excluding_mac"
        return {k: node[key][k] for k in ("P", "M", "E", "H")}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["timings"] = {k: asdict(v) for k, v in self.timings.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"backend {self.backend}, {self.iterations} iterations"]
        lines.append("operation counts (MAC excluded in brackets):")
        for entity in ENTITIES:
            for phase, node in sorted(self.counts[entity]["phases"].items()):
                lines.append(
                    f"  {entity:<7}{phase:<16}{node['total']['notation']:<14}"
                    f"[{node['total_excluding_mac']['notation']}]"
                )
                for step, s in sorted(node["steps"].items()):
                    lines.append(f"      {step or '-':<23}{s['counts']['notation']}")
        lines.append("against the reference row:")
        for c in self.comparison:
            mark = "match" if c.match else f"DELTA {c.delta}"
            lines.append(f"  {c.entity:<7}ref {c.reference:<10} measured {c.measured:<10} {mark}  ({c.basis})")
            if c.note:
                lines.append(f"          {c.note}")
        lines.append("timings (ms, mean +- stdev):")
        for name, t in self.timings.items():
            lines.append(f"  {name:<22}{t.mean_ms:9.3f} +- {t.stdev_ms:.3f}  (var {t.variance_ms2:.4f}, n={t.samples})")
        w = self.wire
        lines.append(
            f"wire: service request {w['service_request_bytes']['measured']} B, mac confirm "
            f"{w['mac_confirm_bytes']['measured']} B, payload {w['payload_bits']} bits "
            f"(reference {w['reference_bits']} bits)"
        )
        return "\n".join(lines)


def _collect_counts(counter: OpCounter) -> Dict[str, dict]:
    out: Dict[str, dict] = {}
    for entity in ENTITIES:
        phases = {}
        for phase in counter.phases(entity):
            steps = {}
            for step in counter.steps(entity, phase):
                c = counter.total(entity, phase, step)
                steps[step] = {"counts": _counts_dict(c), "excluding_mac": _counts_dict(without_mac(c))}
            total = counter.total(entity, phase)
            phases[phase] = {
                "total": _counts_dict(total),
                "total_excluding_mac": _counts_dict(without_mac(total)),
                "steps": steps,
            }
        total = counter.total(entity)
        out[entity] = {"total": _counts_dict(total), "phases": phases}
    return out


def _compare(counter: OpCounter) -> List[Comparison]:
    result = []

    user = without_mac(counter.total("user", "authentication"))
    ref = parse_notation(REFERENCE["user"])
    sign = counter.total("user", "authentication", "signcrypt")
    result.append(
        Comparison(
            "user",
            REFERENCE["user"],
            user.notation(),
            "authentication phase, MAC excluded",
            user.as_dict() == ref,
            _delta(user.as_dict(), ref),
            f"signcrypt step alone is {sign.notation()}; the confirm step adds the "
            f"h1 and session-key hashes",
        )
    )

    gwn = without_mac(counter.total("gwn", "registration"))
    ref = parse_notation(REFERENCE["gwn"])
    result.append(
        Comparison(
            "gwn",
            REFERENCE["gwn"],
            gwn.notation(),
            "registration phase (credential + partial key)",
            gwn.as_dict() == ref,
            _delta(gwn.as_dict(), ref),
            "H0 and H1 for the credential plus H1 for the partial key",
        )
    )

    reg = counter.total("sensor", "registration")
    auth = without_mac(counter.total("sensor", "authentication"))
    combined = OpCounts(pairings=reg.pairings, g1_mults=auth.g1_mults, g2_exps=auth.g2_exps, hashes=auth.hashes)
    ref = parse_notation(REFERENCE["sensor"])
    result.append(
        Comparison(
            "sensor",
            REFERENCE["sensor"],
            combined.notation(),
            "registration pairings + authentication phase, MAC excluded",
            combined.as_dict() == ref,
            _delta(combined.as_dict(), ref),
            f"registration phase in full is {reg.notation()}",
        )
    )
    return result


def _timed(fn: Callable[[], object]) -> float:
    t0 = time.perf_counter()
    fn()
    return (time.perf_counter() - t0) * 1000.0


def _run_once(backend: PairingBackend, rng: random.Random, samples: Optional[Dict[str, List[float]]] = None):
    """Setup, both registrations and one handshake; optionally timed."""
    box: dict = {}

    def setup():
        box["gwn"] = Gateway.create(backend, rng)

    def sensor_reg():
        gwn = box["gwn"]
        sensor = Sensor(gwn.params, b"sensor-0", rng)
        resp, _ = gwn.register_sensor(sensor.registration_request())
        sensor.install_partial_key(resp)
        box["sensor"] = sensor

    def user_reg():
        user = User(box["gwn"].params, b"user-0", rng)
        register_user(box["gwn"], user, (box["sensor"],))
        box["user"] = user

    steps: Dict[str, float] = {}

    def handshake():
        user, sensor = box["user"], box["sensor"]
        t0 = time.perf_counter()
        req = wire.encode(user.begin_auth(sensor.id_c))
        t1 = time.perf_counter()
        reply = wire.encode(sensor.handle_request(wire.decode(req)))
        t2 = time.perf_counter()
        box["session"] = user.complete_auth(wire.decode(reply), sensor.id_c)
        t3 = time.perf_counter()
        box["request"], box["reply"] = req, reply
        steps["user:signcrypt"] = (t1 - t0) * 1000.0
        steps["sensor:handle"] = (t2 - t1) * 1000.0
        steps["user:confirm"] = (t3 - t2) * 1000.0

    for name, fn in zip(TIMED_PHASES, (setup, sensor_reg, user_reg, handshake)):
        ms = _timed(fn)
        if samples is not None:
            samples[name].append(ms)
    sensor_key = box["sensor"].sessions[box["user"].credential.Acd.encode()].key
    if box["session"].key != sensor_key:
        raise RuntimeError("benchmark handshake produced mismatched keys")
    if samples is not None:
        for name, ms in steps.items():
            samples[name].append(ms)
    return box


def _wire_report(backend: PairingBackend, n_bytes: int, request: bytes, reply: bytes) -> dict:
    g1, sc = backend.g1_size, backend.scalar_size
    analytic_req = wire.service_request_size(g1, sc, n_bytes)
    analytic_conf = wire.mac_confirm_size(MAC_SIZE)
    return {
        "element_sizes": {"g1_bytes": g1, "scalar_bytes": sc, "n_bytes": n_bytes, "timestamp_bytes": 8, "mac_bytes": MAC_SIZE},
        "service_request_bytes": {"analytic": analytic_req, "measured": len(request)},
        "mac_confirm_bytes": {"analytic": analytic_conf, "measured": len(reply)},
        "total_bytes": {"analytic": analytic_req + analytic_conf, "measured": len(request) + len(reply)},
        "payload_bits": wire.payload_bits(g1, sc, n_bytes, MAC_SIZE),
        "reference_bits": REFERENCE["communication_bits"],
        "agree": analytic_req == len(request) and analytic_conf == len(reply),
    }


def run_benchmark(backend: str = "toy", iterations: int = 100, seed: Optional[int] = 0) -> BenchReport:
    """Count one seeded run, then time ``iterations`` independent runs."""
    if iterations < 1:
        raise ValueError("iterations must be positive")
    be = get_backend(backend)
    rng = random.Random(seed) if seed is not None else random.SystemRandom()

    counter = OpCounter()
    with counting(counter):
        box = _run_once(be, rng)
    counts = _collect_counts(counter)
    comparison = _compare(counter)
    wire_info = _wire_report(be, box["gwn"].params.n_bytes, box["request"], box["reply"])

    samples: Dict[str, List[float]] = {
        name: [] for name in TIMED_PHASES + ("user:signcrypt", "sensor:handle", "user:confirm")
    }
    for _ in range(iterations):
        _run_once(be, rng, samples)
    timings = {name: TimingStats.from_samples(v) for name, v in samples.items()}

    env = {
        "python": platform.python_version(),
        "machine": platform.machine(),
        "system": platform.system(),
        "reference_total_ms": REFERENCE["total_ms"],
        "note": "reference milliseconds come from different hardware and are not a target",
    }
    return BenchReport(be.name, iterations, seed, counts, comparison, timings, wire_info, env)

