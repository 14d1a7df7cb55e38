"""Command-line entry point: ``hetauth <command> [options]``.

Exit codes: 0 success, 1 a check or scenario failed, 2 usage error,
3 protocol error (rejection, failed confirmation, bad registration),
4 I/O or transport error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import random
import signal
import sys
import threading
from typing import Dict, List, Optional

from hetauth import attacks, scheme, wire
from hetauth.algebra import BACKEND_NAMES, get_backend
from hetauth.bench import run_benchmark
from hetauth.engine import Gateway, ServiceNode, Sensor, User, deploy
from hetauth.errors import ProtocolError
from hetauth.runner import attach, handshake_direct, handshake_sim, handshake_socket
from hetauth.transport import SimClock, SimNetwork, TransportError, connect, parse_address, serve

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_PROTOCOL = 3
EXIT_IO = 4

ENV_BACKEND = "HETAUTH_BACKEND"

log = logging.getLogger("hetauth")


class UsageError(Exception):
    pass


def fingerprint(key: bytes) -> str:
    return hashlib.sha256(key).hexdigest()[:16]


def _rng(seed: Optional[int]) -> random.Random:
    return random.Random(seed) if seed is not None else scheme.default_rng()


def _emit(args: argparse.Namespace, data: dict, text: str) -> None:
    if args.out == "json":
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(text)


def _psk(text: Optional[str]) -> Optional[bytes]:
    if text is None:
        return None
    try:
        key = bytes.fromhex(text)
    except ValueError:
        raise UsageError("--psk must be hex") from None
    if len(key) not in (16, 24, 32):
        raise UsageError("--psk must be 16, 24 or 32 bytes of hex")
    return key


def _load_params(path: str) -> scheme.SystemParams:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return scheme.params_from_public(
        get_backend(d["backend"]), bytes.fromhex(d["P_pub"]), d["l"], d["n"], d["delta_t_ms"]
    )


# ---------------------------------------------------------------- commands


def cmd_keygen(args: argparse.Namespace) -> int:
    rng = _rng(args.seed)
    backend = get_backend(args.backend)
    params, master = scheme.setup(backend, rng=rng)
    user = scheme.user_keygen(args.id.encode(), params, rng)
    data = {
        "params": params.describe(),
        "gwn": {"s": backend.encode_scalar(master.s).hex()},
        "user": {"id": args.id, "x_p": backend.encode_scalar(user.x_p).hex(), "PK_p": user.PK_p.encode().hex()},
    }
    text = "\n".join(
        [
            f"backend   {backend.name}",
            f"P_pub     {data['params']['P_pub']}",
            f"user      {args.id}",
            f"PK_p      {data['user']['PK_p']}",
            "(secrets only in --out json)",
        ]
    )
    _emit(args, data, text)
    return EXIT_OK


def _register_remote(args: argparse.Namespace) -> tuple:
    if not args.params:
        raise UsageError("--connect needs --params (written by `serve --params-out`)")
    params = _load_params(args.params)
    user = User(params, args.id.encode(), _rng(args.seed))
    with connect(parse_address(args.connect), _psk(args.psk)) as client:
        resp = client.request(user.registration_request())
        if not isinstance(resp, wire.UserRegResponse):
            raise ProtocolError(f"registration refused: {resp}")
        cred = user.install_credential(resp)
    return params, user, cred


def cmd_register(args: argparse.Namespace) -> int:
    if args.connect:
        params, user, cred = _register_remote(args)
        sensor_ok = None
    else:
        dep = deploy(get_backend(args.backend), _rng(args.seed), users=1, id_c=args.sensor.encode())
        params, user, cred = dep.params, dep.user, dep.user.credential
        km = dep.sensor.keys
        sensor_ok = scheme.verify_partial_key(km.T, km.d, km.gamma, params)
    data = {
        "params": params.describe(),
        "user": {"id": args.id if args.connect else user.id_p.decode(), "PK_p": user.keys.PK_p.encode().hex()},
        "credential": {
            "Acd": cred.Acd.encode().hex(),
            "sigma1": params.backend.encode_scalar(cred.sigma1).hex(),
            "delta": params.backend.encode_scalar(cred.delta).hex(),
            "verified": scheme.verify_credential(cred, params),
        },
    }
    if sensor_ok is not None:
        data["sensor"] = {"id": args.sensor, "partial_key_verified": sensor_ok}
    lines = [f"credential Acd {data['credential']['Acd']}", f"credential verified {data['credential']['verified']}"]
    if sensor_ok is not None:
        lines.append(f"sensor partial key verified {sensor_ok}")
    _emit(args, data, "\n".join(lines))
    return EXIT_OK


def _handshake_local(args: argparse.Namespace) -> dict:
    # a seeded run also pins the clock, so the whole exchange is reproducible
    clock = SimClock() if args.transport == "sim" or args.seed is not None else None
    dep = deploy(get_backend(args.backend), _rng(args.seed), users=1, clock=clock)
    if args.transport == "sim":
        net = SimNetwork(seed=args.seed or 0, clock=clock)
        attach(net, dep)
        result = handshake_sim(net, dep)
    elif args.transport == "direct":
        result = handshake_direct(dep)
    else:
        node = ServiceNode(dep.gateway, dep.sensor)
        with serve(("127.0.0.1", 0), node.handle) as server:
            with connect(server.address) as client:
                result = handshake_socket(client, dep.user, dep.sensor.id_c)
        result.sensor_session = dep.sensor.sessions.get(dep.user.credential.Acd.encode())
    if not result.ok:
        raise ProtocolError(f"handshake did not complete: {result.decisions}")
    return {
        "backend": dep.params.backend.name,
        "transport": args.transport,
        "user_key": fingerprint(result.user_session.key),
        "sensor_key": fingerprint(result.sensor_session.key),
        "match": result.user_session.key == result.sensor_session.key,
        "request_bytes": len(result.request),
        "confirm_bytes": len(result.confirm),
        "decisions": result.decisions,
    }


def _handshake_remote(args: argparse.Namespace) -> dict:
    if not args.register:
        raise UsageError("--connect needs --register HOST:PORT for the registration channel")
    reg_args = argparse.Namespace(**vars(args))
    reg_args.connect = args.register
    params, user, _ = _register_remote(reg_args)
    with connect(parse_address(args.connect)) as client:
        info = client.request(wire.SensorInfoRequest(args.sensor.encode()))
        if not isinstance(info, wire.SensorInfo):
            raise ProtocolError(f"sensor info refused: {info}")
        user.add_sensor(info)
        result = handshake_socket(client, user, bytes(info.id_c))
    if result.user_session is None:
        raise ProtocolError(f"handshake did not complete: {result.decisions}")
    return {
        "backend": params.backend.name,
        "transport": "tcp",
        "user_key": fingerprint(result.user_session.key),
        "request_bytes": len(result.request),
        "confirm_bytes": len(result.confirm),
        "decisions": result.decisions,
    }


def cmd_handshake(args: argparse.Namespace) -> int:
    data = _handshake_remote(args) if args.connect else _handshake_local(args)
    lines = [f"user   session key {data['user_key']}"]
    if "sensor_key" in data:
        lines.append(f"sensor session key {data['sensor_key']}")
        lines.append("keys match" if data["match"] else "KEYS DIFFER")
    else:
        lines.append("sensor confirmation verified")
    _emit(args, data, "\n".join(lines))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    rng = _rng(args.seed)
    gateway = Gateway.create(get_backend(args.backend), rng)
    sensor = Sensor(gateway.params, args.sensor.encode(), rng)
    resp, _ = gateway.register_sensor(sensor.registration_request())
    sensor.install_partial_key(resp)
    node = ServiceNode(gateway, sensor)
    psk = _psk(args.psk)
    if psk is None:
        raise UsageError("serve needs --psk for the registration channel")
    auth = serve(parse_address(args.listen), node.handle)
    reg = serve(parse_address(args.register_listen), node.handle, psk=psk)
    desc = gateway.params.describe()
    if args.params_out:
        with open(args.params_out, "w", encoding="utf-8") as fh:
            json.dump(desc, fh, indent=2)
    print(
        json.dumps({"auth": "%s:%d" % auth.address, "registration": "%s:%d" % reg.address, "params": desc}),
        flush=True,
    )
    stop = threading.Event()
    try:
        signal.signal(signal.SIGTERM, lambda *_: stop.set())
    except ValueError:
        pass  # not the main thread
    try:
        stop.wait(args.duration if args.duration else None)
    except KeyboardInterrupt:
        pass
    finally:
        auth.stop()
        reg.stop()
    return EXIT_OK


def cmd_attack(args: argparse.Namespace) -> int:
    kwargs = {}
    if args.volume is not None:
        kwargs["volume"] = args.volume
    if args.attempts is not None:
        kwargs["attempts"] = args.attempts
    if args.sessions is not None:
        kwargs["sessions"] = args.sessions
    backend = args.backend or os.environ.get(ENV_BACKEND)
    try:
        verdict = attacks.run_scenario(args.scenario, seed=args.seed or 0, backend=backend, **kwargs)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    print(verdict.to_json() if args.report == "json" else verdict.to_text())
    return EXIT_OK if verdict.passed else EXIT_FAILED


def cmd_bench(args: argparse.Namespace) -> int:
    report = run_benchmark(args.backend, args.iterations, args.seed if args.seed is not None else 0)
    print(report.to_json() if args.out == "json" else report.to_text())
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    default_backend = os.environ.get(ENV_BACKEND, "toy")
    common = _Parser(add_help=False)
    common.add_argument("--backend", choices=BACKEND_NAMES, default=default_backend,
                        help=f"pairing backend (default ${ENV_BACKEND} or toy)")
    common.add_argument("--seed", type=int, default=None, help="seed for reproducible runs")
    common.add_argument("--out", choices=("json", "text"), default="text")

    p = _Parser(prog="hetauth", description="Anonymous PKI-to-CLC authentication and key agreement.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    k = sub.add_parser("keygen", parents=[common], help="system setup and a user key pair")
    k.add_argument("--id", default="user-0")
    k.set_defaults(func=cmd_keygen)

    r = sub.add_parser("register", parents=[common], help="run both registration steps")
    r.add_argument("--id", default="user-0")
    r.add_argument("--sensor", default="sensor-0")
    r.add_argument("--connect", metavar="HOST:PORT", help="registration port of a running `serve`")
    r.add_argument("--psk", metavar="HEX")
    r.add_argument("--params", metavar="FILE")
    r.set_defaults(func=cmd_register)

    h = sub.add_parser("handshake", parents=[common], help="one authentication round")
    h.add_argument("--transport", choices=("sim", "loopback", "direct"), default="sim")
    h.add_argument("--id", default="user-0")
    h.add_argument("--sensor", default="sensor-0")
    h.add_argument("--connect", metavar="HOST:PORT", help="authentication port of a running `serve`")
    h.add_argument("--register", metavar="HOST:PORT", help="its registration port")
    h.add_argument("--psk", metavar="HEX")
    h.add_argument("--params", metavar="FILE")
    h.set_defaults(func=cmd_handshake)

    s = sub.add_parser("serve", parents=[common], help="host a gateway and sensor over TCP")
    s.add_argument("--listen", default="127.0.0.1:7400", metavar="HOST:PORT")
    s.add_argument("--register-listen", default="127.0.0.1:7401", metavar="HOST:PORT")
    s.add_argument("--sensor", default="sensor-0")
    s.add_argument("--psk", metavar="HEX")
    s.add_argument("--params-out", metavar="FILE")
    s.add_argument("--duration", type=float, default=0, help="seconds to serve (0 = until interrupted)")
    s.set_defaults(func=cmd_serve)

    a = sub.add_parser("attack", help="run an adversary scenario")
    a.add_argument("scenario", choices=sorted(attacks.SCENARIOS))
    a.add_argument("--backend", choices=BACKEND_NAMES, default=None,
                   help="overrides the scenario default")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--report", "--out", dest="report", choices=("json", "text"), default="text")
    a.add_argument("--volume", type=int)
    a.add_argument("--attempts", type=int)
    a.add_argument("--sessions", type=int)
    a.set_defaults(func=cmd_attack)

    b = sub.add_parser("bench", parents=[common], help="operation counts, timings and wire sizes")
    b.add_argument("--iterations", type=int, default=100)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"hetauth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers: Dict[type, int] = {
        UsageError: EXIT_USAGE,
        ProtocolError: EXIT_PROTOCOL,
        TransportError: EXIT_IO,
        OSError: EXIT_IO,
        wire.MalformedMessage: EXIT_PROTOCOL,
    }
    try:
        return args.func(args)
    except tuple(handlers) as exc:
        code = next(c for t, c in handlers.items() if isinstance(exc, t))
        print(f"hetauth: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


def run() -> None:
    sys.exit(main())
