import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from hetauth import scheme
from hetauth.algebra import get_backend
from hetauth.errors import RejectReason, Rejected
from hetauth.instrument import OpCounter, counting, op_scope


def _world(backend_name, seed):
    """Setup plus one user and one sensor, all keys exposed."""
    be = get_backend(backend_name)
    rng = random.Random(seed)
    params, master = scheme.setup(be, rng=rng)
    user = scheme.user_keygen(b"alice", params, rng)
    cred = scheme.issue_credential(master, user.id_p, user.PK_p, params, rng)
    partial = scheme.issue_partial_key(master, b"sensor-0", params, rng)
    sensor = scheme.sensor_finalize_keys(b"sensor-0", partial, params, rng)
    return params, master, user, cred, sensor


def test_setup_defaults(toy):
    params, master = scheme.setup(toy, rng=random.Random(1))
    assert params.P_pub == master.s * params.P
    assert params.g == toy.pair(params.P, params.P)
    assert params.n == 256 and params.n_bytes == 32
    assert params.l == 5


def test_params_from_public_roundtrip(prod):
    params, _ = scheme.setup(prod, rng=random.Random(3))
    again = scheme.params_from_public(prod, params.P_pub.encode(), params.l, params.n, params.delta_t)
    assert again.describe() == params.describe()
    assert again.g == params.g


# -- registration algebra against the oracle


@given(st.integers(0, 2**32))
@settings(max_examples=50)
def test_credential_matches_oracle(seed):
    params, master, user, cred, _ = _world("toy-wide", seed)
    be, q = params.backend, params.q
    acd_exp = be.dlog(cred.Acd)
    w1 = (acd_exp - oracle.hash_scalar("H0", q, user.id_p)) % q
    assert oracle.credential(q, master.s, w1, user.id_p, be.dlog(user.PK_p)) == (acd_exp, cred.sigma1, cred.delta)
    assert scheme.verify_credential(cred, params)


@given(st.integers(0, 2**32))
@settings(max_examples=50)
def test_partial_key_matches_oracle(seed):
    params, master, _, _, sensor = _world("toy-wide", seed)
    be, q = params.backend, params.q
    t = be.dlog(sensor.T)
    assert oracle.partial_key(q, master.s, t, b"sensor-0") == (t, sensor.d, sensor.gamma)
    assert scheme.verify_partial_key(sensor.T, sensor.d, sensor.gamma, params)


def test_bad_credential_fails(toy):
    params, _, _, cred, _ = _world("toy", 5)
    bad = scheme.UserCredential(cred.Acd, (cred.sigma1 + 1) % params.q, cred.delta)
    assert not scheme.verify_credential(bad, params)


@given(st.integers(0, 2**32), st.integers(1, 1008))
def test_pairing_and_scalar_partial_key_checks_agree(seed, bump):
    params, _, _, _, sensor = _world("toy", seed)
    for d in (sensor.d, (sensor.d + bump) % params.q):
        assert scheme.verify_partial_key(sensor.T, d, sensor.gamma, params) == scheme.verify_partial_key_scalar(
            sensor.T, d, sensor.gamma, params
        )


def test_verify_partial_key_counts_three_pairings():
    params, _, _, _, sensor = _world("toy", 1)
    c = OpCounter()
    with counting(c), op_scope("sensor", "registration"):
        scheme.verify_partial_key(sensor.T, sensor.d, sensor.gamma, params)
    assert c.total().pairings == 3
    assert c.total().g1_mults == 2


# -- signcryption against the oracle


@given(st.integers(0, 2**32), st.binary(min_size=32, max_size=32))
@settings(max_examples=50)
def test_signcrypt_matches_oracle(seed, m):
    params, master, user, cred, sensor = _world("toy-wide", seed)
    be, q = params.backend, params.q
    R2, sigma = scheme.signcrypt(user, cred, sensor.public, m, params, random.Random(seed))
    k = random.Random(seed).getrandbits(256).to_bytes(32, "big")
    want = oracle.signcrypt(
        q, user.x_p, be.dlog(cred.Acd), be.dlog(sensor.T), be.dlog(sensor.PK_c1), sensor.gamma, master.s, m, k
    )
    assert be.dlog(R2) == want["R2"]
    assert be.dlog(sigma.R1) == want["R1"]
    assert be.dlog(sigma.U) == want["U"]
    assert sigma.c == want["c"]
    assert (sigma.r1, sigma.r2) == (want["r1"], want["r2"])


@given(st.integers(0, 2**32), st.binary(min_size=32, max_size=32))
@settings(max_examples=50)
def test_unsigncrypt_roundtrip(seed, m):
    params, _, user, cred, sensor = _world("toy-wide", seed)
    R2, sigma = scheme.signcrypt(user, cred, sensor.public, m, params, random.Random(seed + 1))
    out = scheme.unsigncrypt(sensor, user.PK_p, R2, sigma, params)
    assert out.m == m
    assert out.Acd == cred.Acd
    assert out.R1 == sigma.R1


@given(st.integers(0, 2**32))
@settings(max_examples=30)
def test_recovery_and_signature_identities(seed):
    params, _, user, cred, sensor = _world("toy-wide", seed)
    m = bytes(range(32))
    _, sigma = scheme.signcrypt(user, cred, sensor.public, m, params, random.Random(seed))
    inv = pow(sensor.x_c, -1, params.q)
    assert inv * (sigma.U - sensor.d * params.P) == sigma.R1
    assert sigma.c * params.P - params.hash.h4(m) * user.PK_p == sigma.R1


def test_production_roundtrip():
    params, _, user, cred, sensor = _world("production", 9)
    m = b"\x42" * 32
    R2, sigma = scheme.signcrypt(user, cred, sensor.public, m, params, random.Random(1))
    out = scheme.unsigncrypt(sensor, user.PK_p, R2, sigma, params)
    assert out.m == m and out.Acd == cred.Acd


def test_wrong_signer_key_rejected():
    params, _, user, cred, sensor = _world("toy-wide", 2)
    R2, sigma = scheme.signcrypt(user, cred, sensor.public, b"\x00" * 32, params, random.Random(0))
    other = scheme.user_keygen(b"mallory", params, random.Random(99))
    with pytest.raises(Rejected) as e:
        scheme.unsigncrypt(sensor, other.PK_p, R2, sigma, params)
    assert e.value.reason is RejectReason.BAD_SIGNATURE


def test_transmitted_r1_must_match_u():
    params, _, user, cred, sensor = _world("toy-wide", 4)
    R2, sigma = scheme.signcrypt(user, cred, sensor.public, b"\x01" * 32, params, random.Random(0))
    forged = scheme.Ciphertext(sigma.c, sigma.R1 + params.P, sigma.r1, sigma.r2, sigma.U)
    with pytest.raises(Rejected) as e:
        scheme.recover(sensor, forged, params)
    assert e.value.reason is RejectReason.BAD_SIGNATURE


def test_malformed_ciphertext_rejected():
    params, _, user, cred, sensor = _world("toy", 4)
    _, sigma = scheme.signcrypt(user, cred, sensor.public, b"\x01" * 32, params, random.Random(0))
    short = scheme.Ciphertext(sigma.c, sigma.R1, sigma.r1[:-1], sigma.r2, sigma.U)
    with pytest.raises(Rejected) as e:
        scheme.recover(sensor, short, params)
    assert e.value.reason is RejectReason.MALFORMED
    with pytest.raises(ValueError):
        scheme.signcrypt(user, cred, sensor.public, b"short", params)


@given(st.integers(0, 2**32), st.integers(0, 2**63))
@settings(max_examples=30)
def test_session_matches_oracle(seed, t_c):
    params, _, user, cred, sensor = _world("toy-wide", seed)
    be = params.backend
    _, sigma = scheme.signcrypt(user, cred, sensor.public, b"\x07" * 32, params, random.Random(seed))
    got = scheme.derive_session(b"sensor-0", t_c, cred.Acd, sigma.c, sigma.R1, params)
    assert (got.h1, got.key, got.m1) == oracle.session(
        params.q, b"sensor-0", t_c, be.dlog(cred.Acd), sigma.c, be.dlog(sigma.R1)
    )


def test_signcrypt_cost_is_3m_4h():
    params, _, user, cred, sensor = _world("toy", 1)
    c = OpCounter()
    with counting(c), op_scope("user", "authentication", "signcrypt"):
        scheme.signcrypt(user, cred, sensor.public, b"\x00" * 32, params, random.Random(0))
    assert c.total().as_dict() == {"P": 0, "M": 3, "E": 0, "H": 4}
