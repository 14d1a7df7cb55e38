import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetauth.algebra import (
    BLS12_381_ORDER,
    TOY_Q,
    WIDE_TOY_Q,
    DecodeError,
    EntropyError,
    ToyBackend,
    get_backend,
    is_probable_prime,
    random_bits,
    scalar_random,
)

toy_scalars = st.integers(min_value=0, max_value=TOY_Q - 1)


class _BrokenRng(random.Random):
    def randrange(self, *a, **k):
        raise OSError("no entropy")

    def getrandbits(self, k):
        raise OSError("no entropy")


# -- samplers


def test_scalar_random_pinned_vectors():
    # frozen from random.Random(seed).randrange(1, 1009)
    assert scalar_random(random.Random(2024), TOY_Q) == 482
    assert scalar_random(random.Random(7), TOY_Q) == 332


@given(st.integers(min_value=0, max_value=2**32))
def test_scalar_random_range(seed):
    v = scalar_random(random.Random(seed), TOY_Q)
    assert 0 < v < TOY_Q


def test_scalar_random_distinct_seeds():
    q = BLS12_381_ORDER
    assert scalar_random(random.Random(1), q) != scalar_random(random.Random(2), q)


def test_entropy_failure_is_fatal():
    with pytest.raises(EntropyError):
        scalar_random(_BrokenRng(), TOY_Q)
    with pytest.raises(EntropyError):
        random_bits(_BrokenRng(), 256)


def test_random_bits_width():
    assert len(random_bits(random.Random(0), 256)) == 32


# -- moduli


def test_moduli_are_prime():
    assert is_probable_prime(TOY_Q)
    assert is_probable_prime(WIDE_TOY_Q)
    assert is_probable_prime(BLS12_381_ORDER)
    assert not is_probable_prime(1001)
    assert not is_probable_prime(561)  # Carmichael


def test_toy_rejects_composite_modulus():
    with pytest.raises(ValueError):
        ToyBackend(1000)


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("nope")
    assert get_backend("bls12-381") is get_backend("production")


# -- toy backend: group laws and bilinearity, checked in the dlog view


@given(toy_scalars, toy_scalars)
def test_toy_bilinearity(a, b):
    be = get_backend("toy")
    P = be.generator()
    g = be.pair(P, P)
    assert be.pair(a * P, b * P) == g ** (a * b)
    assert be.gt_dlog(be.pair(a * P, b * P)) == (a * b) % TOY_Q


@given(toy_scalars, toy_scalars)
def test_toy_group_laws(a, b):
    be = get_backend("toy")
    P = be.generator()
    X = a * P
    assert TOY_Q * X == be.identity()
    assert (a + b) * P == a * P + b * P
    assert X - X == be.identity()
    assert be.dlog(X) == a


def test_toy_non_degenerate(toy):
    P = toy.generator()
    assert toy.pair(P, P) != toy.gt_one()


@given(toy_scalars)
def test_toy_encoding_roundtrip(a):
    be = get_backend("toy")
    X = be.element(a)
    assert len(X.encode()) == be.g1_size == 2
    assert be.decode_g1(X.encode()) == X


def test_toy_decode_rejects(toy):
    with pytest.raises(DecodeError):
        toy.decode_g1(b"\x00")
    with pytest.raises(DecodeError):
        toy.decode_g1((TOY_Q).to_bytes(2, "big"))
    with pytest.raises(DecodeError):
        toy.decode_scalar((TOY_Q).to_bytes(2, "big"))
    with pytest.raises(ValueError):
        toy.encode_scalar(TOY_Q)


def test_toy_wide_sizes(toy_wide):
    assert toy_wide.q == 2**61 - 1
    assert toy_wide.scalar_size == toy_wide.g1_size == 8


# -- production backend


@pytest.fixture(scope="module")
def bls():
    return get_backend("production")


def test_bls_sizes(bls):
    assert bls.q == BLS12_381_ORDER
    assert bls.g1_size == 48
    assert bls.scalar_size == 32
    assert len(bls.generator().encode()) == 48


@settings(max_examples=5, deadline=None)
@given(st.integers(1, BLS12_381_ORDER - 1), st.integers(1, BLS12_381_ORDER - 1))
def test_bls_bilinearity(a, b):
    be = get_backend("production")
    P = be.generator()
    g = be.pair(P, P)
    assert be.pair(a * P, b * P) == g ** (a * b % be.q)
    assert be.pair(a * P, b * P) == be.pair(b * P, a * P)


def test_bls_non_degenerate_and_order(bls):
    P = bls.generator()
    assert bls.pair(P, P) != bls.gt_one()
    assert bls.q * P == bls.identity()
    assert (bls.q - 1) * P == -P


def test_bls_large_scalars_reduce(bls):
    P = bls.generator()
    k = BLS12_381_ORDER + 5
    assert k * P == 5 * P
    assert (2**255 + 3) * P == ((2**255 + 3) % bls.q) * P


def test_bls_encoding_roundtrip(bls):
    X = 123456789 * bls.generator()
    Y = bls.decode_g1(X.encode())
    assert Y == X
    # decoded points pair fine as first argument
    assert bls.pair(Y, bls.generator()) == bls.pair(X, bls.generator())


def test_bls_decoded_point_has_no_mirror(bls):
    Y = bls.decode_g1((7 * bls.generator()).encode())
    assert not bls.has_mirror(Y)
    with pytest.raises(ValueError):
        bls.pair(bls.generator(), Y)


def test_bls_decode_rejects(bls):
    with pytest.raises(DecodeError):
        bls.decode_g1(b"\x00" * 47)
    with pytest.raises(DecodeError):
        bls.decode_g1(b"\xff" * 48)


def test_bls_lazy_mirror_matches_eager(bls):
    P = bls.generator()
    X = 11 * P + 5 * (3 * P) - 2 * P  # 24P built through deferred mirrors
    assert bls.pair(P, X) == bls.pair(P, 24 * P)
    assert bls.pair(P, X) == bls.pair(P, P) ** 24
