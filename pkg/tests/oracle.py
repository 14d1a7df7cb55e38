"""Independent reference computations for the toy backend.

Nothing here imports the package's scheme or hash code.  Group elements are
plain exponents mod q (the toy backend's dlog view), hashes are rebuilt from
hashlib, and the protocol arithmetic is written out once more by hand.
Tests compare the library against these values; regression vectors in the
suite were produced by this module and then frozen.
"""

import hashlib
import hmac
import struct

TAGS = {name: f"HETAUTH/{name}".encode() for name in ("H0", "H1", "H2", "H3", "H4", "MAC")}


def parts(*items):
    return b"".join(struct.pack(">I", len(x)) + bytes(x) for x in items)


def width(q):
    return (q.bit_length() + 7) // 8


def enc(v, q):
    return (v % q).to_bytes(width(q), "big")


def hash_scalar(tag, q, *items):
    ctr = 0
    while True:
        data = parts(TAGS[tag], struct.pack(">I", ctr), *items)
        v = int.from_bytes(hashlib.shake_256(data).digest(width(q) + 16), "big") % q
        if v:
            return v
        ctr += 1


def h3(x, nbytes=32):
    return hashlib.shake_256(parts(TAGS["H3"], x)).digest(nbytes)


def xor(a, b):
    return bytes(x ^ y for x, y in zip(a, b))


def credential(q, s, w1, id_p, pk_p):
    """Exponent of Acd, sigma1 and delta."""
    base = (w1 + hash_scalar("H0", q, id_p)) % q
    delta = hash_scalar("H1", q, id_p, enc(pk_p, q))
    return base, (base + s * delta) % q, delta


def partial_key(q, s, t, id_c):
    gamma = hash_scalar("H1", q, id_c, enc(t, q))
    return t, (t + s * gamma) % q, gamma


def signcrypt(q, x_p, acd, T, pk_c1, gamma, s, m, k):
    """Everything the user sends, as exponents and byte strings."""
    r = hash_scalar("H2", q, k, m)
    r1 = xor(m, h3(k, len(m)))
    r2 = xor(k, h3(r1, len(k)))
    U = (r * pk_c1 + T + gamma * s) % q
    c = (x_p * hash_scalar("H4", q, m) + r) % q
    return {"r": r, "R1": r, "R2": (r + acd) % q, "r1": r1, "r2": r2, "U": U, "c": c}


def session(q, id_c, t_c, acd, c, R1):
    left = parts(id_c, struct.pack(">Q", t_c))
    right = parts(enc(acd, q), enc(c, q))
    h1 = hash_scalar("H1", q, left, right)
    key = enc(hash_scalar("H2", q, enc(h1, q), enc(R1, q)), q)
    m1 = hmac.new(key, parts(TAGS["MAC"], enc(h1, q)), hashlib.sha3_256).digest()
    return h1, key, m1
