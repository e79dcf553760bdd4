"""Paillier cryptosystem with ``g = N + 1`` and CRT decryption.

Plaintexts live in ``Z_N``; signed integers are mapped with the usual
``N/2`` split (negative ``v`` becomes ``N - |v|``).
"""

from dataclasses import dataclass

import gmpy2

from ._rng import as_prng


class CiphertextOutOfGroup(ValueError):
    pass


class MagnitudeOverflow(ValueError):
    """``|v| >= N/2``: the value has no signed encoding."""


@dataclass(frozen=True)
class PublicKey:
    n: int
    bits: int

    @property
    def n2(self):
        return self.n * self.n

    @property
    def ciphertext_bytes(self):
        return 2 * self.bits // 8

    def to_bytes(self):
        return int(self.n).to_bytes(self.bits // 8, "big")

    @classmethod
    def from_bytes(cls, data):
        n = int.from_bytes(data, "big")
        if n.bit_length() != 8 * len(data):
            raise ValueError("public key is not a full-length modulus")
        return cls(n, 8 * len(data))


@dataclass(frozen=True)
class PrivateKey:
    p: int
    q: int

    def __post_init__(self):
        p, q = gmpy2.mpz(self.p), gmpy2.mpz(self.q)
        p2, q2 = p * p, q * q
        # h_p = L_p(g^(p-1) mod p^2)^-1 mod p, with g = N + 1
        g = p * q + 1
        hp = gmpy2.invert((gmpy2.powmod(g, p - 1, p2) - 1) // p, p)
        hq = gmpy2.invert((gmpy2.powmod(g, q - 1, q2) - 1) // q, q)
        object.__setattr__(self, "_crt", (p, q, p2, q2, hp, hq, gmpy2.invert(p, q)))


@dataclass(frozen=True)
class Keypair:
    public: PublicKey
    private: PrivateKey


def _prime(rng, bits):
    while True:
        cand = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        p = gmpy2.next_prime(cand)
        if p.bit_length() == bits:
            return p


def keygen(bits=1024, rng=None, insecure_test_keys=False) -> Keypair:
    """Fresh keypair with a ``bits``-bit modulus.

    Moduli below 256 bits are refused unless ``insecure_test_keys`` is set
    (down to 64 bits, for fast tests).
    """
    floor = 64 if insecure_test_keys else 256
    if bits < floor or bits % 16:
        raise ValueError(f"modulus length {bits} not allowed (minimum {floor}, multiple of 16)")
    rng = as_prng(rng)
    while True:
        p, q = _prime(rng, bits // 2), _prime(rng, bits // 2)
        n = p * q
        if p != q and n.bit_length() == bits and gmpy2.gcd(n, (p - 1) * (q - 1)) == 1:
            return Keypair(PublicKey(int(n), bits), PrivateKey(int(p), int(q)))


def _check(pk, c):
    if not 0 < c < pk.n2 or gmpy2.gcd(c, pk.n) != 1:
        raise CiphertextOutOfGroup("ciphertext is not a unit modulo N^2")


def encrypt(pk: PublicKey, m, rng=None):
    if not 0 <= m < pk.n:
        raise ValueError("plaintext outside [0, N)")
    rng = as_prng(rng)
    while True:
        r = rng.randbelow(pk.n)
        if r and gmpy2.gcd(r, pk.n) == 1:
            break
    n2 = pk.n2
    # (1 + N)^m = 1 + mN  (mod N^2)
    return int((1 + m * pk.n) * gmpy2.powmod(r, pk.n, n2) % n2)


def encrypt_trivial(pk: PublicKey, m):
    """Deterministic encryption with randomness 1; only for values the other party knows anyway."""
    if not 0 <= m < pk.n:
        raise ValueError("plaintext outside [0, N)")
    return (1 + m * pk.n) % pk.n2


def decrypt(sk: PrivateKey, c):
    p, q, p2, q2, hp, hq, pinv = sk._crt
    n = p * q
    if not 0 < c < n * n or gmpy2.gcd(c, n) != 1:
        raise CiphertextOutOfGroup("ciphertext is not a unit modulo N^2")
    mp = (gmpy2.powmod(c, p - 1, p2) - 1) // p * hp % p
    mq = (gmpy2.powmod(c, q - 1, q2) - 1) // q * hq % q
    return int(mp + ((mq - mp) * pinv % q) * p)


def add(pk: PublicKey, a, b):
    return a * b % pk.n2


def scalar_mul(pk: PublicKey, c, s):
    """Encryption of ``s * m``; a negative ``s`` is reduced modulo ``N``."""
    _check(pk, c)
    return int(gmpy2.powmod(c, s % pk.n, pk.n2))


def rerandomize(pk: PublicKey, c, rng=None):
    return add(pk, c, encrypt(pk, 0, rng))


def encode_signed(pk: PublicKey, v):
    if 2 * abs(v) >= pk.n:
        raise MagnitudeOverflow(f"|{v}| does not fit below N/2")
    return v % pk.n


def decode_signed(pk: PublicKey, m):
    if not 0 <= m < pk.n:
        raise ValueError("plaintext outside [0, N)")
    return m - pk.n if 2 * m >= pk.n else m


def ciphertext_to_bytes(pk: PublicKey, c):
    return int(c).to_bytes(pk.ciphertext_bytes, "big")


def ciphertext_from_bytes(pk: PublicKey, data):
    if len(data) != pk.ciphertext_bytes:
        raise CiphertextOutOfGroup(f"ciphertext must be {pk.ciphertext_bytes} bytes")
    c = int.from_bytes(data, "big")
    _check(pk, c)
    return c


def pack_ciphertexts(pk, cs):
    return b"".join(ciphertext_to_bytes(pk, c) for c in cs)


def unpack_ciphertexts(pk, data):
    n = pk.ciphertext_bytes
    if len(data) % n:
        raise CiphertextOutOfGroup("ciphertext batch has a ragged length")
    return [ciphertext_from_bytes(pk, data[i:i + n]) for i in range(0, len(data), n)]
