"""Seedable cryptographic pseudo-random generator.

A SHA-256 counter-mode stream. With a seed every party's randomness is
reproducible (test mode); without one the key is drawn from the OS.
"""

import hashlib
import secrets


class Prng:
    def __init__(self, seed=None):
        if seed is None:
            key = secrets.token_bytes(32)
        elif isinstance(seed, bytes):
            key = hashlib.sha256(b"seed:" + seed).digest()
        else:
            key = hashlib.sha256(b"seed:" + str(seed).encode()).digest()
        self._key = key
        self._counter = 0
        self._buf = b""

    def fork(self, label):
        """Independent child stream, keyed by ``label``."""
        child = Prng.__new__(Prng)
        child._key = hashlib.sha256(self._key + b"/" + label.encode()).digest()
        child._counter = 0
        child._buf = b""
        return child

    def randbytes(self, n):
        while len(self._buf) < n:
            block = hashlib.sha256(self._key + self._counter.to_bytes(8, "big")).digest()
            self._counter += 1
            self._buf += block
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def getrandbits(self, k):
        if k <= 0:
            return 0
        v = int.from_bytes(self.randbytes((k + 7) // 8), "big")
        return v >> ((8 - k % 8) % 8)

    def randbelow(self, n):
        if n <= 0:
            raise ValueError("upper bound must be positive")
        k = n.bit_length()
        while True:
            v = self.getrandbits(k)
            if v < n:
                return v

    def randbit(self):
        return self.getrandbits(1)


def as_prng(rng):
    """Accept a Prng, a seed, or None."""
    if isinstance(rng, Prng):
        return rng
    return Prng(rng)
