"""Garbled circuits with free-XOR, point-and-permute and 3-row reduction,
plus a Diffie-Hellman based 1-out-of-2 oblivious transfer.

Labels are ``t``-bit integers; the least significant bit is the permute bit.
The global offset ``delta`` has its permute bit set, so the two labels of a
wire always carry opposite permute bits.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import gmpy2

from ._rng import as_prng
from .circuit import NOT, TABLE2, XOR, Circuit

DIGEST_BYTES = 32


class RowAuthFailure(ValueError):
    """An active label does not belong to its wire: the material is corrupted."""


def _check_t(t):
    if t % 8 or not 16 <= t <= 256:
        raise ValueError(f"label length t={t} must be a multiple of 8 in 16..256")


def _h(t, gid, a, b):
    nb = t // 8
    d = hashlib.sha256(gid.to_bytes(8, "big") + a.to_bytes(nb, "big") + b.to_bytes(nb, "big")).digest()
    return int.from_bytes(d[:nb], "big")


def _tag(idx, label):
    return hashlib.sha256(b"out" + idx.to_bytes(4, "big") + label.to_bytes(32, "big")).digest()[:4]


@dataclass
class GarbledCircuit:
    """What the garbler ships: three rows per TABLE2 gate, in circuit order."""

    circuit: Circuit
    t: int
    rows: List[Tuple[int, int, int]]
    digest: bytes = b""

    def __post_init__(self):
        if not self.digest:
            self.digest = self.circuit.digest()

    @property
    def material_bits(self):
        return 3 * self.t * len(self.rows)

    def to_bytes(self):
        nb = self.t // 8
        out = bytearray(self.digest)
        for row in self.rows:
            for v in row:
                out += v.to_bytes(nb, "big")
        return bytes(out)

    @classmethod
    def from_bytes(cls, data, circuit: Circuit, t=80):
        _check_t(t)
        nb = t // 8
        want = circuit.digest()
        if data[:DIGEST_BYTES] != want:
            raise ValueError("garbled material was produced for a different circuit")
        body = data[DIGEST_BYTES:]
        n = sum(1 for g in circuit.gates if g.kind == TABLE2)
        if len(body) != 3 * nb * n:
            raise ValueError(f"expected {3 * nb * n} bytes of gate material, got {len(body)}")
        vals = [int.from_bytes(body[i:i + nb], "big") for i in range(0, len(body), nb)]
        return cls(circuit, t, [tuple(vals[i:i + 3]) for i in range(0, len(vals), 3)], want)


@dataclass
class InputEncoding:
    """Garbler-side secret: zero labels of every input and constant wire, and delta."""

    t: int
    delta: int
    zero_a: List[int]
    zero_b: List[int]
    constants: Dict[int, Tuple[int, int]]  # wire -> (zero label, value)

    def label(self, zero, bit):
        return zero ^ (self.delta if bit else 0)

    def encode_a(self, bits):
        return [self.label(z, b) for z, b in zip(self.zero_a, bits)]

    def encode_b(self, bits):
        if len(bits) != len(self.zero_b):
            raise ValueError("wrong number of garbler input bits")
        return [self.label(z, b) for z, b in zip(self.zero_b, bits)]

    def pairs_a(self):
        """``(label for 0, label for 1)`` per evaluator input, for the OT."""
        return [(z, z ^ self.delta) for z in self.zero_a]

    def constant_labels(self):
        return {w: self.label(z, v) for w, (z, v) in self.constants.items()}


@dataclass
class DecodeMap:
    permute: List[int]
    tags: List[Tuple[bytes, bytes]] = field(default_factory=list)

    def to_bytes(self):
        out = bytearray(len(self.permute).to_bytes(4, "big"))
        out += bytes(self.permute)
        for z, o in self.tags:
            out += z + o
        return bytes(out)

    @classmethod
    def from_bytes(cls, data):
        n = int.from_bytes(data[:4], "big")
        perm = list(data[4:4 + n])
        rest = data[4 + n:]
        tags = [(rest[i:i + 4], rest[i + 4:i + 8]) for i in range(0, len(rest), 8)]
        if tags and len(tags) != n:
            raise ValueError("decode map tag count mismatch")
        return cls(perm, tags)


def garble(circuit: Circuit, rng=None, t=80):
    """Garble ``circuit``. Returns ``(GarbledCircuit, InputEncoding, DecodeMap)``."""
    _check_t(t)
    rng = as_prng(rng)
    delta = rng.getrandbits(t) | 1
    zero = {}
    for w in circuit.inputs_a + circuit.inputs_b:
        zero[w] = rng.getrandbits(t)
    consts = {}
    for w, v in circuit.constants.items():
        zero[w] = rng.getrandbits(t)
        consts[w] = (zero[w], v)
    rows = []
    for gid, g in enumerate(circuit.gates):
        if g.kind == XOR:
            zero[g.out] = zero[g.ins[0]] ^ zero[g.ins[1]]
        elif g.kind == NOT:
            zero[g.out] = zero[g.ins[0]] ^ delta
        else:
            a0, b0 = zero[g.ins[0]], zero[g.ins[1]]
            pa, pb = a0 & 1, b0 & 1
            hashes = {}
            for i in (0, 1):
                for j in (0, 1):
                    va, vb = i ^ pa, j ^ pb
                    hashes[i, j] = (_h(t, gid, a0 ^ (delta if va else 0), b0 ^ (delta if vb else 0)),
                                    (g.mask >> (2 * va + vb)) & 1)
            h00, v00 = hashes[0, 0]
            c0 = h00 ^ (delta if v00 else 0)
            zero[g.out] = c0
            rows.append(tuple(h ^ c0 ^ (delta if v else 0)
                              for (h, v) in (hashes[0, 1], hashes[1, 0], hashes[1, 1])))
    enc = InputEncoding(t, delta, [zero[w] for w in circuit.inputs_a],
                        [zero[w] for w in circuit.inputs_b], consts)
    outs = [zero[w] for w in circuit.outputs]
    dmap = DecodeMap([z & 1 for z in outs],
                     [(_tag(i, z), _tag(i, z ^ delta)) for i, z in enumerate(outs)])
    return GarbledCircuit(circuit, t, rows), enc, dmap


def evaluate(garbled: GarbledCircuit, labels_a: Sequence[int], labels_b: Sequence[int],
             const_labels: Dict[int, int], decode_map: DecodeMap = None) -> List[int]:
    """Active output labels. One hash per TABLE2 gate.

    With ``decode_map`` the output labels are checked against its tags and
    :class:`RowAuthFailure` is raised on a mismatch.
    """
    c, t = garbled.circuit, garbled.t
    if len(labels_a) != len(c.inputs_a) or len(labels_b) != len(c.inputs_b):
        raise ValueError("wrong number of input labels")
    if set(const_labels) != set(c.constants):
        raise ValueError("constant wire labels missing")
    val = dict(zip(c.inputs_a, labels_a))
    val.update(zip(c.inputs_b, labels_b))
    val.update(const_labels)
    k = 0
    for gid, g in enumerate(c.gates):
        if g.kind == XOR:
            val[g.out] = val[g.ins[0]] ^ val[g.ins[1]]
        elif g.kind == NOT:
            val[g.out] = val[g.ins[0]]
        else:
            a, b = val[g.ins[0]], val[g.ins[1]]
            h = _h(t, gid, a, b)
            idx = 2 * (a & 1) + (b & 1)
            val[g.out] = h if idx == 0 else h ^ garbled.rows[k][idx - 1]
            k += 1
    out = [val[w] for w in c.outputs]
    if decode_map is not None:
        decode(out, decode_map)
    return out


def decode(labels: Sequence[int], decode_map: DecodeMap) -> List[int]:
    bits = [(lab & 1) ^ p for lab, p in zip(labels, decode_map.permute)]
    for i, (lab, b) in enumerate(zip(labels, bits)):
        if decode_map.tags and _tag(i, lab) != decode_map.tags[i][b]:
            raise RowAuthFailure(f"output {i}: label matches neither wire value")
    return bits


# oblivious transfer (Bellare-Micali over a MODP group)

# 2048-bit MODP group, RFC 3526 group 14, generator 2
MODP_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF", 16)
MODP_G = 2
EXP_BITS = 256
GROUP_BYTES = 256


def _kdf(t, point, idx, which):
    d = hashlib.sha256(b"ot" + idx.to_bytes(4, "big") + bytes([which])
                       + int(point).to_bytes(GROUP_BYTES, "big")).digest()
    return int.from_bytes(d[:t // 8], "big")


def _pack(values):
    return b"".join(int(v).to_bytes(GROUP_BYTES, "big") for v in values)


def _unpack(data, width=GROUP_BYTES):
    if len(data) % width:
        raise ValueError("truncated OT message")
    return [int.from_bytes(data[i:i + width], "big") for i in range(0, len(data), width)]


def _element(v):
    if not 1 < v < MODP_P - 1:
        raise ValueError("OT group element out of range")
    return gmpy2.mpz(v)


class OtSender:
    """Sender side. ``setup()`` once, then ``respond()`` to every request batch."""

    def __init__(self, rng=None, t=80):
        _check_t(t)
        self.t = t
        self.rng = as_prng(rng)
        self.c = None

    def setup(self) -> bytes:
        self.c = gmpy2.powmod(MODP_G, self.rng.getrandbits(EXP_BITS) | 1, MODP_P)
        return _pack([self.c])

    def respond(self, request: bytes, pairs: Sequence[Tuple[int, int]]) -> bytes:
        pk0s = _unpack(request)
        if len(pk0s) != len(pairs):
            raise ValueError(f"OT request for {len(pk0s)} transfers, have {len(pairs)} pairs")
        nb = self.t // 8
        out = bytearray()
        for idx, (pk0, (m0, m1)) in enumerate(zip(pk0s, pairs)):
            pk0 = _element(pk0)
            pk1 = self.c * gmpy2.invert(pk0, MODP_P) % MODP_P
            r = self.rng.getrandbits(EXP_BITS)
            gr = gmpy2.powmod(MODP_G, r, MODP_P)
            e0 = _kdf(self.t, gmpy2.powmod(pk0, r, MODP_P), idx, 0) ^ m0
            e1 = _kdf(self.t, gmpy2.powmod(pk1, r, MODP_P), idx, 1) ^ m1
            out += int(gr).to_bytes(GROUP_BYTES, "big") + e0.to_bytes(nb, "big") + e1.to_bytes(nb, "big")
        return bytes(out)


class OtChooser:
    def __init__(self, rng=None, t=80):
        _check_t(t)
        self.t = t
        self.rng = as_prng(rng)
        self._keys = None
        self._choices = None

    def request(self, setup: bytes, choices: Sequence[int]) -> bytes:
        (c,) = _unpack(setup)
        c = _element(c)
        pk0s, self._keys = [], []
        for b in choices:
            k = self.rng.getrandbits(EXP_BITS)
            pkb = gmpy2.powmod(MODP_G, k, MODP_P)
            pk0s.append(pkb if b == 0 else c * gmpy2.invert(pkb, MODP_P) % MODP_P)
            self._keys.append(k)
        self._choices = [int(b) & 1 for b in choices]
        return _pack(pk0s)

    def receive(self, response: bytes) -> List[int]:
        nb = self.t // 8
        step = GROUP_BYTES + 2 * nb
        if len(response) != step * len(self._keys):
            raise ValueError("OT response has the wrong length")
        out = []
        for idx, (k, b) in enumerate(zip(self._keys, self._choices)):
            blk = response[idx * step:(idx + 1) * step]
            gr = _element(int.from_bytes(blk[:GROUP_BYTES], "big"))
            e = (blk[GROUP_BYTES:GROUP_BYTES + nb], blk[GROUP_BYTES + nb:])[b]
            out.append(int.from_bytes(e, "big") ^ _kdf(self.t, gmpy2.powmod(gr, k, MODP_P), idx, b))
        return out


def ot_transfer(pairs, choices, rng=None, t=80):
    """Run both OT roles in-process; returns the chooser's messages."""
    rng = as_prng(rng)
    s, c = OtSender(rng.fork("sender"), t), OtChooser(rng.fork("chooser"), t)
    return c.receive(s.respond(c.request(s.setup(), choices), pairs))
