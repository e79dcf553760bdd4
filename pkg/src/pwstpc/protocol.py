"""Two-party protocols: the pure garbled-circuit one and the GC + Paillier hybrid.

Bob owns the approximation coefficients and garbles; Alice owns ``x`` and,
in the hybrid protocol, the Paillier private key. The function and hence
the plan are public, so both parties build the same circuit locally and
only the garbled material travels.

Every message is a frame ``tag (1 byte) | length (4 bytes, big endian) |
payload``. Rounds are counted as changes of direction between frames,
ignoring OT, key setup and test-only frames.
"""

import hashlib
import queue
import socket
import threading
from dataclasses import dataclass, field
from math import comb
from typing import Dict, List, Optional, Tuple

from . import paillier
from ._rng import Prng, as_prng
from .circuit import build_full_gc, build_hybrid_gc, from_bits, hybrid_layout, to_bits
from .garble import DIGEST_BYTES, DecodeMap, GarbledCircuit, OtChooser, OtSender, decode, evaluate, garble

TAG_CIRCUIT = 0x01
TAG_MATERIAL = 0x02
TAG_LABELS = 0x03
TAG_OT = 0x04
TAG_PUBKEY = 0x05
TAG_R1, TAG_R2, TAG_R3, TAG_R4 = 0x10, 0x11, 0x12, 0x13
TAG_TEST = 0x7F

TAG_NAMES = {TAG_CIRCUIT: "circuit", TAG_MATERIAL: "material", TAG_LABELS: "labels", TAG_OT: "ot",
             TAG_PUBKEY: "pubkey", TAG_R1: "R1", TAG_R2: "R2", TAG_R3: "R3", TAG_R4: "R4",
             TAG_TEST: "test"}
UNCOUNTED_TAGS = frozenset({TAG_OT, TAG_PUBKEY, TAG_TEST})
HEADER = 5
MAX_FRAME = 1 << 30


class TransportError(IOError):
    pass


class ProtocolError(ValueError):
    """Unexpected message, malformed payload or mismatched circuit."""


class CapacityExceeded(ValueError):
    """The Paillier modulus is too small for the blinded intermediates."""


# transports

class Transport:
    """Framed, ordered, reliable channel with a per-endpoint message log."""

    def __init__(self):
        self.log: List[Tuple[str, int, int]] = []  # (direction, tag, frame bytes)
        self._digest = hashlib.sha256()

    def _send_frame(self, frame):
        raise NotImplementedError

    def _recv_frame(self):
        raise NotImplementedError

    def close(self):
        pass

    def send(self, tag, payload=b""):
        if len(payload) > MAX_FRAME:
            raise TransportError("frame too large")
        frame = bytes([tag]) + len(payload).to_bytes(4, "big") + bytes(payload)
        self._send_frame(frame)
        self.log.append(("out", tag, len(frame)))
        self._digest.update(b">" + frame)

    def recv(self, expect=None):
        frame = self._recv_frame()
        tag, n = frame[0], int.from_bytes(frame[1:5], "big")
        if len(frame) != HEADER + n:
            raise TransportError("frame length does not match its header")
        self.log.append(("in", tag, len(frame)))
        self._digest.update(b"<" + frame)
        if expect is not None and tag != expect:
            raise ProtocolError(f"expected {TAG_NAMES.get(expect, expect)} frame, got "
                                f"{TAG_NAMES.get(tag, hex(tag))}")
        return tag, frame[HEADER:]

    def digest(self):
        return self._digest.hexdigest()

    def bytes_by_direction(self):
        out = {"out": 0, "in": 0}
        for d, _, n in self.log:
            out[d] += n
        return out

    def bytes_by_tag(self):
        out: Dict[str, int] = {}
        for _, tag, n in self.log:
            name = TAG_NAMES.get(tag, hex(tag))
            out[name] = out.get(name, 0) + n
        return out

    def rounds(self):
        return count_rounds(self.log)


def count_rounds(log):
    dirs = [d for d, tag, _ in log if tag not in UNCOUNTED_TAGS]
    return sum(1 for i, d in enumerate(dirs) if i == 0 or d != dirs[i - 1])


class QueueTransport(Transport):
    def __init__(self, inbox, outbox, timeout=60.0):
        super().__init__()
        self.inbox, self.outbox, self.timeout = inbox, outbox, timeout

    @classmethod
    def pair(cls, timeout=60.0):
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b, timeout), cls(b, a, timeout)

    def _send_frame(self, frame):
        self.outbox.put(frame)

    def _recv_frame(self):
        try:
            frame = self.inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for a frame") from None
        if frame is None:
            raise TransportError("peer closed the channel")
        return frame

    def close(self):
        self.outbox.put(None)


class TcpTransport(Transport):
    def __init__(self, sock):
        super().__init__()
        self.sock = sock

    @classmethod
    def connect(cls, host, port, timeout=60.0):
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            raise TransportError(f"cannot connect to {host}:{port}: {e}") from e
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return cls(sock)

    @classmethod
    def listen(cls, host="127.0.0.1", port=0, timeout=60.0):
        """Bound listening socket; call :func:`accept` on it for the transport."""
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            srv.bind((host, port))
        except OSError as e:
            srv.close()
            raise TransportError(f"cannot listen on {host}:{port}: {e}") from e
        srv.listen(1)
        srv.settimeout(timeout)
        return srv

    @classmethod
    def accept(cls, srv, timeout=60.0):
        try:
            sock, _ = srv.accept()
        except OSError as e:
            raise TransportError(f"no peer connected: {e}") from e
        finally:
            srv.close()
        sock.settimeout(timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return cls(sock)

    def _send_frame(self, frame):
        try:
            self.sock.sendall(frame)
        except OSError as e:
            raise TransportError(f"send failed: {e}") from e

    def _read(self, n):
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(min(n - len(buf), 1 << 20))
            except OSError as e:
                raise TransportError(f"receive failed: {e}") from e
            if not chunk:
                raise TransportError("peer closed the connection")
            buf += chunk
        return bytes(buf)

    def _recv_frame(self):
        head = self._read(HEADER)
        n = int.from_bytes(head[1:], "big")
        if n > MAX_FRAME:
            raise TransportError("frame too large")
        return head + self._read(n)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


# helpers

def _pack_labels(labels, t):
    return b"".join(v.to_bytes(t // 8, "big") for v in labels)


def _unpack_labels(data, count, t):
    nb = t // 8
    if len(data) != count * nb:
        raise ProtocolError(f"expected {count} labels, got {len(data)} bytes")
    return [int.from_bytes(data[i:i + nb], "big") for i in range(0, len(data), nb)]


def send_input_secrets(pairs, transport, rng, t=80):
    """Sender half of :func:`provide_input_secrets`: one OT per label pair."""
    s = OtSender(rng, t)
    transport.send(TAG_OT, s.setup())
    _, req = transport.recv(TAG_OT)
    transport.send(TAG_OT, s.respond(req, pairs))


def provide_input_secrets(x, nbits, transport, rng, t=80):
    """Evaluator side: obtain the labels of the bits of ``x`` by oblivious transfer."""
    c = OtChooser(rng, t)
    _, setup = transport.recv(TAG_OT)
    transport.send(TAG_OT, c.request(setup, to_bits(x, nbits)))
    _, resp = transport.recv(TAG_OT)
    return c.receive(resp)


def _send_garbled(transport, garbled, enc, bits_b, t):
    transport.send(TAG_MATERIAL, garbled.to_bytes())
    consts = [enc.constant_labels()[w] for w in sorted(garbled.circuit.constants)]
    transport.send(TAG_LABELS, _pack_labels(enc.encode_b(bits_b) + consts, t))


def _recv_garbled(transport, circuit, t):
    _, mat = transport.recv(TAG_MATERIAL)
    try:
        garbled = GarbledCircuit.from_bytes(mat, circuit, t)
    except ValueError as e:
        raise ProtocolError(str(e)) from e
    _, lab = transport.recv(TAG_LABELS)
    wires = sorted(circuit.constants)
    labels = _unpack_labels(lab, len(circuit.inputs_b) + len(wires), t)
    nb = len(circuit.inputs_b)
    return garbled, labels[:nb], dict(zip(wires, labels[nb:]))


@dataclass
class PartyResult:
    role: str
    output_labels: Optional[List[int]] = None
    decoded: Optional[int] = None
    ciphertext: Optional[int] = None
    scaled: Optional[int] = None
    value: Optional[int] = None
    exponentiations: int = 0
    obfuscated: Dict[str, object] = field(default_factory=dict)


@dataclass
class SessionResult:
    """Outcome of one protocol run, seen from both ends.

    ``value`` is the decoded output (full GC) or ``floor(kP / k)`` (hybrid),
    available in test mode; ``scaled`` is the hybrid's ``k * P(delta)``.
    """

    protocol: str
    x: int
    value: Optional[int]
    scaled: Optional[int]
    garbler: PartyResult
    evaluator: PartyResult
    bytes_garbler_to_evaluator: int
    bytes_evaluator_to_garbler: int
    bytes_by_tag: Dict[str, int]
    material_bytes: int
    rounds: int
    digest: str
    log: List[Tuple[str, int, int]]

    @property
    def exponentiations(self):
        return self.garbler.exponentiations + self.evaluator.exponentiations


# full garbled-circuit protocol

def full_gc_garbler(plan, transport, rng=None, t=80, test_decode=True, circuit=None):
    rng = as_prng(rng)
    circuit = build_full_gc(plan) if circuit is None else circuit
    garbled, enc, dmap = garble(circuit, rng.fork("garble"), t)
    send_input_secrets(enc.pairs_a(), transport, rng.fork("ot"), t)
    _send_garbled(transport, garbled, enc, [], t)
    if test_decode:
        transport.send(TAG_TEST, dmap.to_bytes())
    return PartyResult("garbler")


def full_gc_evaluator(plan, x, transport, rng=None, t=80, test_decode=True, circuit=None):
    rng = as_prng(rng)
    circuit = build_full_gc(plan) if circuit is None else circuit
    labels_a = provide_input_secrets(x, plan.lx, transport, rng.fork("ot"), t)
    garbled, labels_b, consts = _recv_garbled(transport, circuit, t)
    out = evaluate(garbled, labels_a, labels_b, consts)
    res = PartyResult("evaluator", output_labels=out)
    if test_decode:
        _, dm = transport.recv(TAG_TEST)
        res.decoded = from_bits(decode(out, DecodeMap.from_bytes(dm)))
        res.value = res.decoded
    return res


# hybrid protocol

class HeOps:
    """Paillier operations with an exponentiation counter.

    Encryption, decryption and ciphertext-by-scalar powers count one each;
    trivial encryptions ``1 + mN`` of values known to both sides are free.
    """

    def __init__(self, pk, sk=None, rng=None):
        self.pk, self.sk, self.rng = pk, sk, as_prng(rng)
        self.count = 0

    def enc(self, v):
        self.count += 1
        return paillier.encrypt(self.pk, paillier.encode_signed(self.pk, v), self.rng)

    def enc_known(self, v):
        return paillier.encrypt_trivial(self.pk, v % self.pk.n)

    def dec(self, c):
        self.count += 1
        return paillier.decode_signed(self.pk, paillier.decrypt(self.sk, c))

    def pow(self, c, s):
        self.count += 1
        return paillier.scalar_mul(self.pk, c, s)

    def mul(self, *cs):
        out = 1
        for c in cs:
            out = paillier.add(self.pk, out, c)
        return out


@dataclass(frozen=True)
class HybridRandomness:
    """Bob's blinding values: ``r`` for delta, ``ra[i]`` per coefficient, ``rd[i]`` per power."""

    r: int
    ra: Tuple[int, ...]
    rd: Tuple[int, ...]  # rd[0] = 0 and rd[1] = r by construction

    @classmethod
    def sample(cls, plan, rng, tau=80):
        lay = hybrid_layout(plan, tau)
        r = rng.getrandbits(lay.r_bits)
        ra = tuple(rng.getrandbits(n) for n in lay.ra_bits)
        rd = (0, r) + tuple(rng.getrandbits(i * lay.lv + tau) for i in range(2, plan.degree + 1))
        return cls(r, ra, rd[:plan.degree + 1])


def hybrid_capacity_bits(plan, tau=80):
    """Bit length bound of the largest signed plaintext the hybrid protocol handles."""
    lay = hybrid_layout(plan, tau)
    d = plan.degree
    w = plan.widths
    pw = [0, lay.delta_out_bits] + [i * lay.lv + tau + 1 for i in range(2, d + 1)]
    terms = [w.scale_shift(i) + lay.coeff_out_bits[i] - 1 + pw[i] for i in range(d + 1)]
    y_ob = max(terms) + (d + 1).bit_length()
    powers = d * lay.delta_out_bits
    return max(y_ob, powers) + 1


def check_capacity(plan, pk, tau=80):
    need = hybrid_capacity_bits(plan, tau)
    if need >= pk.n.bit_length() - 1:
        raise CapacityExceeded(f"blinded values need {need} bits, modulus N/2 offers "
                               f"{pk.n.bit_length() - 2}")


def hybrid_garbler(plan, transport, rng=None, t=80, tau=80, test_decode=True, circuit=None,
                   rerandomize=False):
    """Bob. ``rerandomize`` blinds the returned powers with fresh encryptions
    (one extra exponentiation per power) instead of trivial ones."""
    rng = as_prng(rng)
    d = plan.degree
    w = plan.widths
    lay = hybrid_layout(plan, tau)
    circuit = build_hybrid_gc(plan, tau) if circuit is None else circuit
    _, pkb = transport.recv(TAG_PUBKEY)
    pk = paillier.PublicKey.from_bytes(pkb)
    check_capacity(plan, pk, tau)
    he = HeOps(pk, rng=rng.fork("paillier"))
    rnd = HybridRandomness.sample(plan, rng.fork("blind"), tau)
    garbled, enc, dmap = garble(circuit, rng.fork("garble"), t)
    send_input_secrets(enc.pairs_a(), transport, rng.fork("ot"), t)
    bits_b = to_bits(rnd.r, lay.r_bits)
    for v, n in zip(rnd.ra, lay.ra_bits):
        bits_b += to_bits(v, n)
    _send_garbled(transport, garbled, enc, bits_b, t)
    transport.send(TAG_R1, dmap.to_bytes())

    r = rnd.r
    if d >= 2:
        _, r2 = transport.recv(TAG_R2)
        cu = _unpack(pk, r2, d)
        # (delta + r)^i = sum_j C(i, j) r^(i-j) delta^j
        powers = [None, he.mul(cu[0], he.enc_known(-r))]
        for i in range(2, d + 1):
            parts = [cu[i - 1], he.enc_known(-r**i)]
            parts += [he.pow(powers[j], -comb(i, j) * r**(i - j)) for j in range(1, i)]
            powers.append(he.mul(*parts))
        blinded = [he.mul(powers[i], he.enc(rnd.rd[i]) if rerandomize else he.enc_known(rnd.rd[i]))
                   for i in range(2, d + 1)]
        transport.send(TAG_R3, paillier.pack_ciphertexts(pk, blinded))
        _, r4 = transport.recv(TAG_R4)
        cts = _unpack(pk, r4, d + 1)
    else:
        _, r4 = transport.recv(TAG_R4)
        cts = _unpack(pk, r4, d + 2)
        powers = [None, he.mul(cts[-1], he.enc_known(-r))]
    y_ob, neg_c = cts[0], cts[1:d + 1]
    s = [2**w.scale_shift(i) for i in range(d + 1)]
    parts = [y_ob, he.enc_known(-s[0] * rnd.ra[0])]
    for i in range(1, d + 1):
        parts.append(he.pow(powers[i], -s[i] * rnd.ra[i]))
        parts.append(he.pow(neg_c[i - 1], rnd.rd[i]))
    result = he.mul(*parts)
    if test_decode:
        transport.send(TAG_TEST, paillier.ciphertext_to_bytes(pk, result))
    return PartyResult("garbler", ciphertext=result, exponentiations=he.count,
                       obfuscated={"randomness": rnd})


def _unpack(pk, data, count):
    try:
        cts = paillier.unpack_ciphertexts(pk, data)
    except paillier.CiphertextOutOfGroup as e:
        raise ProtocolError(str(e)) from e
    if len(cts) != count:
        raise ProtocolError(f"expected {count} ciphertexts, got {len(cts)}")
    return cts


def hybrid_evaluator(plan, x, transport, keypair, rng=None, t=80, tau=80, test_decode=True,
                     circuit=None):
    """Alice: evaluates the GC, works on blinded clear values, encrypts under her key."""
    rng = as_prng(rng)
    d = plan.degree
    w = plan.widths
    lay = hybrid_layout(plan, tau)
    circuit = build_hybrid_gc(plan, tau) if circuit is None else circuit
    pk = keypair.public
    he = HeOps(pk, keypair.private, rng.fork("paillier"))
    transport.send(TAG_PUBKEY, pk.to_bytes())
    labels_a = provide_input_secrets(x, plan.lx, transport, rng.fork("ot"), t)
    garbled, labels_b, consts = _recv_garbled(transport, circuit, t)
    _, dm = transport.recv(TAG_R1)
    bits = decode(evaluate(garbled, labels_a, labels_b, consts), DecodeMap.from_bytes(dm))
    u = from_bits(bits[:lay.delta_out_bits])
    pos = lay.delta_out_bits
    c = []
    for n in lay.coeff_out_bits:
        c.append(from_bits(bits[pos:pos + n], signed=True))
        pos += n

    wpow = [1, u]
    if d >= 2:
        transport.send(TAG_R2, paillier.pack_ciphertexts(pk, [he.enc(u**i) for i in range(1, d + 1)]))
        _, r3 = transport.recv(TAG_R3)
        wpow += [he.dec(ct) for ct in _unpack(pk, r3, d - 1)]
    s = [2**w.scale_shift(i) for i in range(d + 1)]
    y_ob = sum(s[i] * c[i] * wpow[i] for i in range(d + 1))
    out = [he.enc(y_ob)] + [he.enc(-s[i] * c[i]) for i in range(1, d + 1)]
    if d == 1:
        out.append(he.enc(u))
    transport.send(TAG_R4, paillier.pack_ciphertexts(pk, out))
    res = PartyResult("evaluator", exponentiations=he.count,
                      obfuscated={"delta_plus_r": u, "coeffs": tuple(c), "powers": tuple(wpow[2:])})
    if test_decode:
        _, ct = transport.recv(TAG_TEST)
        scaled = paillier.decode_signed(pk, paillier.decrypt(keypair.private, paillier.ciphertext_from_bytes(pk, ct)))
        res.scaled = scaled
        res.value = scaled >> w.lk
    return res


# session drivers

def make_transport_pair(kind="queue", timeout=60.0):
    """``(garbler end, evaluator end)`` over in-process queues or loopback TCP."""
    if kind == "queue":
        return QueueTransport.pair(timeout)
    if kind == "tcp":
        srv = TcpTransport.listen("127.0.0.1", 0, timeout)
        port = srv.getsockname()[1]
        box = {}

        def acc():
            try:
                box["t"] = TcpTransport.accept(srv, timeout)
            except TransportError as e:
                box["e"] = e

        th = threading.Thread(target=acc, daemon=True)
        th.start()
        ev = TcpTransport.connect("127.0.0.1", port, timeout)
        th.join()
        if "e" in box:
            raise box["e"]
        return box["t"], ev
    raise ValueError(f"unknown transport {kind!r}")


def _run_pair(garbler_fn, evaluator_fn, kind):
    tg, te = make_transport_pair(kind)
    box = {}

    def bob():
        try:
            box["g"] = garbler_fn(tg)
        except BaseException as e:  # re-raised in the caller's thread
            box["err"] = e
            tg.close()

    th = threading.Thread(target=bob, daemon=True)
    th.start()
    try:
        ev = evaluator_fn(te)
    except BaseException:
        te.close()
        th.join(5)
        if "err" in box:
            raise box["err"]
        raise
    th.join()
    tg.close()
    te.close()
    if "err" in box:
        raise box["err"]
    return box["g"], ev, tg


def _session(protocol, x, g, ev, tg):
    by_dir = tg.bytes_by_direction()
    by_tag = tg.bytes_by_tag()
    # gate rows only: frame header and the leading circuit digest are framing
    material = sum(n - HEADER - DIGEST_BYTES for _, tag, n in tg.log if tag == TAG_MATERIAL)
    return SessionResult(protocol, x, ev.value, ev.scaled, g, ev, by_dir["out"], by_dir["in"], by_tag,
                         material, tg.rounds(), tg.digest(), list(tg.log))


def session_rngs(seed):
    root = Prng(seed)
    return root.fork("garbler"), root.fork("evaluator")


def run_full_gc(plan, x, transport="queue", seed=None, t=80, test_decode=True, circuit=None):
    """Run both parties of the full-GC protocol; Bob in a worker thread."""
    if not 0 <= x < 2**plan.lx:
        raise ValueError(f"input {x} outside [0, 2**{plan.lx})")
    circuit = build_full_gc(plan) if circuit is None else circuit
    rg, re_ = session_rngs(seed)
    g, ev, tg = _run_pair(
        lambda tr: full_gc_garbler(plan, tr, rg, t, test_decode, circuit),
        lambda tr: full_gc_evaluator(plan, x, tr, re_, t, test_decode, circuit), transport)
    return _session("gc", x, g, ev, tg)


def run_hybrid(plan, x, keypair=None, transport="queue", seed=None, t=80, tau=80, key_bits=1024,
               test_decode=True, circuit=None, rerandomize=False):
    if not 0 <= x < 2**plan.lx:
        raise ValueError(f"input {x} outside [0, 2**{plan.lx})")
    rg, re_ = session_rngs(seed)
    if keypair is None:
        keypair = paillier.keygen(key_bits, re_.fork("keygen"), insecure_test_keys=key_bits < 256)
    check_capacity(plan, keypair.public, tau)
    circuit = build_hybrid_gc(plan, tau) if circuit is None else circuit
    g, ev, tg = _run_pair(
        lambda tr: hybrid_garbler(plan, tr, rg, t, tau, test_decode, circuit, rerandomize),
        lambda tr: hybrid_evaluator(plan, x, tr, keypair, re_, t, tau, test_decode, circuit), transport)
    return _session("hybrid", x, g, ev, tg)
