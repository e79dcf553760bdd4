"""Boolean circuit IR, builders for the evaluation pipeline, and a plaintext evaluator.

Wires are integers. Bit vectors are lists of wires, least significant bit
first. Gates are XOR, NOT (free under free-XOR garbling) and TABLE2, a
two-input gate given by its 4-bit truth table: bit ``2*a + b`` of ``mask``
is the output for inputs ``(a, b)``.

The builder folds constants as it goes, so shifted-in zero bits and
sign-extension copies cost nothing.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

XOR, NOT, TABLE2 = "X", "N", "T"

MASK_AND = 0b1000
MASK_ANDN = 0b0100  # a AND NOT b
MASK_OR = 0b1110


@dataclass(frozen=True)
class Gate:
    kind: str
    ins: Tuple[int, ...]
    out: int
    mask: int = 0

    def __post_init__(self):
        if self.kind == TABLE2 and self.mask in (0b0110, 0b1001):
            raise ValueError("XOR-type truth tables must be emitted as XOR gates")


@dataclass(frozen=True)
class GateCount:
    xor_count: int
    non_xor_count: int
    not_count: int

    def __add__(self, other):
        return GateCount(self.xor_count + other.xor_count, self.non_xor_count + other.non_xor_count,
                         self.not_count + other.not_count)


@dataclass
class Circuit:
    wire_count: int
    inputs_a: List[int]
    inputs_b: List[int]
    outputs: List[int]
    gates: List[Gate]
    constants: Dict[int, int] = field(default_factory=dict)
    stages: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def validate(self):
        driven = set(self.inputs_a) | set(self.inputs_b) | set(self.constants)
        if len(driven) != len(self.inputs_a) + len(self.inputs_b) + len(self.constants):
            raise ValueError("a wire is declared twice as input or constant")
        for g in self.gates:
            for w in g.ins:
                if w not in driven:
                    raise ValueError(f"gate {g} reads wire {w} before it is driven")
            if g.out in driven:
                raise ValueError(f"wire {g.out} driven twice")
            driven.add(g.out)
        for w in self.outputs:
            if w not in driven:
                raise ValueError(f"output wire {w} is never driven")
        return self

    def to_text(self):
        lines = [f"wires {self.wire_count}",
                 " ".join(["inputsA", str(len(self.inputs_a)), *map(str, self.inputs_a),
                           "inputsB", str(len(self.inputs_b)), *map(str, self.inputs_b)]),
                 " ".join(["outputs", str(len(self.outputs)), *map(str, self.outputs)])]
        for w in sorted(self.constants):
            lines.append(f"C {self.constants[w]} {w}")
        for g in self.gates:
            if g.kind == XOR:
                lines.append(f"X {g.ins[0]} {g.ins[1]} {g.out}")
            elif g.kind == NOT:
                lines.append(f"N {g.ins[0]} {g.out}")
            else:
                lines.append(f"T {g.mask:x} {g.ins[0]} {g.ins[1]} {g.out}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if len(rows) < 3 or rows[0][0] != "wires" or rows[1][0] != "inputsA" or rows[2][0] != "outputs":
            raise ValueError("bad circuit header")
        n = int(rows[0][1])
        head = rows[1]
        ka = int(head[1])
        ins_a = [int(v) for v in head[2:2 + ka]]
        if head[2 + ka] != "inputsB":
            raise ValueError("bad inputs line")
        kb = int(head[3 + ka])
        ins_b = [int(v) for v in head[4 + ka:4 + ka + kb]]
        ko = int(rows[2][1])
        outs = [int(v) for v in rows[2][2:2 + ko]]
        consts, gates = {}, []
        for r in rows[3:]:
            if r[0] == "C":
                consts[int(r[2])] = int(r[1])
            elif r[0] == "X":
                gates.append(Gate(XOR, (int(r[1]), int(r[2])), int(r[3])))
            elif r[0] == "N":
                gates.append(Gate(NOT, (int(r[1]),), int(r[2])))
            elif r[0] == "T":
                gates.append(Gate(TABLE2, (int(r[2]), int(r[3])), int(r[4]), int(r[1], 16)))
            else:
                raise ValueError(f"unknown gate line {' '.join(r)!r}")
        return cls(n, ins_a, ins_b, outs, gates, consts).validate()

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).digest()


def count_gates(circuit: Circuit, stage: Optional[str] = None) -> GateCount:
    gates = circuit.gates
    if stage is not None:
        lo, hi = circuit.stages[stage]
        gates = gates[lo:hi]
    x = sum(1 for g in gates if g.kind == XOR)
    n = sum(1 for g in gates if g.kind == NOT)
    return GateCount(x, len(gates) - x - n, n)


class CircuitBuilder:
    """Incremental circuit construction with constant folding."""

    def __init__(self):
        self.n = 0
        self.gates: List[Gate] = []
        self.inputs_a: List[int] = []
        self.inputs_b: List[int] = []
        self.constants: Dict[int, int] = {}
        self._const_wire: Dict[int, int] = {}
        self._neg: Dict[int, int] = {}
        self.stages: Dict[str, Tuple[int, int]] = {}
        self._stage: Optional[Tuple[str, int]] = None

    def _new(self):
        self.n += 1
        return self.n - 1

    def input_a(self, count):
        ws = [self._new() for _ in range(count)]
        self.inputs_a.extend(ws)
        return ws

    def input_b(self, count):
        ws = [self._new() for _ in range(count)]
        self.inputs_b.extend(ws)
        return ws

    def const(self, bit):
        bit = int(bit) & 1
        if bit not in self._const_wire:
            w = self._new()
            self._const_wire[bit] = w
            self.constants[w] = bit
        return self._const_wire[bit]

    def const_value(self, w):
        return self.constants.get(w)

    def begin(self, name):
        self._stage = (name, len(self.gates))

    def end(self):
        name, lo = self._stage
        self.stages[name] = (lo, len(self.gates))
        self._stage = None

    def not_(self, a):
        c = self.const_value(a)
        if c is not None:
            return self.const(1 - c)
        if a not in self._neg:
            out = self._new()
            self.gates.append(Gate(NOT, (a,), out))
            self._neg[a] = out
            self._neg[out] = a
        return self._neg[a]

    def xor(self, a, b):
        ca, cb = self.const_value(a), self.const_value(b)
        if ca is not None and cb is not None:
            return self.const(ca ^ cb)
        if ca is not None:
            return b if ca == 0 else self.not_(b)
        if cb is not None:
            return a if cb == 0 else self.not_(a)
        if a == b:
            return self.const(0)
        if self._neg.get(a) == b:
            return self.const(1)
        out = self._new()
        self.gates.append(Gate(XOR, (a, b), out))
        return out

    def table(self, mask, a, b):
        bit = lambda va, vb: (mask >> (2 * va + vb)) & 1
        ca, cb = self.const_value(a), self.const_value(b)
        if ca is not None:
            return self._unary(bit(ca, 0), bit(ca, 1), b)
        if cb is not None:
            return self._unary(bit(0, cb), bit(1, cb), a)
        if a == b:
            return self._unary(bit(0, 0), bit(1, 1), a)
        if mask in (0, 15):
            return self.const(mask & 1)
        if bit(0, 0) == bit(0, 1) and bit(1, 0) == bit(1, 1):
            return self._unary(bit(0, 0), bit(1, 0), a)
        if bit(0, 0) == bit(1, 0) and bit(0, 1) == bit(1, 1):
            return self._unary(bit(0, 0), bit(0, 1), b)
        if mask == 0b0110:
            return self.xor(a, b)
        if mask == 0b1001:
            return self.not_(self.xor(a, b))
        out = self._new()
        self.gates.append(Gate(TABLE2, (a, b), out, mask))
        return out

    def _unary(self, f0, f1, w):
        if f0 == f1:
            return self.const(f0)
        return w if f1 else self.not_(w)

    def and_(self, a, b):
        return self.table(MASK_AND, a, b)

    def andn(self, a, b):
        return self.table(MASK_ANDN, a, b)

    def or_(self, a, b):
        return self.table(MASK_OR, a, b)

    def build(self, outputs) -> Circuit:
        return Circuit(self.n, list(self.inputs_a), list(self.inputs_b), list(outputs),
                       list(self.gates), dict(self.constants), dict(self.stages)).validate()


# bit-vector helpers

def zero_extend(cb, bits, width):
    return list(bits[:width]) + [cb.const(0)] * (width - len(bits))


def sign_extend(cb, bits, width):
    if not bits:
        return [cb.const(0)] * width
    return list(bits[:width]) + [bits[-1]] * (width - len(bits))


def add(cb, a, b, width=None):
    """``a + b mod 2**width`` (operands zero-extended); one AND per carry."""
    width = max(len(a), len(b)) + 1 if width is None else width
    a, b = zero_extend(cb, a, width), zero_extend(cb, b, width)
    carry = cb.const(0)
    out = []
    for i in range(width):
        t = cb.xor(a[i], carry)
        out.append(cb.xor(t, b[i]))
        if i < width - 1:
            carry = cb.xor(carry, cb.and_(t, cb.xor(b[i], carry)))
    return out


def subtract(cb, x, s, keep):
    """Low ``keep`` bits of ``x - s``; one AND per borrow."""
    x, s = zero_extend(cb, x, keep), zero_extend(cb, s, keep)
    borrow = cb.const(0)
    out = []
    for i in range(keep):
        out.append(cb.xor(cb.xor(x[i], s[i]), borrow))
        if i < keep - 1:
            # borrow' = majority(not x, s, borrow)
            nx = cb.not_(cb.xor(x[i], borrow))
            borrow = cb.xor(borrow, cb.and_(nx, cb.xor(s[i], borrow)))
    return out


def multiply(cb, a, b, width=None):
    """Low ``width`` bits of ``a * b``, school-book rows over the bits of ``b``.

    Operands are read as unsigned; sign-extend them to ``width`` first for
    two's-complement products.
    """
    width = len(a) + len(b) if width is None else width
    if not a or not b or width == 0:
        return [cb.const(0)] * width
    acc = None
    for j, bj in enumerate(b[:width]):
        memo = {}
        row = []
        for ai in a[:width - j]:
            if ai not in memo:
                memo[ai] = cb.and_(ai, bj)
            row.append(memo[ai])
        if acc is None:
            acc = [cb.const(0)] * j + row
            acc = zero_extend(cb, acc, min(width, len(acc) + 1))
            continue
        span = min(width - j, max(len(acc) - j, len(row)) + 1)
        acc = zero_extend(cb, acc, j + span)
        acc = acc[:j] + add(cb, acc[j:], row, span)
    return zero_extend(cb, acc[:width], width)


# pipeline stages

def interval_tree(cb, tree, x):
    """One-hot leaf indicators of the bisection tree. ``x`` has ``lx`` wires."""
    lx = tree.lx
    out = [None] * len(tree.leaves)

    def visit(node, path):
        if node.is_leaf:
            out[node.leaf] = cb.const(1) if path is None else path
            return
        bit = x[lx - 1 - node.depth]
        if path is None:
            left, right = cb.not_(bit), bit
        else:
            left, right = cb.andn(path, bit), cb.and_(path, bit)
        visit(node.left, left)
        visit(node.right, right)

    visit(tree.root, None)
    return out


def param_select(cb, payloads, width, leaf_wires, columns=None):
    """XOR-select the payload of the active leaf; the payloads are public constants.

    Column ``b`` is the XOR of the leaves whose payload bit ``b`` is set. Since
    exactly one leaf is active, the XOR over the complementary set is the
    negated result, so the shorter of the two chains is used.
    """
    n = len(leaf_wires)
    columns = range(width) if columns is None else columns
    out = {}
    for b in columns:
        ones = [w for p, w in zip(payloads, leaf_wires) if (p >> b) & 1]
        invert = len(ones) > n - len(ones)
        if invert:
            ones = [w for p, w in zip(payloads, leaf_wires) if not (p >> b) & 1]
        acc = cb.const(0)
        for w in ones:
            acc = cb.xor(acc, w)
        out[b] = cb.not_(acc) if invert else acc
    return [out[b] for b in columns]


def multiply_signed(cb, a, b):
    """Exact product of signed ``a`` and unsigned ``b``, ``len(a) + len(b)`` bits.

    School-book rows of ``len(a)`` gates each. The sign bit of every row is
    complemented (a NAND) and the resulting constant offset is folded in, so
    no row needs sign extension (Baugh-Wooley).
    """
    w, n = len(a), len(b)
    width = w + n
    if not a or not b:
        return [cb.const(0)] * width
    # sum_j 2^j * row_j  - sum_j 2^(w-1+j)  ==  sum_j 2^j * row_j + 2^(w-1) + 2^(w+n-1)  (mod 2^width)
    acc = None
    for j, bj in enumerate(b):
        row = [cb.and_(ai, bj) for ai in a[:-1]] + [cb.table(0b0111, a[-1], bj)]
        if acc is None:
            # fold + 2^(w-1): the top row bit flips and carries one bit up
            acc = row[:-1] + [cb.not_(row[-1]), row[-1]]
            continue
        span = min(width - j, w + 1)
        acc = zero_extend(cb, acc, j + span)
        acc = acc[:j] + add(cb, acc[j:j + span], row, span) + acc[j + span:]
    acc = zero_extend(cb, acc, width)
    acc[-1] = cb.not_(acc[-1])  # + 2^(width-1)
    return acc


def multiply_signed_signed(cb, a, b):
    """Exact product of two's-complement ``a`` and ``b``, ``len(a) + len(b)`` bits.

    ``a * b = a * low(b) - (a * b_top) << (n - 1)``: a signed-by-unsigned
    array on the low bits of ``b``, then one conditional row subtracted.
    """
    w, n = len(a), len(b)
    if not a or not b:
        return [cb.const(0)] * (w + n)
    top = [cb.and_(ai, b[-1]) for ai in a]
    if n == 1:
        low = [cb.const(0)] * w
    else:
        low = multiply_signed(cb, a, b[:-1])
    hi = subtract(cb, sign_extend(cb, low[n - 1:], w + 1), sign_extend(cb, top, w + 1), w + 1)
    return low[:n - 1] + hi


def horner(cb, widths, fields, delta, out_bits, compact=False):
    """Bits ``[lk, lk + out_bits)`` of ``sum_i (A'_i << (lk - lk_i)) * delta**i``.

    ``fields[i]`` holds the two's-complement coefficient ``A'_i``. By default
    every step keeps its full signed width, ``v_i`` growing by ``lv + 1`` bits
    per block. ``compact=True`` works modulo ``2**(lk + out_bits)`` instead,
    which is exact for the kept bits and needs fewer gates.
    """
    m = widths.lk + out_bits
    big = []
    for i, f in enumerate(fields):
        sh = widths.scale_shift(i)
        big.append([cb.const(0)] * sh + list(f))
    if compact:
        big = [sign_extend(cb, a, m) for a in big]
        v = big[-1]
        for a in reversed(big[:-1]):
            v = add(cb, a, multiply(cb, v, delta, m), m)
        return v[widths.lk:m]
    d = len(fields) - 1
    v = sign_extend(cb, big[-1], max(len(big[-1]), d * widths.lv + widths.ly))
    for a in reversed(big[:-1]):
        prod = multiply_signed(cb, v, delta)
        n = max(len(a), len(prod)) + 1
        v = add(cb, sign_extend(cb, a, n), sign_extend(cb, prod, n), n)
    return sign_extend(cb, v, m)[widths.lk:m]


def clamp(cb, r, ly):
    """Saturate the signed value ``r`` (``ly + g`` bits, ``g >= 1``) into ``[0, 2**ly)``."""
    neg = r[-1]
    over = cb.const(0)
    for w in r[ly:-1]:
        over = cb.or_(over, w)
    return [cb.andn(cb.or_(w, over), neg) for w in r[:ly]]


def guard_bits(plan):
    """Extra signed headroom above ``ly`` needed by the pre-clamp value; 0 if none.

    Exhaustive over the inputs for ``lx <= 16``, otherwise from the error budget
    of the accepted leaves.
    """
    ly = plan.ly
    if plan.degree == 0:
        return 0
    if plan.lx <= 16:
        from .encode import reference_eval_raw
        raw = [reference_eval_raw(plan, x) for x in range(2**plan.lx)]
        lo, hi = min(raw), max(raw)
    else:
        slack = int(max(s.max_err for s in plan.tree.leaves)) + 3
        lo, hi = -slack, 2**ly - 1 + slack
    if lo >= 0 and hi < 2**ly:
        return 0
    g = 1
    while not (-(2**(ly + g - 1)) <= lo and hi < 2**(ly + g - 1)):
        g += 1
    return g


# top-level circuits

def build_interval_tree(tree) -> Circuit:
    cb = CircuitBuilder()
    x = cb.input_a(tree.lx)
    return cb.build(interval_tree(cb, tree, x))


def build_param_select(plan) -> Circuit:
    cb = CircuitBuilder()
    leaves = cb.input_a(len(plan))
    return cb.build(param_select(cb, plan.payloads, plan.widths.lp, leaves))


def build_subtractor(lx, keep) -> Circuit:
    cb = CircuitBuilder()
    x = cb.input_a(lx)
    s = cb.input_b(lx)
    return cb.build(subtract(cb, x, s, keep))


def build_adder(wa, wb, width=None) -> Circuit:
    cb = CircuitBuilder()
    a, b = cb.input_a(wa), cb.input_b(wb)
    return cb.build(add(cb, a, b, width))


def build_multiplier(wa, wb, width=None, signed=False) -> Circuit:
    """Product circuit; rows run over the shorter operand.

    With ``signed`` both operands are two's complement and the product has
    ``wa + wb`` bits unless ``width`` says otherwise.
    """
    cb = CircuitBuilder()
    a, b = cb.input_a(wa), cb.input_b(wb)
    width = wa + wb if width is None else width
    if len(b) > len(a):
        a, b = b, a
    if signed:
        return cb.build(sign_extend(cb, multiply_signed_signed(cb, a, b), width)[:width])
    return cb.build(multiply(cb, a, b, width))


def build_horner(plan, out_bits=None) -> Circuit:
    """Standalone evaluation stage: inputs A are the coefficient fields, then ``delta``."""
    w = plan.widths
    out_bits = plan.ly if out_bits is None else out_bits
    cb = CircuitBuilder()
    fields = [cb.input_a(fw) for fw in w.field_widths]
    delta = cb.input_a(w.lv)
    return cb.build(horner(cb, w, fields, delta, out_bits))


def _select_fields(cb, plan, leaves, extra_columns=()):
    w = plan.widths
    offs = plan.field_offsets()
    cols = list(extra_columns)
    for off, fw in zip(offs, w.field_widths):
        cols.extend(range(off, off + fw))
    bits = dict(zip(cols, param_select(cb, plan.payloads, w.lp, leaves, cols)))
    fields = [[bits[c] for c in range(off, off + fw)] for off, fw in zip(offs, w.field_widths)]
    return fields, [bits[c] for c in extra_columns]


def build_full_gc(plan) -> Circuit:
    """Interval detection, parameter selection and polynomial evaluation.

    Inputs A: ``x`` (``lx`` bits). Outputs: ``ly`` bits of the clamped result.
    """
    w = plan.widths
    cb = CircuitBuilder()
    x = cb.input_a(plan.lx)
    cb.begin("tree")
    leaves = interval_tree(cb, plan.tree, x)
    cb.end()
    cb.begin("select")
    need_delta = plan.degree >= 1
    fields, sl = _select_fields(cb, plan, leaves, range(w.lv) if need_delta else ())
    cb.end()
    if not need_delta:
        return cb.build(zero_extend(cb, fields[0], plan.ly))
    cb.begin("subtract")
    delta = subtract(cb, x, sl, w.lv)
    cb.end()
    g = guard_bits(plan)
    cb.begin("horner")
    r = horner(cb, w, fields, delta, plan.ly + g)
    cb.end()
    cb.begin("clamp")
    out = clamp(cb, r, plan.ly) if g else r
    cb.end()
    return cb.build(out)


@dataclass(frozen=True)
class HybridLayout:
    """Bit lengths of the garbler's blinding inputs and of the blinded outputs."""

    lv: int
    tau: int
    field_widths: Tuple[int, ...]

    @property
    def r_bits(self):
        return self.lv + self.tau

    @property
    def ra_bits(self):
        return tuple(fw + self.tau for fw in self.field_widths)

    @property
    def delta_out_bits(self):
        return self.r_bits + 1

    @property
    def coeff_out_bits(self):
        # signed sum of an fw-bit signed value and an (fw + tau)-bit unsigned one
        return tuple(b + 2 for b in self.ra_bits)

    @property
    def garbler_input_bits(self):
        return self.r_bits + sum(self.ra_bits)


def hybrid_layout(plan, tau=80):
    return HybridLayout(plan.widths.lv, tau, plan.widths.field_widths)


def build_hybrid_gc(plan, tau=80) -> Circuit:
    """GC half of the hybrid protocol.

    Inputs A: ``x``. Inputs B: ``r`` then ``r_a[0..d]``. Outputs: ``delta + r``
    then ``A'_i + r_a[i]`` for each degree, all revealed to the evaluator.
    """
    if plan.degree < 1:
        raise ValueError("the hybrid protocol needs degree >= 1")
    w = plan.widths
    lay = hybrid_layout(plan, tau)
    cb = CircuitBuilder()
    x = cb.input_a(plan.lx)
    r = cb.input_b(lay.r_bits)
    ra = [cb.input_b(n) for n in lay.ra_bits]
    cb.begin("tree")
    leaves = interval_tree(cb, plan.tree, x)
    cb.end()
    cb.begin("select")
    fields, sl = _select_fields(cb, plan, leaves, range(w.lv))
    cb.end()
    cb.begin("subtract")
    delta = subtract(cb, x, sl, w.lv)
    cb.end()
    cb.begin("blind")
    outs = add(cb, delta, r, lay.delta_out_bits)
    for f, rr, n in zip(fields, ra, lay.coeff_out_bits):
        outs += add(cb, sign_extend(cb, f, n), zero_extend(cb, rr, n), n)
    cb.end()
    return cb.build(outs)


# plaintext evaluation

def _run(circuit, words_a, words_b, full):
    val = dict(zip(circuit.inputs_a, words_a))
    val.update(zip(circuit.inputs_b, words_b))
    for w, bit in circuit.constants.items():
        val[w] = full if bit else 0
    for g in circuit.gates:
        if g.kind == XOR:
            val[g.out] = val[g.ins[0]] ^ val[g.ins[1]]
        elif g.kind == NOT:
            val[g.out] = val[g.ins[0]] ^ full
        else:
            a, b = val[g.ins[0]], val[g.ins[1]]
            na, nb = a ^ full, b ^ full
            m, o = g.mask, 0
            if m & 1:
                o |= na & nb
            if m & 2:
                o |= na & b
            if m & 4:
                o |= a & nb
            if m & 8:
                o |= a & b
            val[g.out] = o
    return [val[w] for w in circuit.outputs]


def plaintext_eval(circuit: Circuit, bits_a: Sequence[int], bits_b: Sequence[int] = ()) -> List[int]:
    if len(bits_a) != len(circuit.inputs_a) or len(bits_b) != len(circuit.inputs_b):
        raise ValueError(f"expected {len(circuit.inputs_a)}+{len(circuit.inputs_b)} input bits, "
                         f"got {len(bits_a)}+{len(bits_b)}")
    return _run(circuit, [b & 1 for b in bits_a], [b & 1 for b in bits_b], 1)


def plaintext_eval_batch(circuit: Circuit, values_a: Sequence[int], values_b: Sequence[int] = None):
    """Evaluate many inputs at once, bit-sliced.

    ``values_a[j]`` is the integer on party A's inputs for instance ``j``
    (bit ``i`` to ``inputs_a[i]``); likewise ``values_b``. Returns the output
    integers per instance.
    """
    count = len(values_a)
    values_b = [0] * count if values_b is None else values_b
    full = (1 << count) - 1

    def slice_(values, nbits):
        words = []
        for i in range(nbits):
            w = 0
            for j, v in enumerate(values):
                w |= ((v >> i) & 1) << j
            words.append(w)
        return words

    outs = _run(circuit, slice_(values_a, len(circuit.inputs_a)),
                slice_(values_b, len(circuit.inputs_b)), full)
    return [sum(((word >> j) & 1) << i for i, word in enumerate(outs)) for j in range(count)]


def to_bits(v, n):
    return [(v >> i) & 1 for i in range(n)]


def from_bits(bits, signed=False):
    v = sum(b << i for i, b in enumerate(bits))
    if signed and bits and bits[-1]:
        v -= 1 << len(bits)
    return v
