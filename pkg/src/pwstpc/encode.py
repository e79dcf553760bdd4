"""Integer representation of the piecewise polynomial and its reference evaluator.

Coefficient ``a_i`` of every segment is stored as ``A'_i = round(k_i * a_i)``
with ``k_i = 2**lk_i``. All terms are brought to the common scale ``k = k_d``
by a left shift of ``lk - lk_i`` bits and the final sum is divided by ``k``
by dropping its ``lk`` low bits (floor, i.e. arithmetic shift).
"""

import json
import math
from dataclasses import dataclass
from typing import List, Tuple

from .partition import PartitionTree
from .quantize import round_half_away


class WidthOverflow(ValueError):
    """A rounded coefficient does not fit in its field."""


@dataclass(frozen=True)
class BitWidthPlan:
    degree: int
    lx: int
    ly: int
    lv: int
    lki: Tuple[int, ...]
    lui: Tuple[int, ...]

    @property
    def lk(self):
        return self.lki[-1]

    @property
    def k(self):
        return 2**self.lk

    @property
    def ki(self):
        return tuple(2**v for v in self.lki)

    @property
    def field_widths(self):
        """Two's-complement width of each coefficient field, sign bit included."""
        return tuple(u + f + 1 for u, f in zip(self.lui, self.lki))

    @property
    def lp(self):
        return self.lx + sum(self.field_widths)

    def scale_shift(self, i):
        """``log2(k / k_i)``."""
        return self.lk - self.lki[i]


def fractional_bits(degree, lv):
    """``lk_i = i*lv + ceil(log2(d+1)) - 1``, clamped at 0 for constants."""
    extra = math.ceil(math.log2(degree + 1)) - 1
    return tuple(max(0, i * lv + extra) for i in range(degree + 1))


def _magnitude_bits(values, frac):
    top = max((abs(a) for a in values), default=0.0)
    bits = math.ceil(math.log2(top)) if top >= 1 else 0
    # the ceil(log2) rule misses exact powers of two and values that round up
    # to one; widen until every rounded coefficient fits
    biggest = max((abs(round_half_away(a * 2**frac)) for a in values), default=0)
    while biggest >= 2**(bits + frac):
        bits += 1
    return bits


def compute_bitwidths(tree: PartitionTree) -> BitWidthPlan:
    widest = max(s.width for s in tree.leaves)
    lv = (widest - 1).bit_length()
    lki = fractional_bits(tree.degree, lv)
    lui = tuple(_magnitude_bits([s.coeffs[i] for s in tree.leaves], lki[i])
                for i in range(tree.degree + 1))
    return BitWidthPlan(tree.degree, tree.lx, tree.ly, lv, lki, lui)


def _twos(v, width):
    return v & ((1 << width) - 1)


@dataclass
class ApproxPlan:
    tree: PartitionTree
    widths: BitWidthPlan
    int_coeffs: List[Tuple[int, ...]]
    domain: Tuple[float, float] = (0.0, 1.0)
    codomain: Tuple[float, float] = (0.0, 1.0)

    @property
    def degree(self):
        return self.tree.degree

    @property
    def lx(self):
        return self.tree.lx

    @property
    def ly(self):
        return self.tree.ly

    def __len__(self):
        return len(self.tree.leaves)

    @property
    def payloads(self) -> List[int]:
        """Per-leaf parameter string as an ``lp``-bit integer, bit 0 first on the wire.

        Layout from bit 0 upwards: ``s_l`` (``lx`` bits), then the
        two's-complement field of every degree ``0..d``.
        """
        out = []
        fw = self.widths.field_widths
        for seg, coeffs in zip(self.tree.leaves, self.int_coeffs):
            p, pos = seg.sl, self.lx
            for c, w in zip(coeffs, fw):
                p |= _twos(c, w) << pos
                pos += w
            out.append(p)
        return out

    def field_offsets(self):
        """Bit offset of each coefficient field inside a payload."""
        offs, pos = [], self.lx
        for w in self.widths.field_widths:
            offs.append(pos)
            pos += w
        return offs

    def scaled_value(self, x) -> int:
        """``k`` times the polynomial at ``x``, before truncation."""
        j = self.tree.locate(x)
        delta = x - self.tree.leaves[j].sl
        w = self.widths
        return sum((c << w.scale_shift(i)) * delta**i for i, c in enumerate(self.int_coeffs[j]))

    def to_json(self):
        w = self.widths
        return {
            "tree": self.tree.to_json(),
            "lv": w.lv,
            "lk": w.lk,
            "lki": list(w.lki),
            "lui": list(w.lui),
            "lp": w.lp,
            "intCoeffs": [list(c) for c in self.int_coeffs],
            "domain": list(self.domain),
            "codomain": list(self.codomain),
        }

    @classmethod
    def from_json(cls, doc):
        tree = PartitionTree.from_json(doc["tree"])
        w = BitWidthPlan(tree.degree, tree.lx, tree.ly, int(doc["lv"]),
                         tuple(int(v) for v in doc["lki"]), tuple(int(v) for v in doc["lui"]))
        if w.lp != int(doc["lp"]) or w.lk != int(doc["lk"]):
            raise ValueError("inconsistent bit-width plan")
        coeffs = [tuple(int(c) for c in row) for row in doc["intCoeffs"]]
        plan = cls(tree, w, coeffs, tuple(doc.get("domain", (0.0, 1.0))),
                   tuple(doc.get("codomain", (0.0, 1.0))))
        _check_fields(plan)
        return plan

    def dumps(self):
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text):
        return cls.from_json(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _check_fields(plan):
    for j, row in enumerate(plan.int_coeffs):
        for i, c in enumerate(row):
            lim = 2**(plan.widths.lui[i] + plan.widths.lki[i])
            if not -lim <= c < lim:
                raise WidthOverflow(f"leaf {j} coefficient {i} = {c} exceeds +-2^{lim.bit_length() - 1}")


def quantize_coeffs(tree: PartitionTree, widths: BitWidthPlan = None, domain=(0.0, 1.0),
                    codomain=(0.0, 1.0)) -> ApproxPlan:
    widths = compute_bitwidths(tree) if widths is None else widths
    coeffs = [tuple(round_half_away(a * k) for a, k in zip(seg.coeffs, widths.ki))
              for seg in tree.leaves]
    plan = ApproxPlan(tree, widths, coeffs, tuple(domain), tuple(codomain))
    _check_fields(plan)
    return plan


def build_plan(table, degree, eps, fit_kind="plain") -> ApproxPlan:
    """Partition, size and quantize in one call."""
    from .partition import bisect

    tree = bisect(table, degree, eps, fit_kind)
    return quantize_coeffs(tree, domain=(table.xa, table.xb), codomain=(table.ya, table.yb))


def reference_eval_raw(plan: ApproxPlan, x) -> int:
    """Truncated value before clamping to the output range; may be negative."""
    return plan.scaled_value(x) >> plan.widths.lk


def reference_eval(plan: ApproxPlan, x) -> int:
    v = reference_eval_raw(plan, x)
    return min(max(v, 0), 2**plan.ly - 1)


def horner_eval(plan: ApproxPlan, x) -> int:
    """Same as :func:`reference_eval_raw`, via ``v_i = A_{d-i} + delta * v_{i-1}``."""
    j = plan.tree.locate(x)
    delta = x - plan.tree.leaves[j].sl
    w = plan.widths
    big = [c << w.scale_shift(i) for i, c in enumerate(plan.int_coeffs[j])]
    v = big[-1]
    for a in reversed(big[:-1]):
        v = a + delta * v
    return v >> w.lk
