"""Bisection partitioning of a quantized table into power-of-two segments.

Every segment is fitted by a polynomial in the shifted variable
``delta = x - s_l``. A segment whose worst residual exceeds the absolute
threshold ``eps * qy`` is split in half; single points always fit.

Least-squares fits use exact integer moment sums and rational Gaussian
elimination, so conditioning of the normal equations is not an issue for
the tiny systems involved (at most 4 unknowns).
"""

import bisect as _bisect
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

FIT_KINDS = ("plain", "continuous")


def max_error(points, coeffs) -> float:
    """Largest absolute residual of ``coeffs`` (ascending, shifted variable) over ``points``."""
    y = np.asarray(points, dtype=float)
    delta = np.arange(len(y), dtype=float)
    approx = np.zeros_like(delta)
    for a in reversed(coeffs):
        approx = approx * delta + a
    return float(np.max(np.abs(approx - y))) if len(y) else 0.0


def fit_constant(points) -> Tuple[float, float]:
    """Midrange constant, which minimizes the worst-case error."""
    y = np.asarray(points)
    hi, lo = float(y.max()), float(y.min())
    return (hi + lo) / 2, (hi - lo) / 2


@lru_cache(maxsize=None)
def _power_sums(width, top):
    return tuple(sum(d**k for d in range(width)) for k in range(top + 1))


def _moments(y, deg):
    width = len(y)
    bits = int(y.max()).bit_length() + (deg + 1) * max(width - 1, 1).bit_length()
    if bits < 62:
        delta = np.arange(width, dtype=np.int64)
        yy = y.astype(np.int64)
        out, p = [], np.ones(width, dtype=np.int64)
        for _ in range(deg + 1):
            out.append(int(np.dot(yy, p)))
            p = p * delta
        return out
    yy = [int(v) for v in y]
    return [sum(v * d**k for d, v in enumerate(yy)) for k in range(deg + 1)]


def _solve_exact(a, b):
    """Gaussian elimination with partial pivoting over the rationals."""
    n = len(b)
    m = [[Fraction(x) for x in row] + [Fraction(bv)] for row, bv in zip(a, b)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if m[piv][col] == 0:
            raise ZeroDivisionError("singular normal equations")
        m[col], m[piv] = m[piv], m[col]
        for r in range(col + 1, n):
            f = m[r][col] / m[col][col]
            if f:
                for c in range(col, n + 1):
                    m[r][c] -= f * m[col][c]
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        s = m[r][n] - sum(m[r][c] * x[c] for c in range(r + 1, n))
        x[r] = s / m[r][r]
    return x


def fit_poly(points, d) -> Tuple[Tuple[float, ...], float]:
    """Least-squares polynomial of degree ``d`` in the shifted variable.

    Segments with fewer than ``d + 1`` points get the highest degree they
    support; the missing coefficients are zero.
    """
    y = np.asarray(points, dtype=np.int64)
    deg = min(d, len(y) - 1)
    if deg <= 0:
        c = float(y.mean()) if d >= 1 else fit_constant(y)[0]
        coeffs = (c,) + (0.0,) * d
        return coeffs, max_error(y, coeffs)
    sums = _power_sums(len(y), 2 * deg)
    normal = [[sums[i + j] for j in range(deg + 1)] for i in range(deg + 1)]
    sol = _solve_exact(normal, _moments(y, deg))
    coeffs = tuple(float(v) for v in sol) + (0.0,) * (d - deg)
    return coeffs, max_error(y, coeffs)


def fit_linear(points) -> Tuple[float, float, float]:
    """Regression line; returns ``(slope, intercept, max_err)``."""
    (q, m), err = fit_poly(points, 1)
    return m, q, err


def fit_continuous_linear(points) -> Tuple[float, float, float]:
    """Line through the first and last point of the segment."""
    y = np.asarray(points)
    if len(y) < 2:
        return 0.0, float(y[0]), 0.0
    q = float(y[0])
    m = (float(y[-1]) - q) / (len(y) - 1)
    return m, q, max_error(y, (q, m))


def fit_continuous_quadratic(points) -> Tuple[Tuple[float, float, float], float]:
    """Continuous-linear fit plus the least-squares bump ``b2 (x - s_l)(x - s_r)``.

    ``s_r`` is the last point of the segment, so both extremes are still
    interpolated exactly.
    """
    y = np.asarray(points)
    m, q, _ = fit_continuous_linear(y)
    w = len(y)
    if w < 2:
        return (q, 0.0, 0.0), 0.0
    delta = np.arange(w, dtype=float)
    span = w - 1
    resid = y - (q + m * delta)
    g = delta * (delta - span)
    den = float(np.dot(g, g))
    b2 = float(np.dot(resid, g)) / den if den else 0.0
    coeffs = (q, m - b2 * span, b2)
    return coeffs, max_error(y, coeffs)


def fit_segment(points, degree, fit_kind="plain"):
    """Dispatch to the fit for ``(degree, fit_kind)``; returns ``(coeffs, max_err)``."""
    if fit_kind == "plain":
        if degree == 0:
            c, err = fit_constant(points)
            return (c,), err
        return fit_poly(points, degree)
    if degree == 1:
        m, q, err = fit_continuous_linear(points)
        return (q, m), err
    if degree == 2:
        return fit_continuous_quadratic(points)
    raise ValueError(f"no continuous fit of degree {degree}")


@dataclass(frozen=True)
class Segment:
    sl: int
    width: int
    depth: int
    coeffs: Tuple[float, ...]
    max_err: float

    @property
    def sr(self):
        return self.sl + self.width

    def path_bits(self, lx):
        """Branch bits from the root, most significant first."""
        return [(self.sl >> (lx - 1 - i)) & 1 for i in range(self.depth)]


@dataclass
class Node:
    sl: int
    depth: int
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    leaf: Optional[int] = None  # index into PartitionTree.leaves

    @property
    def is_leaf(self):
        return self.leaf is not None


@dataclass
class PartitionTree:
    root: Node
    leaves: List[Segment]
    degree: int
    eps: float
    lx: int
    ly: int
    threshold: float
    fit_kind: str = "plain"

    def __post_init__(self):
        self._starts = [s.sl for s in self.leaves]

    def __len__(self):
        return len(self.leaves)

    def locate(self, x):
        """Index of the leaf containing input code ``x``."""
        if not 0 <= x < 2**self.lx:
            raise ValueError(f"input {x} outside [0, 2**{self.lx})")
        return _bisect.bisect_right(self._starts, x) - 1

    def internal_count(self):
        def walk(n):
            return 0 if n.is_leaf else 1 + walk(n.left) + walk(n.right)
        return walk(self.root)

    def to_json(self):
        return {
            "degree": self.degree,
            "eps": self.eps,
            "fitKind": self.fit_kind,
            "lx": self.lx,
            "ly": self.ly,
            "threshold": self.threshold,
            "leaves": [{"sl": s.sl, "depth": s.depth, "coeffs": list(s.coeffs), "maxErr": s.max_err}
                       for s in self.leaves],
        }

    @classmethod
    def from_json(cls, doc):
        lx = int(doc["lx"])
        leaves = [Segment(int(e["sl"]), 2**(lx - int(e["depth"])), int(e["depth"]),
                          tuple(float(c) for c in e["coeffs"]), float(e["maxErr"]))
                  for e in doc["leaves"]]
        root = _tree_from_leaves(leaves, lx)
        return cls(root, leaves, int(doc["degree"]), float(doc["eps"]), lx, int(doc["ly"]),
                   float(doc["threshold"]), doc.get("fitKind", "plain"))

    def dumps(self):
        return json.dumps(self.to_json())


def _tree_from_leaves(leaves, lx):
    pos = 0

    def build(sl, depth):
        nonlocal pos
        if pos >= len(leaves):
            raise ValueError("leaves do not tile the domain")
        seg = leaves[pos]
        if seg.sl == sl and seg.depth == depth:
            pos += 1
            return Node(sl, depth, leaf=pos - 1)
        if depth >= lx or seg.depth <= depth:
            raise ValueError(f"leaf at {seg.sl} (depth {seg.depth}) is not aligned")
        half = 2**(lx - depth - 1)
        return Node(sl, depth, build(sl, depth + 1), build(sl + half, depth + 1))

    root = build(0, 0)
    if pos != len(leaves):
        raise ValueError("extra leaves past the end of the domain")
    return root


def bisect(table, degree, eps, fit_kind="plain") -> PartitionTree:
    """Recursively halve the domain until every segment fits within ``eps * qy``."""
    if fit_kind not in FIT_KINDS:
        raise ValueError(f"unknown fit kind {fit_kind!r}")
    allowed = (0, 1, 2, 3) if fit_kind == "plain" else (1, 2)
    if degree not in allowed:
        raise ValueError(f"degree {degree} not supported for {fit_kind} fits")
    threshold = eps * table.qy
    if threshold < 1:
        raise ValueError(f"eps * qy = {threshold:.4g} is below one output step")
    values = np.asarray(table.values, dtype=np.int64)
    lx = table.lx
    leaves = []

    def split(sl, depth):
        width = 2**(lx - depth)
        pts = values[sl:sl + width]
        if width == 1:
            coeffs, err = (float(pts[0]),) + (0.0,) * degree, 0.0
        else:
            coeffs, err = fit_segment(pts, degree, fit_kind)
        if err <= threshold or width == 1:
            leaves.append(Segment(sl, width, depth, tuple(coeffs), err))
            return Node(sl, depth, leaf=len(leaves) - 1)
        half = width // 2
        return Node(sl, depth, split(sl, depth + 1), split(sl + half, depth + 1))

    root = split(0, 0)
    return PartitionTree(root, leaves, degree, float(eps), lx, table.ly, float(threshold), fit_kind)
