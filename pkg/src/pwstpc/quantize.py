"""Sampling and quantization of a bounded real function onto integer grids.

The input domain ``[xa, xb)`` is mapped to ``[0, 2**lx)`` and the codomain
``[ya, yb)`` to ``[0, 2**ly)``. Sample ``i`` is taken at the left edge of its
input cell, ``x = i / qx + xa``.
"""

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np


class CodomainViolation(ValueError):
    """A sampled function value falls outside ``[ya, yb)``."""


def round_half_away(v):
    """Round to nearest integer, ties away from zero. Works on scalars and arrays."""
    if isinstance(v, np.ndarray):
        return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(np.int64)
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


@dataclass(frozen=True)
class FunctionSpec:
    """A bounded univariate function together with its integer encoding.

    ``evaluator`` is either a callable (vectorized over numpy arrays, or
    scalar) or a dense table of ``2**lx`` samples taken at the left edges of
    the input cells.
    """

    evaluator: Union[Callable, Sequence[float]]
    xa: float
    xb: float
    ya: float
    yb: float
    lx: int
    ly: int

    def __post_init__(self):
        if not self.xa < self.xb:
            raise ValueError(f"empty domain [{self.xa}, {self.xb})")
        if not self.ya < self.yb:
            raise ValueError(f"empty codomain [{self.ya}, {self.yb})")
        for name in ("lx", "ly"):
            v = getattr(self, name)
            if not 2 <= v <= 24:
                raise ValueError(f"{name}={v} outside 2..24")

    @property
    def qx(self):
        return 2**self.lx / (self.xb - self.xa)

    @property
    def qy(self):
        return 2**self.ly / (self.yb - self.ya)

    def sample_points(self):
        return np.arange(2**self.lx) / self.qx + self.xa

    def sample(self):
        """Real function values at the ``2**lx`` sample points."""
        n = 2**self.lx
        if not callable(self.evaluator):
            vals = np.asarray(self.evaluator, dtype=float)
            if vals.shape != (n,):
                raise ValueError(f"sample table has shape {vals.shape}, expected ({n},)")
            return vals
        xs = self.sample_points()
        try:
            vals = np.asarray(self.evaluator(xs), dtype=float)
            if vals.shape != xs.shape:
                raise TypeError
        except (TypeError, ValueError):
            vals = np.array([float(self.evaluator(float(x))) for x in xs])
        return vals


@dataclass
class QuantizedTable:
    values: np.ndarray
    lx: int
    ly: int
    xa: float
    xb: float
    ya: float
    yb: float
    clamped: int = 0
    """Samples whose rounded code hit ``2**ly`` and were pulled down one step."""

    @property
    def qx(self):
        return 2**self.lx / (self.xb - self.xa)

    @property
    def qy(self):
        return 2**self.ly / (self.yb - self.ya)

    def __len__(self):
        return len(self.values)

    def to_json(self):
        return {
            "lx": self.lx,
            "ly": self.ly,
            "xa": self.xa,
            "xb": self.xb,
            "ya": self.ya,
            "yb": self.yb,
            "values": [int(v) for v in self.values],
        }

    @classmethod
    def from_json(cls, doc):
        values = np.asarray(doc["values"], dtype=np.int64)
        table = cls(values, int(doc["lx"]), int(doc["ly"]),
                    float(doc["xa"]), float(doc["xb"]), float(doc["ya"]), float(doc["yb"]))
        if len(values) != 2**table.lx:
            raise ValueError("table length does not match lx")
        if values.min() < 0 or values.max() >= 2**table.ly:
            raise ValueError("table entry outside [0, 2**ly)")
        return table

    def dumps(self):
        # json writes floats with repr(), i.e. shortest round-tripping form (17 sig. digits max)
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text):
        return cls.from_json(json.loads(text))


def quantize_function(spec: FunctionSpec) -> QuantizedTable:
    """Sample ``spec`` at every input code and round onto the output grid."""
    ys = spec.sample()
    bad = np.flatnonzero(~((ys >= spec.ya) & (ys < spec.yb)))
    if bad.size:
        i = int(bad[0])
        raise CodomainViolation(
            f"f({float(spec.sample_points()[i])!r}) = {float(ys[i])!r} outside [{spec.ya}, {spec.yb}) "
            f"({bad.size} sample(s) affected)")
    codes = round_half_away(spec.qy * (ys - spec.ya))
    top = 2**spec.ly - 1
    clamped = int(np.count_nonzero(codes > top))
    codes = np.clip(codes, 0, top)
    return QuantizedTable(codes.astype(np.int64), spec.lx, spec.ly,
                          float(spec.xa), float(spec.xb), float(spec.ya), float(spec.yb), clamped)


def descale_output(y, table: QuantizedTable) -> float:
    """Map an output code back to the real codomain."""
    if not 0 <= y < 2**table.ly:
        raise ValueError(f"output code {y} outside [0, 2**{table.ly})")
    return y / table.qy + table.ya


def sinc(x):
    """Normalized sinc, sin(pi x) / (pi x), with sinc(0) = 1."""
    return np.sinc(x)


def sinc_spec(lx, ly=None, xa=0.0, xb=10.0):
    """The canonical demo: sinc on [0, 10).

    The codomain floor is the smallest sampled value and the ceiling sits
    just above the peak of 1, so the peak lands on the top output code.
    """
    ly = lx if ly is None else ly
    xs = np.arange(2**lx) / (2**lx / (xb - xa)) + xa
    ya = float(np.min(sinc(xs)))
    return FunctionSpec(sinc, xa, xb, ya, 1.0 + 1e-9, lx, ly)
