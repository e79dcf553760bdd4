import hashlib
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pwstpc.quantize import (CodomainViolation, FunctionSpec, QuantizedTable, descale_output,
                             quantize_function, round_half_away, sinc_spec)

# sha256 of json.dumps(list of codes), from a 50-digit mpmath evaluation of sinc
SINC8_SHA = "29ee47b6636f44ad58177a20492cef841a0a53f55ab128663b9b52c1a17502c0"
SINC12_SHA = "201cdb3f4fcd2ff1615ba6e4b8f2aa75a7d75ab9caccc40aabf1941f6c11e49c"


def _sha(values):
    return hashlib.sha256(json.dumps([int(v) for v in values]).encode()).hexdigest()


def test_identity_map():
    t = quantize_function(FunctionSpec(lambda x: x, 0, 1, 0, 1, 3, 3))
    assert list(t.values) == [0, 1, 2, 3, 4, 5, 6, 7]


def test_constant_map():
    t = quantize_function(FunctionSpec(lambda x: 0.5 + 0 * x, 0, 1, 0, 1, 2, 4))
    assert list(t.values) == [8, 8, 8, 8]


def test_scalar_only_callable():
    t = quantize_function(FunctionSpec(lambda x: min(x, 0.5), 0, 1, 0, 1, 3, 3))
    assert list(t.values) == [0, 1, 2, 3, 4, 4, 4, 4]


def test_dense_sample_table():
    t = quantize_function(FunctionSpec([0.0, 0.25, 0.5, 0.75], 0, 1, 0, 1, 2, 2))
    assert list(t.values) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        quantize_function(FunctionSpec([0.0, 0.5], 0, 1, 0, 1, 2, 2))


def test_sinc_tables_match_oracle(sinc8, sinc12):
    assert _sha(sinc8.values) == SINC8_SHA
    assert _sha(sinc12.values) == SINC12_SHA
    assert list(sinc8.values[:8]) == [255, 255, 254, 251, 248, 243, 238, 231]
    assert int(np.argmin(sinc8.values)) == 36 and sinc8.values[36] == 0


def test_codomain_violation():
    with pytest.raises(CodomainViolation):
        quantize_function(FunctionSpec(lambda x: 2 * x, 0, 1, 0, 1, 4, 4))


def test_top_code_clamped():
    # 1 - 1e-12 rounds to 2**ly and is pulled down
    t = quantize_function(FunctionSpec(lambda x: 1 - 1e-12 + 0 * x, 0, 1, 0, 1, 2, 3))
    assert list(t.values) == [7] * 4 and t.clamped == 4


@pytest.mark.parametrize("kw", [dict(xa=1, xb=1), dict(ya=2, yb=1), dict(lx=1), dict(ly=25)])
def test_spec_validation(kw):
    base = dict(evaluator=lambda x: x, xa=0, xb=1, ya=0, yb=1, lx=4, ly=4)
    base.update(kw)
    with pytest.raises(ValueError):
        FunctionSpec(**base)


def test_round_half_away():
    assert [round_half_away(v) for v in (0.5, 1.5, -0.5, -2.5, -2.4, 2.49)] == [1, 2, -1, -3, -2, 2]
    arr = round_half_away(np.array([0.5, -0.5, 1.2]))
    assert list(arr) == [1, -1, 1]


def test_descale():
    t = quantize_function(FunctionSpec(lambda x: 0.5 + 0 * x, 0, 1, 0, 1, 2, 4))
    assert descale_output(8, t) == 0.5
    t2 = quantize_function(FunctionSpec(lambda x: 0 * x, 0, 1, -0.3, 0.7, 2, 4))
    assert descale_output(0, t2) == pytest.approx(-0.3)
    with pytest.raises(ValueError):
        descale_output(16, t)


def test_descale_sinc_top(sinc8):
    assert abs(descale_output(255, sinc8) - 1.0) <= 1 / sinc8.qy


def test_json_round_trip(sinc8):
    back = QuantizedTable.loads(sinc8.dumps())
    assert list(back.values) == list(sinc8.values)
    assert (back.xa, back.xb, back.ya, back.yb) == (sinc8.xa, sinc8.xb, sinc8.ya, sinc8.yb)
    assert set(json.loads(sinc8.dumps())) == {"lx", "ly", "xa", "xb", "ya", "yb", "values"}


@pytest.mark.parametrize("lx", [4, 8, 12])
def test_sinc_round_trip_error(lx):
    spec = sinc_spec(lx)
    t = quantize_function(spec)
    ys = spec.sample()
    back = np.array([descale_output(int(v), t) for v in t.values])
    assert np.max(np.abs(back - ys)) <= 1 / t.qy + 1e-12


@given(a=st.floats(0.1, 3), b=st.floats(0, 6), lx=st.integers(2, 9), ly=st.integers(2, 12))
def test_round_trip_property(a, b, lx, ly):
    f = lambda x: np.sin(a * x + b)
    spec = FunctionSpec(f, 0.0, 2.0, -1.0, 1.0 + 1e-6, lx, ly)
    t = quantize_function(spec)
    back = t.values / t.qy + t.ya
    assert np.all(np.abs(back - spec.sample()) <= 1 / t.qy + 1e-12)
    assert t.values.min() >= 0 and t.values.max() < 2**ly


@given(a=st.floats(0.1, 3), lx=st.integers(2, 8), ly=st.integers(2, 11))
def test_refinement_never_hurts(a, lx, ly):
    f = lambda x: np.cos(a * x)
    err = []
    for bits in (ly, 2 * ly):
        spec = FunctionSpec(f, 0.0, 2.0, -1.0, 1.0 + 1e-6, lx, bits)
        t = quantize_function(spec)
        err.append(np.abs(t.values / t.qy + t.ya - spec.sample()))
    # half a step at ly bits bounds the error; doubling the bits stays within it
    assert np.all(err[1] <= 0.5 / (2**ly / (2 + 1e-6)) + 1e-9)
    assert math.isfinite(err[0].max())
