import pytest
import numpy as np

from pwstpc import paillier
from pwstpc._rng import Prng
from pwstpc.circuit import hybrid_layout
from pwstpc.encode import build_plan, reference_eval, reference_eval_raw
from pwstpc.protocol import (HEADER, TAG_MATERIAL, TAG_R1, TAG_TEST, CapacityExceeded,
                             HybridRandomness, ProtocolError, QueueTransport, TransportError,
                             count_rounds, hybrid_capacity_bits, make_transport_pair,
                             provide_input_secrets, run_full_gc, run_hybrid, send_input_secrets)
from pwstpc.quantize import FunctionSpec, quantize_function

import threading


@pytest.fixture(scope="module")
def small_table():
    return quantize_function(FunctionSpec(lambda x: np.exp(-2 * x) * np.cos(6 * x), 0, 1,
                                          -0.6, 1.01, 5, 8))


@pytest.mark.parametrize("kind", ["queue", "tcp"])
def test_transport_framing(kind):
    a, b = make_transport_pair(kind)
    a.send(0x7F, b"hello")
    a.send(0x02, b"")
    assert b.recv() == (0x7F, b"hello")
    assert b.recv(0x02) == (0x02, b"")
    b.send(0x10, bytes(1000))
    assert a.recv(0x10)[1] == bytes(1000)
    assert a.bytes_by_direction() == {"out": 2 * HEADER + 5, "in": HEADER + 1000}
    assert b.bytes_by_direction() == {"in": 2 * HEADER + 5, "out": HEADER + 1000}
    assert a.digest() != b.digest()
    a.send(0x11, b"x")
    with pytest.raises(ProtocolError):
        b.recv(0x12)
    a.close()
    b.close()


def test_queue_timeout():
    a, b = QueueTransport.pair(timeout=0.05)
    with pytest.raises(TransportError):
        b.recv()


def test_tcp_peer_closed():
    a, b = make_transport_pair("tcp", timeout=2)
    a.close()
    with pytest.raises(TransportError):
        b.recv()
    b.close()


def test_round_counting():
    log = [("out", 0x02, 10), ("out", 0x03, 10), ("in", 0x04, 10), ("in", 0x11, 5),
           ("out", 0x12, 5), ("in", 0x13, 5), ("out", 0x7F, 5)]
    assert count_rounds(log) == 4


def test_input_secrets_over_transport():
    a, b = make_transport_pair("queue")
    pairs = [(i, 1000 + i) for i in range(6)]
    box = {}
    th = threading.Thread(target=lambda: send_input_secrets(pairs, a, Prng(1)))
    th.start()
    box["l"] = provide_input_secrets(0b101101, 6, b, Prng(2))
    th.join()
    assert box["l"] == [p[(0b101101 >> i) & 1] for i, p in enumerate(pairs)]


@pytest.mark.parametrize("kind", ["queue", "tcp"])
@pytest.mark.parametrize("d", [0, 1, 2])
def test_full_gc_exhaustive_small(small_table, kind, d):
    plan = build_plan(small_table, d, 0.05)
    for x in range(32):
        res = run_full_gc(plan, x, kind, seed=x)
        assert res.value == reference_eval(plan, x)
        assert res.rounds == 1


@pytest.mark.parametrize("kind", ["queue", "tcp"])
@pytest.mark.parametrize("d", [1, 2])
def test_hybrid_exhaustive_small(small_table, keys512, kind, d):
    plan = build_plan(small_table, d, 0.05)
    for x in range(32):
        res = run_hybrid(plan, x, keys512, kind, seed=x, tau=40)
        assert res.value == reference_eval_raw(plan, x)
        assert res.scaled == plan.scaled_value(x)
        assert res.rounds == (2 if d == 1 else 4)
        assert res.exponentiations == (5 if d == 1 else 11)


def test_hybrid_left_extreme(plans8, keys512):
    plan = plans8[1]
    w = plan.widths
    for j in (0, len(plan) - 1):
        seg = plan.tree.leaves[j]
        res = run_hybrid(plan, seg.sl, keys512, seed=3)
        assert res.scaled == plan.int_coeffs[j][0] << w.scale_shift(0)
        assert res.value == reference_eval_raw(plan, seg.sl)


def test_hybrid_rerandomize(plans8, keys512):
    plan = plans8[2]
    a = run_hybrid(plan, 77, keys512, seed=1)
    b = run_hybrid(plan, 77, keys512, seed=1, rerandomize=True)
    assert a.value == b.value == reference_eval_raw(plan, 77)
    assert b.exponentiations == a.exponentiations + plan.degree - 1


@pytest.mark.parametrize("proto", ["gc", "hybrid"])
def test_fixed_seed_transcripts(plans8, keys512, proto):
    plan = plans8[2]
    runs = []
    for kind in ("queue", "queue", "tcp"):
        if proto == "gc":
            runs.append(run_full_gc(plan, 123, kind, seed="fixed"))
        else:
            runs.append(run_hybrid(plan, 123, keys512, kind, seed="fixed"))
    assert runs[0].digest == runs[1].digest == runs[2].digest
    other = run_full_gc(plan, 123, seed="other") if proto == "gc" else \
        run_hybrid(plan, 123, keys512, seed="other")
    assert other.digest != runs[0].digest


def test_material_bytes(plans8):
    from pwstpc.account import model_full_gc
    for d in (0, 1, 2):
        res = run_full_gc(plans8[d], 5, seed=1)
        assert res.material_bytes == model_full_gc(plans8[d])["bytes"]
    assert run_full_gc(plans8[0], 5, seed=1).material_bytes == 660


def test_obfuscation_coverage(plans8, keys512):
    tau = 80
    for d in (1, 2):
        plan = plans8[d]
        w = plan.widths
        lay = hybrid_layout(plan, tau)
        rnd = HybridRandomness.sample(plan, Prng(d), tau)
        # delta < 2^lv, blinded by r of lv + tau bits
        assert lay.r_bits - w.lv >= tau and rnd.r < 2**lay.r_bits
        for i, fw in enumerate(w.field_widths):
            # |A'_i| < 2^(fw - 1)
            assert lay.ra_bits[i] - (fw - 1) >= tau
        for i in range(2, d + 1):
            assert rnd.rd[i] < 2**(i * w.lv + tau)
        res = run_hybrid(plan, 200, keys512, seed=d, tau=tau)
        seen = res.evaluator.obfuscated
        assert seen["delta_plus_r"] >= 0


def test_capacity(plans8):
    small = paillier.keygen(128, Prng(1), insecure_test_keys=True)
    with pytest.raises(CapacityExceeded):
        run_hybrid(plans8[2], 1, small)
    assert hybrid_capacity_bits(plans8[2]) < 510


def test_hybrid_needs_degree(plans8, keys512):
    with pytest.raises(ValueError):
        run_hybrid(plans8[0], 1, keys512)


def test_input_range(plans8):
    with pytest.raises(ValueError):
        run_full_gc(plans8[0], 256)


def test_log_tags(plans8, keys512):
    res = run_hybrid(plans8[1], 9, keys512, seed=2)
    tags = [tag for _, tag, _ in res.log]
    assert TAG_MATERIAL in tags and TAG_R1 in tags and tags[-1] == TAG_TEST
    ct = sum(n - HEADER for _, tag, n in res.log if tag == 0x13)
    assert ct == 3 * keys512.public.ciphertext_bytes
