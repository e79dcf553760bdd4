import json
import os
import re
import socket
import subprocess
import sys
import time

import numpy as np
import pytest

from pwstpc.cli import ConfigError, main, parse_expr, selftest
from pwstpc.circuit import Circuit, build_full_gc, count_gates
from pwstpc.encode import ApproxPlan, reference_eval


@pytest.fixture()
def plans(tmp_path):
    out = {}
    for d, extra in ((0, []), (1, ["--continuous"]), (2, ["--continuous"])):
        path = tmp_path / f"d{d}.json"
        assert main(["approx", "--degree", str(d), "--eps", "0.1", "--out", str(path)] + extra) == 0
        out[d] = path
    return out


def _free_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def test_parse_expr():
    f = parse_expr("sin(pi*x)/2 + exp(-x)*cos(x) - 3")
    xs = np.linspace(0, 1, 5)
    assert np.allclose(f(xs), np.sin(np.pi * xs) / 2 + np.exp(-xs) * np.cos(xs) - 3)
    assert parse_expr("-x")(2.0) == -2.0
    for bad in ("__import__('os')", "x**2", "y+1", "open(x)", "x.real"):
        with pytest.raises(ConfigError):
            parse_expr(bad)


def test_approx_summary(capsys):
    assert main(["approx", "--degree", "1", "--continuous"]) == 0
    n = int(re.search(r"N=(\d+)", capsys.readouterr().out).group(1))
    assert abs(n - 8) <= 2  # published: 8
    assert main(["approx", "--degree", "0"]) == 0
    assert "N=13 " in capsys.readouterr().out


def test_approx_constant_expr(capsys):
    argv = ["approx", "--function", "0.5 + 0*x", "--xa", "0", "--xb", "1", "--ya", "0", "--yb", "1",
            "--degree", "0"]
    assert main(argv) == 0
    assert "N=1 " in capsys.readouterr().out


def test_approx_table_round_trip(tmp_path, capsys):
    tab, p1, p2 = tmp_path / "t.json", tmp_path / "a.json", tmp_path / "b.json"
    assert main(["approx", "--degree", "2", "--table-out", str(tab), "--out", str(p1)]) == 0
    assert main(["approx", "--function", f"table:{tab}", "--degree", "2", "--out", str(p2)]) == 0
    assert ApproxPlan.load(p1).to_json() == ApproxPlan.load(p2).to_json()
    samples = tmp_path / "s.json"
    samples.write_text(json.dumps([0.0, 0.25, 0.5, 0.75]))
    argv = ["approx", "--function", f"table:{samples}", "--lx", "2", "--ly", "4", "--xa", "0",
            "--xb", "1", "--ya", "0", "--yb", "1", "--degree", "1"]
    assert main(argv) == 0


def test_approx_errors(tmp_path):
    assert main(["approx", "--function", "2*x", "--xa", "0", "--xb", "1", "--ya", "0", "--yb", "1"]) == 3
    assert main(["approx", "--function", "x"]) == 2
    assert main(["approx", "--function", "table:/nonexistent.json"]) == 2
    assert main(["approx", "--eps", "0.001"]) == 2
    assert main(["approx", "--degree", "3", "--continuous"]) == 2


def test_compile(plans, tmp_path, capsys):
    out = tmp_path / "c.txt"
    assert main(["compile", "--plan", str(plans[0]), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert re.search(r"total\s+non-XOR\s+22\b", text) and "horner" not in text
    c = Circuit.from_text(out.read_text())
    assert count_gates(c).non_xor_count == 22
    assert main(["compile", "--plan", str(plans[2])]) == 0
    text = capsys.readouterr().out
    want = count_gates(build_full_gc(ApproxPlan.load(plans[2])), "horner").non_xor_count
    assert re.search(rf"horner\s+non-XOR\s+{want}\b", text)
    assert main(["compile", "--plan", str(plans[2]), "--hybrid", "--tau", "40"]) == 0
    assert main(["compile", "--plan", str(tmp_path / "missing.json")]) == 2


def test_report(plans, capsys):
    assert main(["report", "--plan", str(plans[0])]) == 0
    text = capsys.readouterr().out
    assert "bytes 660" in text and "hashes 83" in text
    assert main(["report", "--plan", str(plans[1]), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["hybrid"]["exponentiations"] == 5 and doc["hybrid"]["rounds"] == 2
    assert main(["report", "--plan", str(plans[2])]) == 0
    text = capsys.readouterr().out
    assert "+11E" in text
    assert main(["report", "--plan", str(plans[2]), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert f"non-XOR {doc['full_gc']['non_xor']}" in text


def test_run_local(plans, capsys):
    plan = ApproxPlan.load(plans[1])
    assert main(["run", "--role", "local", "--plan", str(plans[1]), "--input", "37", "--tcp",
                 "--seed", "s", "--test-decode"]) == 0
    out = capsys.readouterr().out
    assert f"result {reference_eval(plan, 37)}  reference {reference_eval(plan, 37)}" in out
    sl = plan.tree.leaves[2].sl
    assert main(["run", "--role", "local", "--protocol", "hybrid", "--plan", str(plans[1]),
                 "--input", str(sl), "--key-bits", "512", "--seed", "s", "--test-decode"]) == 0
    out = capsys.readouterr().out
    assert f"scaled k*P = {plan.int_coeffs[2][0] << plan.widths.scale_shift(0)}" in out


def test_run_deterministic(plans, capsys, monkeypatch):
    digests = []
    monkeypatch.setenv("PWSTPC_SEED", "env-seed")
    for _ in range(2):
        assert main(["run", "--role", "local", "--plan", str(plans[2]), "--input", "99"]) == 0
        digests.append(re.search(r"transcript (\w+)", capsys.readouterr().out).group(1))
    assert digests[0] == digests[1]
    monkeypatch.setenv("PWSTPC_SEED", "another")
    assert main(["run", "--role", "local", "--plan", str(plans[2]), "--input", "99"]) == 0
    assert re.search(r"transcript (\w+)", capsys.readouterr().out).group(1) != digests[0]


def test_run_errors(plans):
    assert main(["run", "--role", "local", "--plan", str(plans[0]), "--input", "256"]) == 2
    assert main(["run", "--role", "local", "--protocol", "hybrid", "--plan", str(plans[0]),
                 "--input", "3"]) == 2
    assert main(["run", "--role", "evaluator", "--plan", str(plans[0]), "--input", "3"]) == 2
    port = _free_port()
    assert main(["run", "--role", "evaluator", "--plan", str(plans[0]), "--input", "3",
                 "--connect", f"127.0.0.1:{port}", "--timeout", "1"]) == 4


@pytest.mark.parametrize("proto", ["gc", "hybrid"])
def test_two_processes(plans, proto):
    port = _free_port()
    env = dict(os.environ)
    common = ["--protocol", proto, "--plan", str(plans[2]), "--seed", "two", "--test-decode",
              "--key-bits", "512"]
    garbler = subprocess.Popen([sys.executable, "-m", "pwstpc", "run", "--role", "garbler",
                                "--listen", f"127.0.0.1:{port}"] + common,
                               stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True, env=env)
    time.sleep(0.5)
    ev = subprocess.run([sys.executable, "-m", "pwstpc", "run", "--role", "evaluator", "--input", "150",
                         "--connect", f"127.0.0.1:{port}"] + common,
                        capture_output=True, text=True, env=env, timeout=120)
    g_out, _ = garbler.communicate(timeout=60)
    assert garbler.returncode == 0 and ev.returncode == 0, ev.stderr
    m = re.search(r"result (-?\d+)  reference (-?\d+)", ev.stdout)
    assert m and m.group(1) == m.group(2)
    assert "bytes sent" in g_out


def test_selftest():
    lines = []
    assert selftest(out=lines.append) == []
    assert [ln.split(":")[0] for ln in lines] == ["d=0", "d=1", "d=2"]
    assert main(["selftest"]) == 0
