"""Command line: approx, compile, run, report, selftest.

Exit codes: 2 invalid configuration, 3 function leaves its codomain,
4 transport failure, 5 test-mode result mismatch.
"""

import argparse
import ast
import json
import operator
import os
import sys

import numpy as np

from . import account, paillier
from .circuit import build_full_gc, build_hybrid_gc, count_gates, from_bits, plaintext_eval_batch, to_bits
from .encode import ApproxPlan, build_plan, reference_eval, reference_eval_raw
from .garble import decode, evaluate, garble
from .protocol import (CapacityExceeded, ProtocolError, TcpTransport, TransportError, full_gc_evaluator,
                       full_gc_garbler, hybrid_evaluator, hybrid_garbler, run_full_gc, run_hybrid,
                       session_rngs)
from .quantize import CodomainViolation, FunctionSpec, QuantizedTable, quantize_function, sinc_spec

EXIT_CONFIG, EXIT_CODOMAIN, EXIT_TRANSPORT, EXIT_MISMATCH = 2, 3, 4, 5


class ConfigError(Exception):
    pass


# expression functions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_NAMES = {"pi": np.pi, "e": np.e}


def parse_expr(text):
    """Compile ``text`` (in ``x``; + - * /, sin, cos, exp, pi, e) into a vectorized function."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as e:
        raise ConfigError(f"cannot parse expression {text!r}: {e.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or len(node.args) != 1 \
                    or node.keywords:
                raise ConfigError(f"unsupported call in {text!r}")
            check(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id != "x" and node.id not in _NAMES:
                raise ConfigError(f"unknown name {node.id!r} in {text!r}")
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            pass
        else:
            raise ConfigError(f"unsupported syntax in {text!r}")

    check(tree)

    def ev(node, x):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, x), ev(node.right, x))
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand, x)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](ev(node.args[0], x))
        if isinstance(node, ast.Name):
            return x if node.id == "x" else _NAMES[node.id]
        return float(node.value)

    def f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.broadcast_to(ev(tree.body, x), x.shape).astype(float)

    return f


def load_table(args):
    fn = args.function
    if fn == "sinc":
        spec = sinc_spec(args.lx, args.ly, args.xa if args.xa is not None else 0.0,
                         args.xb if args.xb is not None else 10.0)
        if args.ya is not None or args.yb is not None:
            spec = FunctionSpec(spec.evaluator, spec.xa, spec.xb,
                                spec.ya if args.ya is None else args.ya,
                                spec.yb if args.yb is None else args.yb, spec.lx, spec.ly)
        return quantize_function(spec)
    if fn.startswith("table:"):
        path = fn[len("table:"):]
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read table {path}: {e}") from None
        if isinstance(doc, dict):
            return QuantizedTable.from_json(doc)
        # a bare list of real samples taken at the left cell edges
        return quantize_function(_spec(args, doc))
    return quantize_function(_spec(args, parse_expr(fn)))


def _spec(args, evaluator):
    if None in (args.xa, args.xb, args.ya, args.yb):
        raise ConfigError("--xa --xb --ya --yb are required for this function")
    ly = args.lx if args.ly is None else args.ly
    return FunctionSpec(evaluator, args.xa, args.xb, args.ya, args.yb, args.lx, ly)


def _load_plan(path):
    try:
        return ApproxPlan.load(path)
    except (OSError, ValueError, KeyError) as e:
        raise ConfigError(f"cannot load plan {path}: {e}") from None


def _seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    return os.environ.get("PWSTPC_SEED")


# commands

def cmd_approx(args):
    table = load_table(args)
    if args.table_out:
        with open(args.table_out, "w") as fh:
            fh.write(table.dumps())
    kind = "continuous" if args.continuous else "plain"
    plan = build_plan(table, args.degree, args.eps, kind)
    if args.out:
        plan.save(args.out)
    w = plan.widths
    print(f"N={len(plan)} lv={w.lv} lp={w.lp} lk={w.lk} degree={plan.degree} fit={kind}")
    if table.clamped:
        print(f"note: {table.clamped} sample(s) rounded to 2**ly and were clamped")
    return 0


def cmd_compile(args):
    plan = _load_plan(args.plan)
    c = build_hybrid_gc(plan, args.tau) if args.hybrid else build_full_gc(plan)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(c.to_text())
    total = count_gates(c)
    for name in c.stages:
        g = count_gates(c, name)
        print(f"{name:<9} non-XOR {g.non_xor_count:>7}  XOR {g.xor_count:>7}")
    print(f"{'total':<9} non-XOR {total.non_xor_count:>7}  XOR {total.xor_count:>7}  NOT {total.not_count}")
    return 0


def _endpoint(args):
    spec = args.listen or args.connect
    if not spec:
        return None
    host, _, port = spec.rpartition(":")
    try:
        port = int(port)
    except ValueError:
        raise ConfigError(f"bad HOST:PORT {spec!r}") from None
    if args.listen:
        srv = TcpTransport.listen(host or "127.0.0.1", port)
        print(f"listening on {srv.getsockname()[0]}:{srv.getsockname()[1]}", flush=True)
        return TcpTransport.accept(srv, args.timeout)
    return TcpTransport.connect(host or "127.0.0.1", port, args.timeout)


def _print_stats(tr):
    by = tr.bytes_by_direction()
    print(f"bytes sent {by['out']} received {by['in']} rounds {tr.rounds()}")
    print("by tag: " + " ".join(f"{k}={v}" for k, v in sorted(tr.bytes_by_tag().items())))
    print(f"transcript {tr.digest()}")


def cmd_run(args):
    plan = _load_plan(args.plan)
    seed = _seed(args)
    if args.protocol == "hybrid" and plan.degree < 1:
        raise ConfigError("the hybrid protocol needs a plan of degree >= 1")
    if args.role in ("evaluator", "local"):
        if args.input is None or not 0 <= args.input < 2**plan.lx:
            raise ConfigError(f"--input must be in [0, {2**plan.lx})")
    if args.role == "local":
        kind = "tcp" if args.tcp else "queue"
        if args.protocol == "gc":
            res = run_full_gc(plan, args.input, kind, seed, args.t, args.test_decode)
            want = reference_eval(plan, args.input)
        else:
            kp = paillier.keygen(args.key_bits, seed and f"{seed}/keygen", insecure_test_keys=True)
            res = run_hybrid(plan, args.input, kp, kind, seed, args.t, args.tau, test_decode=args.test_decode)
            want = reference_eval_raw(plan, args.input)
            if args.test_decode:
                print(f"scaled k*P = {res.scaled}")
        print(f"rounds {res.rounds}  B->A {res.bytes_garbler_to_evaluator}  "
              f"A->B {res.bytes_evaluator_to_garbler}  transcript {res.digest}")
        return _verdict(args, res.value, want)
    tr = _endpoint(args)
    if tr is None:
        raise ConfigError("give --listen or --connect (or --role local)")
    rg, re_ = session_rngs(seed)
    try:
        if args.role == "garbler":
            if args.protocol == "gc":
                full_gc_garbler(plan, tr, rg, args.t, args.test_decode)
            else:
                hybrid_garbler(plan, tr, rg, args.t, args.tau, args.test_decode)
            _print_stats(tr)
            return 0
        if args.protocol == "gc":
            res = full_gc_evaluator(plan, args.input, tr, re_, args.t, args.test_decode)
            want = reference_eval(plan, args.input)
        else:
            kp = paillier.keygen(args.key_bits, re_.fork("keygen"), insecure_test_keys=True)
            res = hybrid_evaluator(plan, args.input, tr, kp, re_, args.t, args.tau, args.test_decode)
            want = reference_eval_raw(plan, args.input)
            if args.test_decode:
                print(f"scaled k*P = {res.scaled}")
        _print_stats(tr)
        return _verdict(args, res.value, want)
    finally:
        tr.close()


def _verdict(args, got, want):
    if not args.test_decode:
        print("done (no test decode)")
        return 0
    print(f"result {got}  reference {want}")
    return 0 if got == want else EXIT_MISMATCH


def cmd_report(args):
    plan = _load_plan(args.plan)
    model = account.CostModel(args.t, args.T, args.tau)
    rep = account.plan_report(plan, model)
    if args.format == "json":
        print(account.to_json(rep))
    else:
        print(account.format_plan_report(rep))
    return 0


def selftest(full=False, out=print):
    """Exhaustive 8-bit equivalence checks; returns a list of failure strings."""
    table = quantize_function(sinc_spec(8))
    xs = list(range(256))
    fails = []
    for d, kind in ((0, "plain"), (1, "continuous"), (2, "continuous")):
        plan = build_plan(table, d, 0.1, kind)
        before = len(fails)
        ref = [reference_eval(plan, x) for x in xs]
        c = build_full_gc(plan)
        got = plaintext_eval_batch(c, xs)
        bad = [x for x in xs if got[x] != ref[x]]
        if bad:
            fails.append(f"d={d} plaintext circuit differs at x={bad[0]}")
        g, enc, dm = garble(c, 1)
        for x in xs:
            y = from_bits(decode(evaluate(g, enc.encode_a(to_bits(x, 8)), [], enc.constant_labels()), dm))
            if y != ref[x]:
                fails.append(f"d={d} garbled evaluation differs at x={x}")
                break
        step = 1 if full else 37
        for x in xs[::step]:
            if run_full_gc(plan, x, seed=x).value != ref[x]:
                fails.append(f"d={d} full-GC protocol differs at x={x}")
                break
        if d:
            kp = paillier.keygen(512, 7, insecure_test_keys=True)
            for x in xs[::step]:
                if run_hybrid(plan, x, kp, seed=x).value != reference_eval_raw(plan, x):
                    fails.append(f"d={d} hybrid protocol differs at x={x}")
                    break
        out(f"d={d}: N={len(plan)} {'ok' if len(fails) == before else 'FAIL'}")
    return fails


def cmd_selftest(args):
    fails = selftest(args.full)
    for f in fails:
        print(f)
    return 1 if fails else 0


def build_parser():
    p = argparse.ArgumentParser(prog="pwstpc", description="Private piecewise-polynomial function evaluation.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("approx", help="quantize a function and build an approximation plan")
    a.add_argument("--function", default="sinc", help="sinc, table:FILE, or an expression in x")
    a.add_argument("--lx", type=int, default=8)
    a.add_argument("--ly", type=int, default=None, help="defaults to --lx")
    a.add_argument("--eps", type=float, default=0.1)
    a.add_argument("--degree", type=int, default=1)
    a.add_argument("--continuous", action="store_true", help="interpolate the segment extremes")
    for name in ("xa", "xb", "ya", "yb"):
        a.add_argument(f"--{name}", type=float, default=None)
    a.add_argument("--out", help="plan JSON to write")
    a.add_argument("--table-out", help="also write the quantized table as JSON")
    a.set_defaults(func=cmd_approx)

    c = sub.add_parser("compile", help="build the circuit of a plan")
    c.add_argument("--plan", required=True)
    c.add_argument("--out")
    c.add_argument("--hybrid", action="store_true", help="GC part of the hybrid protocol")
    c.add_argument("--tau", type=int, default=80)
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("run", help="run one party (or both, with --role local)")
    r.add_argument("--role", choices=["garbler", "evaluator", "local"], required=True)
    r.add_argument("--protocol", choices=["gc", "hybrid"], default="gc")
    r.add_argument("--plan", required=True)
    g = r.add_mutually_exclusive_group()
    g.add_argument("--listen", metavar="HOST:PORT")
    g.add_argument("--connect", metavar="HOST:PORT")
    r.add_argument("--tcp", action="store_true", help="with --role local, use loopback TCP")
    r.add_argument("--input", type=int)
    r.add_argument("--seed", default=None, help="falls back to $PWSTPC_SEED")
    r.add_argument("--test-decode", action="store_true")
    r.add_argument("--key-bits", type=int, default=1024)
    r.add_argument("--t", type=int, default=80)
    r.add_argument("--tau", type=int, default=80)
    r.add_argument("--timeout", type=float, default=60.0)
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="analytic cost tables for a plan")
    rep.add_argument("--plan", required=True)
    rep.add_argument("--format", choices=["text", "json"], default="text")
    rep.add_argument("--t", type=int, default=80)
    rep.add_argument("--T", type=int, default=1024)
    rep.add_argument("--tau", type=int, default=80)
    rep.set_defaults(func=cmd_report)

    s = sub.add_parser("selftest", help="exhaustive 8-bit equivalence checks")
    s.add_argument("--full", action="store_true", help="run the protocols on every input too")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CodomainViolation as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODOMAIN
    except (TransportError, ProtocolError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ConfigError, CapacityExceeded, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
