"""Walk through the whole pipeline for sinc on [0, 10) with 8-bit input and output.

    python demos/sinc_walkthrough.py [x]
"""

import sys

from pwstpc import paillier
from pwstpc.account import CostModel, compare_measured, format_comparison
from pwstpc.circuit import build_full_gc, count_gates
from pwstpc.encode import build_plan, reference_eval, reference_eval_raw
from pwstpc.protocol import run_full_gc, run_hybrid
from pwstpc.quantize import descale_output, quantize_function, sinc_spec


def main(x=93):
    table = quantize_function(sinc_spec(8))
    print(f"table: {len(table.values)} codes, qy={table.qy:.2f}, f^({x}) = {table.values[x]}")

    plan = build_plan(table, 2, 0.1, "continuous")
    w = plan.widths
    print(f"plan: N={len(plan)} quadratic segments, lv={w.lv} lk={w.lk} payload {w.lp} bits")
    j = plan.tree.locate(x)
    seg = plan.tree.leaves[j]
    print(f"x={x} lies in [{seg.sl}, {seg.sr}), integer coefficients {plan.int_coeffs[j]}")
    print(f"reference value {reference_eval(plan, x)} -> {descale_output(reference_eval(plan, x), table):.4f}")

    c = build_full_gc(plan)
    for name in c.stages:
        print(f"  stage {name:<9} {count_gates(c, name).non_xor_count:>5} non-XOR gates")

    res = run_full_gc(plan, x, seed="demo")
    print(f"\nfull GC: y={res.value} in {res.rounds} round(s)")
    print(format_comparison(compare_measured(res, plan)))

    keys = paillier.keygen(512, "demo-keys", insecure_test_keys=True)
    res = run_hybrid(plan, x, keys, seed="demo")
    print(f"\nhybrid: k*P = {res.scaled}, floor(k*P / k) = {res.value} "
          f"(reference {reference_eval_raw(plan, x)}), {res.rounds} rounds, {res.exponentiations} exponentiations")
    print(format_comparison(compare_measured(res, plan, CostModel(T=512))))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 93)
