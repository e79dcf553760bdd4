"""Segment counts and modeled costs for sinc over the usual (l, eps) grid.

    python demos/cost_tables.py
"""

from pwstpc.account import grid_table, model_full_gc, model_hybrid
from pwstpc.encode import build_plan
from pwstpc.quantize import quantize_function, sinc_spec

EPS = (0.1, 0.05, 0.01)
ELLS = (8, 12)
FIT = {0: "plain", 1: "continuous", 2: "continuous"}
NAMES = {0: "constant", 1: "linear", 2: "quadratic"}


def main():
    tables = {lx: quantize_function(sinc_spec(lx)) for lx in ELLS}
    plans = {(lx, e, d): build_plan(tables[lx], d, e, FIT[d]) for lx in ELLS for e in EPS for d in FIT}
    for d in FIT:
        cells = {(lx, e): len(plans[lx, e, d]) for lx in ELLS for e in EPS}
        print(grid_table(cells, f"\nsegments, {NAMES[d]}", ELLS, EPS))
    for d in FIT:
        cells = {(lx, e): int(model_full_gc(plans[lx, e, d])["bytes"]) for lx in ELLS for e in EPS}
        print(grid_table(cells, f"\nfull-GC bytes, {NAMES[d]}", ELLS, EPS))
    for d in FIT:
        cells = {(lx, e): model_full_gc(plans[lx, e, d])["hashes_total"] for lx in ELLS for e in EPS}
        print(grid_table(cells, f"\nfull-GC hashes, {NAMES[d]}", ELLS, EPS))
    for d in (1, 2):
        cells = {(lx, e): int(model_hybrid(plans[lx, e, d])["bytes"]) for lx in ELLS for e in EPS}
        print(grid_table(cells, f"\nhybrid bytes, {NAMES[d]} [{2 if d == 1 else 4} rounds]", ELLS, EPS))
        cells = {(lx, e): "{}H+{}E".format(model_hybrid(plans[lx, e, d])["hashes_total"],
                                         model_hybrid(plans[lx, e, d])["exponentiations"])
                 for lx in ELLS for e in EPS}
        print(grid_table(cells, f"\nhybrid computation, {NAMES[d]}", ELLS, EPS))


if __name__ == "__main__":
    main()
