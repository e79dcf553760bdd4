"""Analytic communication and computation costs, and measured-vs-model reports.

Costs follow the usual accounting for garbled circuits with free-XOR and
row reduction: ``3t`` bits and 3 hashes to garble every non-XOR gate, 3/4
of a hash on average to evaluate it, ``~2t`` online bits per oblivious
transfer, ``2T`` bits per Paillier ciphertext.
"""

import json
import math
from dataclasses import asdict, dataclass

from .circuit import build_full_gc, build_hybrid_gc, count_gates, hybrid_layout


@dataclass(frozen=True)
class CostModel:
    t: int = 80
    T: int = 1024
    tau: int = 80

    @property
    def gate_bits(self):
        return 3 * self.t

    @property
    def ot_online_bits(self):
        return 2 * self.t

    @property
    def ot_offline_bits(self):
        return 6 * self.t

    @property
    def ciphertext_bits(self):
        return 2 * self.T

    def he_to_gc_bits(self, ell):
        return 2 * self.T + 7 * ell * self.t

    def gc_to_he_bits(self, ell):
        return 2 * self.T + (ell + self.tau) * 5 * self.t

    hashes_garble = 3.0
    hashes_eval = 0.75


def horner_formula(d, lv, ly):
    """Non-XOR gates of the Horner stage in closed form."""
    return 3 * d * d * lv * lv - d * lv * lv + 2 * d * lv * ly - 0.5 * d * d * lv + 0.5 * d * lv


def tree_gates(n):
    return max(0, 2 * (n - 2))


def _gc_costs(nx, model):
    return {
        "non_xor": nx,
        "bytes": model.gate_bits * nx / 8,
        "hashes_garbler": model.hashes_garble * nx,
        "hashes_evaluator": model.hashes_eval * nx,
        "hashes_total": math.ceil((model.hashes_garble + model.hashes_eval) * nx),
    }


def model_full_gc(plan, model=CostModel()):
    """Online cost of the full-GC protocol (input secrets assumed available).

    ``plan`` may be an :class:`~pwstpc.encode.ApproxPlan`, whose circuit is
    built and counted, or a bare segment count ``N`` for a constant plan.
    """
    if isinstance(plan, int):
        out = _gc_costs(tree_gates(plan), model)
        out.update(degree=0, segments=plan, stages={"tree": tree_gates(plan)})
        return out
    c = build_full_gc(plan)
    stages = {k: count_gates(c, k).non_xor_count for k in c.stages}
    out = _gc_costs(count_gates(c).non_xor_count, model)
    w = plan.widths
    out.update(degree=plan.degree, segments=len(plan), stages=stages)
    if plan.degree:
        out["horner_formula"] = horner_formula(plan.degree, w.lv, plan.ly)
    return out


def hybrid_exponentiations(d):
    # Alice encrypts d powers, Bob unblinds them, Alice decrypts d-1,
    # encrypts d+1 values and Bob aggregates with 2d powers
    return d + d * (d - 1) // 2 + (d - 1) + (d + 1) + 2 * d


def hybrid_ciphertexts(d):
    """Ciphertexts on the wire: powers, blinded powers, final batch (plus delta+r for d=1)."""
    if d == 1:
        return 3
    return d + (d - 1) + (d + 1)


def model_hybrid(plan, model=CostModel()):
    """Online cost of the hybrid protocol for a plan of degree >= 1."""
    d, w = plan.degree, plan.widths
    if d < 1:
        raise ValueError("the hybrid protocol needs degree >= 1")
    n = len(plan)
    c = build_hybrid_gc(plan, model.tau)
    lay = hybrid_layout(plan, model.tau)
    nx = count_gates(c).non_xor_count
    floor_log = int(math.log2(d + 1))
    # gate budget as stated in the analysis: tree, subtractor, blinding adders
    nominal = (tree_gates(n) + w.lv + (w.lv + model.tau)
               + sum(w.lui[i] + i * w.lv + floor_log + model.tau for i in range(d + 1)))
    closed_hashes = 3 * (tree_gates(n) + plan.lx + sum((i + 1) * w.lv + model.tau for i in range(d + 1)))
    ncts = hybrid_ciphertexts(d)
    gc_bytes = model.gate_bits * nx / 8
    secret_bytes = model.t * lay.garbler_input_bits / 8
    ct_bytes = ncts * model.ciphertext_bits / 8
    return {
        "degree": d,
        "segments": n,
        "rounds": 2 if d == 1 else 4,
        "non_xor": nx,
        "non_xor_nominal": nominal,
        "stages": {k: count_gates(c, k).non_xor_count for k in c.stages},
        "gc_bytes": gc_bytes,
        "garbler_secret_bytes": secret_bytes,
        "ciphertexts": ncts,
        "ciphertext_bytes": ct_bytes,
        "bytes": gc_bytes + secret_bytes + ct_bytes,
        "hashes_garbler": model.hashes_garble * nx,
        "hashes_evaluator": model.hashes_eval * nx,
        "hashes_total": math.ceil((model.hashes_garble + model.hashes_eval) * nx),
        "hashes_garbler_formula": closed_hashes,
        "exponentiations": hybrid_exponentiations(d),
    }


def compare_measured(session, plan, model=CostModel()):
    """Line up a :class:`~pwstpc.protocol.SessionResult` with the model.

    Gate material must match exactly; OT traffic and framing are reported
    separately because the model charges idealized precomputed OT.
    """
    from .protocol import HEADER, TAG_NAMES, TAG_R2, TAG_R3, TAG_R4

    rows = []
    if session.protocol == "gc":
        m = model_full_gc(plan, model)
        rows.append(("gate material", session.material_bytes, m["bytes"]))
    else:
        m = model_hybrid(plan, model)
        rows.append(("gate material", session.material_bytes, m["gc_bytes"]))
        he_tags = {TAG_NAMES[t] for t in (TAG_R2, TAG_R3, TAG_R4)}
        he_frames = [(tag, n) for _, tag, n in session.log if TAG_NAMES.get(tag) in he_tags]
        ct = sum(n - HEADER for _, n in he_frames)
        rows.append(("ciphertexts", ct, m["ciphertext_bytes"]))
        rows.append(("rounds", session.rounds, m["rounds"]))
        rows.append(("exponentiations", session.exponentiations, m["exponentiations"]))
    if session.protocol == "gc":
        rows.append(("rounds", session.rounds, 1))
    frames = len(session.log)
    report = {
        "protocol": session.protocol,
        "rows": [{"item": k, "measured": a, "model": b, "delta": a - b} for k, a, b in rows],
        "ot_bytes": session.bytes_by_tag.get("ot", 0),
        "framing_bytes": frames * HEADER,
        "total_bytes": session.bytes_garbler_to_evaluator + session.bytes_evaluator_to_garbler,
        "garbler_to_evaluator": session.bytes_garbler_to_evaluator,
        "evaluator_to_garbler": session.bytes_evaluator_to_garbler,
        "by_tag": dict(session.bytes_by_tag),
    }
    return report


def format_comparison(report):
    lines = [f"{'item':<16}{'measured':>12}{'model':>12}{'delta':>10}"]
    for r in report["rows"]:
        lines.append(f"{r['item']:<16}{r['measured']:>12g}{r['model']:>12g}{r['delta']:>10g}")
    lines.append(f"OT bytes (not in model): {report['ot_bytes']}")
    lines.append(f"framing bytes: {report['framing_bytes']}")
    lines.append(f"total bytes: {report['total_bytes']} "
                 f"(B->A {report['garbler_to_evaluator']}, A->B {report['evaluator_to_garbler']})")
    return "\n".join(lines)


def plan_report(plan, model=CostModel()):
    """Everything the model says about one plan, as a JSON-able dict."""
    w = plan.widths
    out = {
        "model": asdict(model),
        "plan": {"degree": plan.degree, "lx": plan.lx, "ly": plan.ly, "eps": plan.tree.eps,
                 "segments": len(plan), "lv": w.lv, "lk": w.lk, "lp": w.lp},
        "full_gc": model_full_gc(plan, model),
    }
    if plan.degree >= 1:
        out["hybrid"] = model_hybrid(plan, model)
    return out


def format_plan_report(rep):
    p = rep["plan"]
    lines = [f"plan: d={p['degree']} lx={p['lx']} ly={p['ly']} eps={p['eps']} N={p['segments']} "
             f"lv={p['lv']} lk={p['lk']} lp={p['lp']}",
             f"model: t={rep['model']['t']} T={rep['model']['T']} tau={rep['model']['tau']}",
             "",
             "full GC"]
    f = rep["full_gc"]
    lines.append("  " + "  ".join(f"{k}={v}" for k, v in f["stages"].items()))
    lines.append(f"  non-XOR {f['non_xor']}  bytes {f['bytes']:g}  hashes {f['hashes_total']} "
                 f"(garbler {f['hashes_garbler']:g}, evaluator {f['hashes_evaluator']:g})")
    if "horner_formula" in f:
        lines.append(f"  horner closed form {f['horner_formula']:g} vs built {f['stages'].get('horner', 0)}")
    if "hybrid" in rep:
        h = rep["hybrid"]
        lines += ["", f"hybrid [{h['rounds']} rounds]",
                  "  " + "  ".join(f"{k}={v}" for k, v in h["stages"].items()),
                  f"  non-XOR {h['non_xor']} (nominal {h['non_xor_nominal']})  gate bytes {h['gc_bytes']:g}"
                  f"  secrets {h['garbler_secret_bytes']:g}  ciphertexts {h['ciphertexts']} "
                  f"({h['ciphertext_bytes']:g} B)",
                  f"  total {h['bytes']:g} B  {h['hashes_total']}H+{h['exponentiations']}E "
                  f"(closed-form garbler hashes {h['hashes_garbler_formula']})"]
    return "\n".join(lines)


def grid_table(cells, title, rows, cols, fmt="{}"):
    """Aligned ``rows x cols`` table; ``cells[(row, col)]`` may be missing."""
    corner = "l \\ eps"
    lines = [title, f"{corner:>8} " + "".join(f"{c:>10}" for c in cols)]
    for r in rows:
        vals = "".join(f"{fmt.format(cells[r, c]) if (r, c) in cells else '':>10}" for c in cols)
        lines.append(f"{r:>8} " + vals)
    return "\n".join(lines)


def to_json(obj):
    return json.dumps(obj, indent=1, sort_keys=True, default=str)
