"""Private evaluation of piecewise-polynomial approximations of univariate functions.

Pipeline: :mod:`quantize` a function onto integer grids, :mod:`partition`
the input domain by bisection, :mod:`encode` the coefficients as integers,
build the boolean :mod:`circuit`, then run it between two parties with the
pure garbled-circuit protocol or the garbled-circuit + Paillier hybrid
(:mod:`protocol`). :mod:`account` predicts the costs.
"""

from .quantize import CodomainViolation, FunctionSpec, QuantizedTable, descale_output, quantize_function, sinc_spec
from .partition import PartitionTree, Segment, bisect
from .encode import ApproxPlan, BitWidthPlan, build_plan, compute_bitwidths, quantize_coeffs, reference_eval
from .circuit import Circuit, build_full_gc, build_hybrid_gc, count_gates, plaintext_eval
from .protocol import run_full_gc, run_hybrid

__version__ = "0.1.0"
