"""Infinite M-Atlas model through its finite truncations.

For each truncation size N the finite system has stationary rates
lambda_k^(N).  Along every column k these increase with N, and the limit
is the rate sequence of the infinite system.  The ladder below shows the
approach, the extrapolated limit and the closed-form limit rule.

    python demos/m_atlas_ladder.py
"""
import numpy as np

from ranked_bm import SystemSpec
from ranked_bm.infinite import build_lambda_ladder, check_pi_admissible, lambda_limit_symmetric

Ns = (4, 8, 16, 32, 64, 128)
for M in (1, 2, 3):
    spec = SystemSpec.m_atlas(M)
    lad = build_lambda_ladder(spec, Ns)
    rule = lambda_limit_symmetric(spec, lad)
    print(f"M = {M}")
    print("   N   " + "  ".join(f"lam_{k}" for k in range(1, 6)))
    for j, N in enumerate(Ns):
        row = lad.table[j, :5]
        print(f" {N:4d}  " + "  ".join("  -  " if np.isnan(v) else f"{v:.3f}" for v in row))
    print(" limit " + "  ".join(f"{lad.limit[k]:.3f}" for k in range(5)))
    print(" rule  " + "  ".join(f"{rule.value(k):.3f}" for k in range(1, 6)))
    print(" product law:", check_pi_admissible(rule).verdict)
    print()
