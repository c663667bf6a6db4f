"""Random system-spec generators shared by the unit and acceptance tests."""
import numpy as np

from ranked_bm.model import SystemSpec
from ranked_bm.sequences import SeqRule


def random_symmetric_spec(rng, n_max=50, g_range=2.0):
    N = int(rng.integers(2, n_max + 1))
    g = rng.uniform(-g_range, g_range, N)
    s2 = rng.uniform(0.5, 2.0, N)
    return SystemSpec(N, SeqRule.finite(g), SeqRule.finite(s2))


def random_chain_spec(rng, n_max=30):
    """Asymmetric spec satisfying ``q+_{k+1} + q-_k = 1``; about half of the
    draws are skew-symmetric by construction."""
    N = int(rng.integers(2, n_max + 1))
    g = rng.uniform(-2, 2, N)
    kind = int(rng.integers(4))
    if kind == 0:
        # constant sigma^2 with q+ = p, q- = 1 - p
        p = rng.uniform(0.05, 0.95)
        s2 = np.full(N, rng.uniform(0.5, 2.0))
        qp, qm = np.full(N, p), np.full(N, 1 - p)
    elif kind == 1:
        # symmetric with linear sigma^2
        s2 = rng.uniform(0.5, 2.0) + rng.uniform(0.0, 0.5) * np.arange(N)
        qp = qm = np.full(N, 0.5)
    else:
        s2 = rng.uniform(0.5, 2.0, N)
        qm = rng.uniform(0.05, 0.95, N)
        qp = np.empty(N)
        qp[0] = rng.uniform(0.05, 0.95)
        qp[1:] = 1 - qm[:-1]
    return SystemSpec(N, SeqRule.finite(g), SeqRule.finite(s2),
                      SeqRule.finite(qp), SeqRule.finite(qm))
