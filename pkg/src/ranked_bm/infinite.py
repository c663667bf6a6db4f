"""Stationary candidate of infinite systems as a limit of finite-N rates.

For a fixed rank ``k`` the finite-N rates ``lambda_k^{(N)}`` are
nondecreasing in ``N``; their limits define the candidate product law
``pi``.  This module builds that ladder, computes the limit in closed form
for symmetric systems with constant diffusion, and decides whether ``pi``
charges the admissible state space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    LadderNotMonotoneError, NoCesaroLimitError, NotSkewSymmetricError,
    NotSymmetricError, NotTightError, UnsupportedTailError,
)
from .model import SystemSpec
from .reflection import build_reflection_data, stationary_rates, tightness_check
from .sequences import (
    Constant, SeqRule, gaussian_series_converges, partial_sum_growth, series_converges,
)

__all__ = [
    "LambdaLadder", "PiAdmissibility", "assumption1_scan", "build_lambda_ladder",
    "lambda_limit_symmetric", "check_pi_admissible",
    "MONOTONE_TOL", "CONVERGED_RTOL", "LIMIT_RTOL",
]

MONOTONE_TOL = 1e-10
CONVERGED_RTOL = 1e-6
LIMIT_RTOL = 1e-4

SATISFIED = "SATISFIED"
NOT_SATISFIED = "NOT_SATISFIED"
UNDECIDED = "UNDECIDED"


def assumption1_scan(spec: SystemSpec, Ns: Sequence[int]) -> list[int]:
    """The sizes in ``Ns`` whose N-particle truncation has tight gaps."""
    return [N for N in Ns if tightness_check(build_reflection_data(spec, N)).tight]


def _rel_close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


@dataclass(frozen=True)
class LambdaLadder:
    """Rates ``table[j, k-1] = lambda_k^{(Ns[j])}`` (NaN where ``k >= Ns[j]``).

    ``limit[k-1]`` is the Richardson extrapolation in ``1/N`` of the last two
    entries of column ``k`` (never below the last entry).  It is exact when
    the drift is eventually constant.  ``converged`` flags columns whose
    extrapolation is stable over the last three grid sizes and
    ``still_increasing`` flags columns whose last two raw entries still differ.
    """

    Ns: tuple
    table: np.ndarray
    limit: np.ndarray
    converged: np.ndarray
    still_increasing: np.ndarray

    def column(self, k: int) -> np.ndarray:
        col = self.table[:, k - 1]
        return col[~np.isnan(col)]

    def rows(self):
        """``(N, k, lambda)`` triples in N-major order."""
        for j, N in enumerate(self.Ns):
            for k in range(1, N):
                yield N, k, float(self.table[j, k - 1])

    def to_dict(self) -> dict:
        return {
            "Ns": list(self.Ns),
            "table": [[None if math.isnan(v) else float(v) for v in row] for row in self.table],
            "limit": self.limit.tolist(),
            "converged": self.converged.tolist(),
            "still_increasing": self.still_increasing.tolist(),
        }


def build_lambda_ladder(spec: SystemSpec, Ns: Sequence[int]) -> LambdaLadder:
    Ns = tuple(int(n) for n in Ns)
    if len(Ns) < 2 or any(b <= a for a, b in zip(Ns, Ns[1:])) or Ns[0] < 2:
        raise ValueError("Ns must be strictly increasing sizes >= 2, at least two of them")
    width = Ns[-1] - 1
    table = np.full((len(Ns), width), np.nan)
    for j, N in enumerate(Ns):
        law = stationary_rates(spec, N)
        if not law.skew_symmetric:
            raise NotSkewSymmetricError(f"N = {N} violates skew-symmetry")
        if not law.tight:
            raise NotTightError(f"N = {N} is not tight")
        table[j, : N - 1] = law.rates

    limit = np.empty(width)
    converged = np.zeros(width, dtype=bool)
    still = np.zeros(width, dtype=bool)
    for k in range(1, width + 1):
        rows = [j for j, N in enumerate(Ns) if k < N]
        col = table[rows, k - 1]
        sizes = np.array([Ns[j] for j in rows], dtype=float)
        drops = col[:-1] - col[1:]
        if np.any(drops > MONOTONE_TOL * np.maximum(1.0, np.abs(col[:-1]))):
            bad = int(np.argmax(drops))
            raise LadderNotMonotoneError(
                f"lambda_{k} drops from {col[bad]:.17g} (N={int(sizes[bad])}) "
                f"to {col[bad + 1]:.17g} (N={int(sizes[bad + 1])})")
        if len(col) == 1:
            limit[k - 1] = col[0]
            still[k - 1] = True
            continue
        ext = (sizes[1:] * col[1:] - sizes[:-1] * col[:-1]) / (sizes[1:] - sizes[:-1])
        limit[k - 1] = max(ext[-1], col[-1])
        still[k - 1] = not _rel_close(col[-1], col[-2], CONVERGED_RTOL)
        converged[k - 1] = (not still[k - 1]) or (
            len(ext) >= 2 and _rel_close(ext[-1], ext[-2], CONVERGED_RTOL))
    return LambdaLadder(Ns, table, limit, converged, still)


def _constant_head(seq: SeqRule) -> float | None:
    if not isinstance(seq.tail, Constant):
        return None
    c = seq.tail.value
    return c if all(v == c for v in seq.prefix) else None


def lambda_limit_symmetric(spec: SystemSpec, ladder: LambdaLadder | None = None) -> SeqRule:
    """Limit rates ``lambda_k = (2k / sigma^2) (mean(g_1..g_k) - lim mean(g_1..g_N))``.

    Needs symmetric collisions, a constant diffusion and an eventually
    constant drift.  When ``ladder`` is given its converged columns must
    agree with the closed form to ``LIMIT_RTOL``.
    """
    if not spec.symmetric:
        raise NotSymmetricError("closed-form limit rates need symmetric collisions")
    if not spec.infinite:
        raise ValueError("closed-form limit rates are for infinite systems")
    s2 = _constant_head(spec.diffusions)
    if s2 is None:
        raise UnsupportedTailError("closed-form limit rates need a constant diffusion")
    tail = spec.drifts.tail
    if not isinstance(tail, Constant):
        g = tail.growth()
        if g.limit in (math.inf, -math.inf):
            raise NoCesaroLimitError("drift averages diverge, no Cesaro limit")
        raise UnsupportedTailError("Cesaro limit known in closed form only for constant drift tails")
    c = float(tail.value)
    # lambda_k = (2/sigma^2) sum_{i<=k} (g_i - c); constant beyond the drift prefix
    excess = np.cumsum(np.asarray(spec.drifts.prefix, dtype=float) - c)
    prefix = tuple(float(v) for v in 2.0 / s2 * excess)
    top = prefix[-1] if prefix else 0.0
    rule = SeqRule(prefix, Constant(top))
    if ladder is not None:
        for k in np.flatnonzero(ladder.converged) + 1:
            want = rule.value(int(k))
            got = ladder.limit[k - 1]
            if not _rel_close(got, want, LIMIT_RTOL):
                raise AssertionError(
                    f"ladder limit {got:.10g} disagrees with closed form {want:.10g} at k = {k}")
    return rule


@dataclass(frozen=True)
class PiAdmissibility:
    sup_lambda_finite: bool
    sum_inv_sq_finite: bool
    La_condition: bool | None
    verdict: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_pi_admissible(rates: SeqRule) -> PiAdmissibility:
    """Whether the gaps drawn from ``pi = prod Exp(rates)`` are a.s. admissible.

    Bounded rates always suffice.  Otherwise, when ``sum rates^-2 < inf``,
    admissibility holds iff ``sum exp(-a Lambda_n^2) < inf`` for all ``a > 0``
    with ``Lambda_n = sum_{k<=n} 1/rates_k``.  Decided from the tail rule.
    """
    if not rates.is_infinite:
        raise UnsupportedTailError("admissibility needs an infinite rate sequence")
    if not rates.all_positive():
        raise ValueError("rates must be positive")
    sup_finite = rates.sup() < math.inf
    growth = rates.growth()
    if growth.kind != "power" or growth.limit == 0:
        raise ValueError("rates must not vanish in the tail")
    if growth.limit == math.inf:
        inv = growth.reciprocal()
        sum_inv_sq = series_converges(inv.square())
    else:
        inv = None
        sum_inv_sq = False
    if sup_finite:
        return PiAdmissibility(True, sum_inv_sq, None, SATISFIED)
    if not sum_inv_sq:
        return PiAdmissibility(False, False, None, UNDECIDED)
    la = gaussian_series_converges(partial_sum_growth(inv))
    return PiAdmissibility(False, True, la, SATISFIED if la else NOT_SATISFIED)
