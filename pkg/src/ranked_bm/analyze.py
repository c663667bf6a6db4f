"""Statistics on simulated gaps: stationarity, dominance, pathwise
comparisons, collision diagnostics and Gaussian maximal tail bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import special, stats

from .errors import (
    HypothesisViolatedError, InsufficientSamplesError, MismatchedShapesError,
)
from .model import SystemSpec
from .reflection import STRUCT_TOL, StationaryLaw
from .sequences import Constant, Log, Power, SeqRule
from .simulate import GapTrajectory

__all__ = [
    "GapStats", "DominanceReport", "CouplingReport", "CollisionConditionReport",
    "CollisionReport", "TailBoundResult", "PsiSeriesResult", "INEQUALITIES",
    "psi", "default_strides", "gap_samples", "gap_stats_from_samples",
    "empirical_gap_stats", "ks_exponential", "dominance_check", "orthant_check",
    "comparison_report", "collision_condition_check", "near_collision_stats",
    "tail_bound_check", "tail_bound_check_two_sided", "psi_series_bound",
    "MIN_SAMPLES",
]

MIN_SAMPLES = 100


def psi(u):
    """Standard normal upper tail ``P(N(0,1) > u)``."""
    return 0.5 * special.erfc(np.asarray(u, dtype=float) / math.sqrt(2.0))


# stationarity

@dataclass
class GapStats:
    """Per-gap summaries; row ``k`` of ``grid``/``ecdf`` belongs to gap ``k + 1``."""

    count: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    grid: np.ndarray
    ecdf: np.ndarray
    ks: np.ndarray
    stride: np.ndarray
    rates: np.ndarray

    @property
    def relative_mean_error(self) -> np.ndarray:
        return self.mean * self.rates - 1.0

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items()}


def _rates(law) -> np.ndarray:
    if isinstance(law, StationaryLaw):
        if law.rates is None:
            raise ValueError(f"law has no rates ({law.status})")
        return np.asarray(law.rates, dtype=float)
    return np.asarray(law, dtype=float)


def default_strides(rates, dt: float) -> np.ndarray:
    """Decorrelation stride in steps: a tenth of the mean gap's time scale."""
    rates = np.asarray(rates, dtype=float)
    with np.errstate(divide="ignore"):
        raw = np.where(np.isinf(rates), 1.0, np.round(1.0 / (rates * dt) / 10.0))
    return np.maximum(1, raw).astype(int)


def gap_samples(traj: GapTrajectory, rates, stride=None) -> list[np.ndarray]:
    """Post-burn-in gap samples, gap ``k`` thinned every ``stride[k]`` steps.

    The samples are copies, so they do not keep the trajectory alive."""
    rates = np.asarray(rates, dtype=float)
    d = traj.Z.shape[1]
    if rates.shape[0] != d:
        raise MismatchedShapesError(f"{rates.shape[0]} rates for {d} gaps")
    steps = default_strides(rates, traj.dt) if stride is None else np.broadcast_to(
        np.asarray(stride, dtype=int), (d,))
    Z = traj.Z[traj.post_burn_in()]
    out = []
    for k in range(d):
        every = max(1, int(round(steps[k] / traj.output_stride)))
        out.append(Z[::every, k].copy())
    return out


def ks_exponential(x, rate: float) -> float:
    """Kolmogorov-Smirnov distance between samples and ``Exp(rate)``."""
    x = np.asarray(x, dtype=float)
    if math.isinf(rate):
        return float(np.mean(x > 0))
    return float(stats.kstest(x, "expon", args=(0.0, 1.0 / rate)).statistic)


def gap_stats_from_samples(samples: Sequence[np.ndarray], rates, stride=None,
                           grid_points: int = 51) -> GapStats:
    rates = np.asarray(rates, dtype=float)
    d = len(samples)
    count = np.array([len(s) for s in samples])
    if np.any(count < MIN_SAMPLES):
        raise InsufficientSamplesError(
            f"need at least {MIN_SAMPLES} samples per gap, got {int(count.min())}")
    q = np.linspace(0.0, 5.0, grid_points)
    with np.errstate(divide="ignore"):
        scale = np.where(np.isinf(rates), 0.0, 1.0 / rates)
    grid = scale[:, None] * q[None, :]
    ecdf = np.empty((d, grid_points))
    for k, s in enumerate(samples):
        srt = np.sort(s)
        ecdf[k] = np.searchsorted(srt, grid[k], side="right") / len(srt)
    return GapStats(
        count=count,
        mean=np.array([s.mean() for s in samples]),
        var=np.array([s.var() for s in samples]),
        grid=grid,
        ecdf=ecdf,
        ks=np.array([ks_exponential(s, r) for s, r in zip(samples, rates)]),
        stride=np.zeros(d, dtype=int) if stride is None else np.broadcast_to(stride, (d,)).copy(),
        rates=rates,
    )


def empirical_gap_stats(traj, law, stride=None) -> GapStats:
    """Compare post-burn-in gaps with ``Exp(lambda_k)``.

    ``traj`` may be one trajectory or a sequence of replicas, whose thinned
    samples are pooled in order.  ``stride`` defaults to
    ``max(1, round(1 / (lambda_k dt) / 10))`` steps.
    """
    rates = _rates(law)
    trajs = [traj] if isinstance(traj, GapTrajectory) else list(traj)
    per = [gap_samples(t, rates, stride) for t in trajs]
    pooled = [np.concatenate([p[k] for p in per]) for k in range(len(rates))]
    steps = default_strides(rates, trajs[0].dt) if stride is None else stride
    return gap_stats_from_samples(pooled, rates, steps)


# stochastic dominance

@dataclass
class DominanceReport:
    """``A`` below ``B`` per coordinate: ``F_A(y) >= F_B(y) - eps`` on the grid."""

    holds: np.ndarray
    worst_margin: np.ndarray
    eps: float
    grid: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.holds))

    def to_dict(self) -> dict:
        return {"holds": self.holds.tolist(), "worst_margin": self.worst_margin.tolist(),
                "eps": self.eps, "grid": self.grid.tolist(), "passed": self.passed}


def _dkw_eps(n_a: int, n_b: int, confidence: float) -> float:
    # each ECDF inside its DKW band with probability (1 + confidence) / 2
    alpha = (1.0 - confidence) / 2.0
    c = math.log(2.0 / alpha) / 2.0
    return math.sqrt(c / n_a) + math.sqrt(c / n_b)


def _as_columns(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def dominance_check(samples_a, samples_b, grid=None, confidence: float = 0.99,
                    grid_points: int = 64) -> DominanceReport:
    """Marginal stochastic order ``A <= B`` for each column of the samples.

    A marginal surrogate for the multivariate upper-orthant order: it is
    necessary for the joint order but does not imply it.
    """
    a, b = _as_columns(samples_a), _as_columns(samples_b)
    if a.shape[1] != b.shape[1]:
        raise MismatchedShapesError("sample sets cover different coordinates")
    d = a.shape[1]
    eps = _dkw_eps(a.shape[0], b.shape[0], confidence)
    if grid is None:
        pooled = np.concatenate((a, b))
        grid = np.quantile(pooled, np.linspace(0.0, 1.0, grid_points), axis=0).T
    else:
        grid = np.asarray(grid, dtype=float)
        if grid.ndim == 1:
            grid = np.tile(grid, (d, 1))
    holds = np.empty(d, dtype=bool)
    worst = np.empty(d)
    for k in range(d):
        fa = np.searchsorted(np.sort(a[:, k]), grid[k], side="right") / a.shape[0]
        fb = np.searchsorted(np.sort(b[:, k]), grid[k], side="right") / b.shape[0]
        margin = fa - fb
        worst[k] = margin.min()
        holds[k] = worst[k] >= -eps
    return DominanceReport(holds, worst, eps, np.asarray(grid))


def orthant_check(pairs_a, pairs_b, grid, confidence: float = 0.99) -> tuple[bool, float, float]:
    """Joint upper-orthant check on two coordinates:
    ``P(A1 >= y1, A2 >= y2) <= P(B1 >= y1, B2 >= y2) + eps`` over ``grid x grid``.

    Returns ``(holds, worst_excess, eps)``.
    """
    a, b = np.asarray(pairs_a, dtype=float), np.asarray(pairs_b, dtype=float)
    if a.shape[1] != 2 or b.shape[1] != 2:
        raise MismatchedShapesError("orthant check works on coordinate pairs")
    # DKW-type band for the two-dimensional survival function is not sharp;
    # the one-dimensional constant is used as a diagnostic tolerance.
    eps = _dkw_eps(a.shape[0], b.shape[0], confidence)
    grid = np.asarray(grid, dtype=float)
    worst = -math.inf
    for y1 in grid:
        sa = a[:, 0] >= y1
        sb = b[:, 0] >= y1
        for y2 in grid:
            excess = np.mean(sa & (a[:, 1] >= y2)) - np.mean(sb & (b[:, 1] >= y2))
            worst = max(worst, float(excess))
    return worst <= eps, worst, eps


# pathwise comparison

INEQUALITIES = (
    "positions_le",              # Y^a_k(t) <= Y^b_k(t)
    "gaps_le",                   # Z^a_k(t) <= Z^b_k(t)
    "gaps_ge",                   # Z^a_k(t) >= Z^b_k(t)
    "local_time_increments_ge",  # L^a_k(t) - L^a_k(s) >= L^b_k(t) - L^b_k(s)
    "local_time_increments_le",  # L^a_k(t) - L^a_k(s) <= L^b_k(t) - L^b_k(s)
)


@dataclass
class CouplingReport:
    inequality: str
    violation_fraction: np.ndarray
    within_slack_fraction: np.ndarray
    max_violation: np.ndarray
    slack: float
    checks: int

    def passed(self, threshold: float = 0.01) -> bool:
        return bool(np.all(self.violation_fraction < threshold))

    def to_dict(self) -> dict:
        return {
            "inequality": self.inequality,
            "violation_fraction": self.violation_fraction.tolist(),
            "within_slack_fraction": self.within_slack_fraction.tolist(),
            "max_violation": self.max_violation.tolist(),
            "slack": self.slack,
            "checks": self.checks,
        }


def _dyadic_increments(L: np.ndarray) -> np.ndarray:
    """Increments over non-overlapping windows of 1, 2, 4, ... stored steps."""
    n = L.shape[0]
    parts = []
    w = 1
    while w < n:
        idx = np.arange(0, n - w, w)
        parts.append(L[idx + w] - L[idx])
        w *= 2
    return np.concatenate(parts) if parts else np.empty((0, L.shape[1]))


def comparison_report(pair: tuple[GapTrajectory, GapTrajectory], inequality: str,
                      slack: float | None = None) -> CouplingReport:
    """Fraction of stored times (or local-time windows) at which trajectory
    ``a`` violates the chosen ordering against ``b`` by more than ``slack``.

    Coordinates are the ranks (or gaps) common to both systems.  ``slack``
    defaults to ``3 * max(sigma) * sqrt(dt)``.
    """
    a, b = pair
    if inequality not in INEQUALITIES:
        raise ValueError(f"unknown inequality {inequality!r}; choose from {INEQUALITIES}")
    if a.times.shape != b.times.shape or a.dt != b.dt or not np.array_equal(a.times, b.times):
        raise MismatchedShapesError("trajectories are not on the same time grid")
    if slack is None:
        slack = 3.0 * max(a.sigma_max, b.sigma_max) * math.sqrt(a.dt)
    if inequality == "positions_le":
        n = min(a.N, b.N)
        lhs, rhs = a.positions()[:, :n], b.positions()[:, :n]
    else:
        d = min(a.N, b.N) - 1
        if inequality.startswith("gaps"):
            lhs, rhs = a.Z[:, :d], b.Z[:, :d]
        else:
            lhs, rhs = _dyadic_increments(a.L[:, :d]), _dyadic_increments(b.L[:, :d])
        if inequality.endswith("_ge"):
            lhs, rhs = rhs, lhs
    excess = lhs - rhs
    beyond = excess > slack
    return CouplingReport(
        inequality=inequality,
        violation_fraction=beyond.mean(axis=0),
        within_slack_fraction=((excess > 0) & ~beyond).mean(axis=0),
        max_violation=np.maximum(excess.max(axis=0), 0.0),
        slack=float(slack),
        checks=int(excess.shape[0]),
    )


# collisions

@dataclass
class CollisionConditionReport:
    """Verdict per interior rank ``k = 2 .. K-1`` of
    ``(q-_{k-1} + q+_{k+1}) s_k >= q-_k s_{k+1} + q+_k s_{k-1}``."""

    ranks: list
    lhs: list
    rhs: list
    holds: list

    @property
    def passed(self) -> bool:
        return all(self.holds)

    def to_dict(self) -> dict:
        return {"ranks": self.ranks, "lhs": [float(v) for v in self.lhs],
                "rhs": [float(v) for v in self.rhs], "holds": self.holds,
                "passed": self.passed}


def collision_condition_check(spec: SystemSpec, K: int) -> CollisionConditionReport:
    """Condition excluding triple collisions among the bottom ``K`` ranks.

    Exact for rational inputs.  For symmetric collisions the verdicts are
    cross-checked against midpoint concavity of the diffusion sequence.
    """
    if K < 3:
        raise ValueError("need K >= 3")
    s = spec.sigma2(K)
    qp, qm = spec.qp(K), spec.qm(K)
    exact = all(isinstance(v, (int, Fraction)) for v in (*s, *qp, *qm))
    tol = 0 if exact else STRUCT_TOL
    ranks, lhs, rhs, holds = [], [], [], []
    for k in range(2, K):
        left = (qm[k - 2] + qp[k]) * s[k - 1]
        right = qm[k - 1] * s[k] + qp[k - 1] * s[k - 2]
        ranks.append(k)
        lhs.append(left)
        rhs.append(right)
        holds.append(bool(left >= right - tol))
    if spec.symmetric:
        concave = [bool(2 * s[k - 1] >= s[k] + s[k - 2] - 2 * tol) for k in range(2, K)]
        if concave != holds:
            raise AssertionError("symmetric collision condition disagrees with concavity")
    return CollisionConditionReport(ranks, lhs, rhs, holds)


@dataclass
class CollisionReport:
    """``counts[i, j]``: stored steps with both gaps around rank ``ranks[i]``
    below ``deltas[j]``."""

    ranks: list
    deltas: np.ndarray
    counts: np.ndarray
    steps: int
    dt: float

    def to_dict(self) -> dict:
        return {"ranks": self.ranks, "deltas": self.deltas.tolist(),
                "counts": self.counts.tolist(), "steps": self.steps, "dt": self.dt}


def near_collision_stats(traj: GapTrajectory, deltas) -> CollisionReport:
    deltas = np.sort(np.asarray(deltas, dtype=float))
    Z = traj.Z[1:]
    ranks = list(range(2, traj.N))
    counts = np.zeros((len(ranks), len(deltas)), dtype=np.int64)
    for i, k in enumerate(ranks):
        both = np.maximum(Z[:, k - 2], Z[:, k - 1])
        srt = np.sort(both)
        counts[i] = np.searchsorted(srt, deltas, side="left")
    return CollisionReport(ranks, deltas, counts, int(Z.shape[0]), traj.dt)


# Gaussian maximal bounds

@dataclass
class TailBoundResult:
    p_hat: float
    se: float
    bound: float
    n_paths: int

    @property
    def passed(self) -> bool:
        return self.p_hat <= self.bound + 3.0 * self.se

    def to_dict(self) -> dict:
        return {**self.__dict__, "passed": self.passed}


def _euler_paths(v0, gbar, sigbar, T, n_paths, n_steps, rng):
    dt = T / n_steps
    incr = gbar * dt + sigbar * math.sqrt(dt) * rng.standard_normal((n_paths, n_steps))
    return v0 + np.cumsum(incr, axis=1)


def _result(hit: np.ndarray, bound: float) -> TailBoundResult:
    n = hit.size
    p = float(hit.mean())
    return TailBoundResult(p, math.sqrt(p * (1.0 - p) / n), float(bound), n)


def tail_bound_check(v0: float, gbar: float, sigbar: float, x: float, T: float,
                     n_paths: int = 10_000, n_steps: int = 256,
                     rng: np.random.Generator | None = None) -> TailBoundResult:
    """Monte Carlo ``P(min_{t<=T} V_t <= x)`` for ``V = v0 + gbar t + sigbar W``,
    the extreme process allowed by drift ``>= gbar`` and diffusion ``<= sigbar``,
    against ``2 Psi((v0 - x - (gbar T)^-) / (sigbar sqrt(T)))``.
    """
    if x > v0 + gbar * T:
        raise HypothesisViolatedError("the bound needs x <= v0 + gbar * T")
    rng = rng if rng is not None else np.random.default_rng(0)
    neg = max(-gbar * T, 0.0)
    bound = 2.0 * float(psi((v0 - x - neg) / (sigbar * math.sqrt(T))))
    paths = _euler_paths(v0, gbar, sigbar, T, n_paths, n_steps, rng)
    hit = (np.minimum(paths.min(axis=1), v0) <= x)
    return _result(hit, bound)


def tail_bound_check_two_sided(v0: float, gbar: float, sigbar: float, x: float, T: float,
                               n_paths: int = 10_000, n_steps: int = 256,
                               rng: np.random.Generator | None = None) -> TailBoundResult:
    """Monte Carlo ``P(max_{t<=T} |V_t| >= x)`` with ``|drift| <= gbar``
    against ``4 Psi((x - |v0| - gbar T) / (sigbar sqrt(T)))``."""
    if x < abs(v0) + gbar * T:
        raise HypothesisViolatedError("the bound needs x >= |v0| + gbar * T")
    rng = rng if rng is not None else np.random.default_rng(0)
    bound = 4.0 * float(psi((x - abs(v0) - gbar * T) / (sigbar * math.sqrt(T))))
    drift = gbar if v0 >= 0 else -gbar
    paths = _euler_paths(v0, drift, sigbar, T, n_paths, n_steps, rng)
    hit = np.maximum(np.abs(paths).max(axis=1), abs(v0)) >= x
    return _result(hit, bound)


@dataclass
class PsiSeriesResult:
    converges: bool
    reason: str
    partial_sums: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def psi_series_bound(y: SeqRule, v: float, beta: float,
                     checkpoints=(100, 1000, 10_000)) -> PsiSeriesResult:
    """Whether ``sum_n Psi((y_n + v) / beta)`` converges, decided from the tail.

    ``Psi(u) ~ exp(-u^2 / 2) / (u sqrt(2 pi))``.  Power tails always give a
    convergent series.  For ``y_n = a + c log(n)^q`` the series converges when
    ``q > 1/2``, diverges when ``q < 1/2``, and at ``q = 1/2`` converges iff
    ``c^2 > 2 beta^2``, or ``c^2 = 2 beta^2`` and ``a + v > 0``.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    idx = np.arange(1, max(checkpoints) + 1)
    terms = psi((y.array(len(idx)) + v) / beta)
    csum = np.cumsum(terms)
    partial = {int(n): float(csum[n - 1]) for n in checkpoints}
    tail = y.tail
    if tail is None or tail.limit != math.inf:
        return PsiSeriesResult(False, "terms do not vanish: y_n does not diverge", partial)
    if isinstance(tail, Power):
        return PsiSeriesResult(True, "power growth", partial)
    if isinstance(tail, Log):
        c, q = tail.b, tail.p
        if q > 0.5:
            return PsiSeriesResult(True, "log^q growth with q > 1/2", partial)
        if q < 0.5:
            return PsiSeriesResult(False, "log^q growth with q < 1/2", partial)
        ratio = c * c / (2.0 * beta * beta)
        if abs(ratio - 1) <= STRUCT_TOL:
            ok = tail.a + v > 0
            return PsiSeriesResult(ok, "sqrt-log growth at the boundary, decided by the offset", partial)
        if ratio > 1:
            return PsiSeriesResult(True, "sqrt-log growth, terms below n^-r with r > 1", partial)
        return PsiSeriesResult(False, "sqrt-log growth, terms above n^-r with r < 1", partial)
    assert isinstance(tail, Constant)
    return PsiSeriesResult(False, "bounded tail", partial)
