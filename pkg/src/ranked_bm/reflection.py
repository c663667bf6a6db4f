"""Reflection data of the gap process and finite-N stationary rates.

The gaps ``Z_k = Y_{k+1} - Y_k`` of an N-particle system form a reflected
Brownian motion in the orthant with tridiagonal reflection matrix ``R``,
drift ``mu`` and covariance ``A``.  When ``R^{-1} mu < 0`` and the
skew-symmetry identity holds, its stationary law is a product of
exponentials with rates ``lambda_k = 2 (-R^{-1} mu)_k / (sigma_k^2 + sigma_{k+1}^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NotSymmetricError, SingularError
from .model import SystemSpec

__all__ = [
    "ReflectionData", "StationaryLaw", "TightnessResult", "solve_tridiagonal",
    "build_reflection_data", "tightness_check", "closed_form_neg_Rinv_mu_symmetric",
    "skew_symmetry_residuals", "skew_symmetry_check", "stationary_rates",
    "STRUCT_TOL", "AGREE_RTOL", "DEAD_BAND",
]

STRUCT_TOL = 1e-12   # absolute, structural identities
AGREE_RTOL = 1e-10   # relative, cross-formula agreement
DEAD_BAND = 1e-14    # |(R^-1 mu)_k| below this is indeterminate


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Thomas algorithm for a tridiagonal system without pivoting.

    ``lower[i]`` multiplies ``x[i]`` in row ``i + 1``; ``upper[i]`` multiplies
    ``x[i + 1]`` in row ``i``.  Stable for matrices that are diagonally
    dominant by rows or by columns, which covers every reflection matrix
    built here (its columns sum to exactly zero off the end columns).
    """
    b = np.asarray(diag, dtype=float)
    a = np.asarray(lower, dtype=float)
    c = np.asarray(upper, dtype=float)
    d = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    if a.shape[0] != n - 1 or c.shape[0] != n - 1 or d.shape[0] != n:
        raise ValueError("band lengths do not match the system size")
    cp = np.empty(max(n - 1, 0))
    dp = np.empty(n)
    piv = b[0]
    if piv == 0 or not np.isfinite(piv):
        raise SingularError("zero pivot in tridiagonal solve")
    if n > 1:
        cp[0] = c[0] / piv
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i - 1] * cp[i - 1]
        if piv == 0 or not np.isfinite(piv):
            raise SingularError(f"zero pivot at row {i} in tridiagonal solve")
        if i < n - 1:
            cp[i] = c[i] / piv
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / piv
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@dataclass(frozen=True)
class ReflectionData:
    """``R``, ``mu`` and ``A`` of the (N-1)-dimensional gap process."""

    N: int
    R: np.ndarray
    mu: np.ndarray
    A: np.ndarray

    @property
    def R_lower(self) -> np.ndarray:
        """``R[k+1, k] = -q^+_{k+2}`` (0-based ``k``)."""
        return np.diag(self.R, -1).copy()

    @property
    def R_upper(self) -> np.ndarray:
        """``R[k, k+1] = -q^-_{k+2}`` (0-based ``k``)."""
        return np.diag(self.R, 1).copy()

    def to_dict(self) -> dict:
        return {"N": self.N, "R": self.R.tolist(), "mu": self.mu.tolist(), "A": self.A.tolist()}


def build_reflection_data(spec: SystemSpec, N: int) -> ReflectionData:
    if N < 2:
        raise ValueError("need N >= 2 particles")
    g = np.asarray(spec.g(N), dtype=float)
    s2 = np.asarray(spec.sigma2(N), dtype=float)
    qp = np.asarray(spec.qp(N), dtype=float)
    qm = np.asarray(spec.qm(N), dtype=float)
    d = N - 1
    R = np.eye(d)
    idx = np.arange(d - 1)
    R[idx, idx + 1] = -qm[1:d]
    R[idx + 1, idx] = -qp[1:d]
    mu = np.diff(g)
    A = np.zeros((d, d))
    A[np.arange(d), np.arange(d)] = s2[:-1] + s2[1:]
    A[idx, idx + 1] = -s2[1:d]
    A[idx + 1, idx] = -s2[1:d]
    return ReflectionData(N, R, mu, A)


class TightnessResult(NamedTuple):
    tight: bool
    neg_Rinv_mu: np.ndarray

    @property
    def indeterminate(self) -> bool:
        """Some component of ``R^{-1} mu`` falls inside the dead-band around 0."""
        return bool(np.any(np.abs(self.neg_Rinv_mu) <= DEAD_BAND))


def tightness_check(rd: ReflectionData) -> TightnessResult:
    """Tight iff every component of ``R^{-1} mu`` is strictly negative."""
    v = solve_tridiagonal(rd.R_lower, np.ones(rd.N - 1), rd.R_upper, rd.mu)
    tight = bool(np.all(v < -DEAD_BAND))
    return TightnessResult(tight, -v)


def closed_form_neg_Rinv_mu_symmetric(spec: SystemSpec, N: int) -> np.ndarray:
    """``2 (g_1 + ... + g_k - k * mean(g_1..g_N))`` for ``k = 1..N-1``."""
    if not spec.symmetric:
        raise NotSymmetricError("closed form holds for symmetric collisions only")
    g = np.asarray(spec.g(N), dtype=float)
    csum = np.cumsum(g)
    k = np.arange(1, N)
    return 2.0 * (csum[:-1] - k * (csum[-1] / N))


def skew_symmetry_residuals(spec: SystemSpec, N: int) -> tuple[np.ndarray, float]:
    """Per-rank residuals for ``k = 2..N-1`` and the max-abs residual of
    ``R D + D R^T - 2 A`` with ``D = diag(A)``."""
    s2 = spec.sigma2(N)
    qp, qm = spec.qp(N), spec.qm(N)
    per_k = np.array([
        float((qm[k - 2] + qp[k]) * s2[k - 1] - qm[k - 1] * s2[k] - qp[k - 1] * s2[k - 2])
        for k in range(2, N)
    ])
    rd = build_reflection_data(spec, N)
    D = np.diag(np.diag(rd.A))
    M = rd.R @ D + D @ rd.R.T - 2.0 * rd.A
    return per_k, float(np.max(np.abs(M))) if M.size else 0.0


def skew_symmetry_check(spec: SystemSpec, N: int) -> bool:
    per_k, mat = skew_symmetry_residuals(spec, N)
    by_rank = bool(np.all(np.abs(per_k) <= STRUCT_TOL))
    by_matrix = mat <= STRUCT_TOL
    if by_rank != by_matrix:
        raise AssertionError(
            f"skew-symmetry criteria disagree (per-rank max {np.max(np.abs(per_k)):.3g}, "
            f"matrix {mat:.3g}); check the collision-parameter chain condition")
    return by_rank


@dataclass(frozen=True)
class StationaryLaw:
    """Product-of-exponentials stationary law of the gaps, when it exists.

    ``rates`` is None unless the system is both tight and skew-symmetric.
    """

    N: int
    rates: np.ndarray | None
    tight: bool
    skew_symmetric: bool
    neg_Rinv_mu: np.ndarray

    @property
    def status(self) -> str:
        if not self.tight:
            return "NOT_TIGHT"
        if not self.skew_symmetric:
            return "NOT_SKEW_SYMMETRIC"
        return "OK"

    @property
    def means(self) -> np.ndarray:
        if self.rates is None:
            raise ValueError(f"no stationary rates ({self.status})")
        return 1.0 / self.rates

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "status": self.status,
            "tight": self.tight,
            "skew_symmetric": self.skew_symmetric,
            "neg_Rinv_mu": self.neg_Rinv_mu.tolist(),
            "rates": None if self.rates is None else self.rates.tolist(),
        }


def _rel_agree(a, b, rtol) -> bool:
    scale = max(float(np.max(np.abs(b))), np.finfo(float).tiny) if np.size(b) else 1.0
    return bool(np.all(np.abs(np.asarray(a) - np.asarray(b)) <= rtol * scale))


def stationary_rates(spec: SystemSpec, N: int) -> StationaryLaw:
    rd = build_reflection_data(spec, N)
    tight, v = tightness_check(rd)
    skew = skew_symmetry_check(spec, N)
    rates = None
    if tight and skew:
        s2 = np.asarray(spec.sigma2(N), dtype=float)
        rates = 2.0 * v / (s2[:-1] + s2[1:])
        if spec.symmetric:
            g = np.asarray(spec.g(N), dtype=float)
            k = np.arange(1, N)
            gbar = np.cumsum(g) / np.arange(1, N + 1)
            closed = 4.0 * k / (s2[:-1] + s2[1:]) * (gbar[:-1] - gbar[-1])
            if not _rel_agree(rates, closed, AGREE_RTOL):
                raise AssertionError("linear-solve and closed-form rates disagree")
    return StationaryLaw(N, rates, tight, skew, v)
