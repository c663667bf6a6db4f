"""Particle-system specs, initial configurations and their checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NegativeGapError, NotRankableError, UnsupportedTailError
from .sequences import (
    Constant, SeqRule, gaussian_series_converges, partial_sum_growth,
)

__all__ = [
    "INFINITE", "NAMED", "RANKED", "SystemSpec", "InitialConfig", "Check",
    "ValidationReport", "RankResult", "SPEC_CONDITIONS", "INITIAL_CONDITIONS",
    "validate_spec", "rank_configuration", "check_initial_admissible",
    "check_gapnice", "gaps_from_positions", "positions_from_gaps",
]

INFINITE = "infinite"
NAMED = "named"
RANKED = "ranked"

_HALF = Fraction(1, 2)   # exact, so rational inputs stay rational
_CHAIN_TOL = 1e-12
# largest explicit block materialised when ranking an infinite sequence
_MAX_EXPLICIT = 10_000_000


@dataclass(frozen=True)
class SystemSpec:
    """Rank-dependent drifts ``g_k``, diffusions ``sigma_k**2`` and collision
    parameters ``(q_k^+, q_k^-)`` of a (possibly infinite) particle system.

    ``q_plus = q_minus = None`` means symmetric collisions, ``q = 1/2``.
    Collision-parameter tails must be constant.
    """

    size: int | str
    drifts: SeqRule
    diffusions: SeqRule
    q_plus: SeqRule | None = None
    q_minus: SeqRule | None = None

    def __post_init__(self):
        if (self.q_plus is None) != (self.q_minus is None):
            raise ValueError("give both q_plus and q_minus, or neither for symmetric collisions")
        if self.size != INFINITE:
            if not isinstance(self.size, (int, np.integer)) or isinstance(self.size, bool):
                raise ValueError(f"size must be an integer or {INFINITE!r}, got {self.size!r}")
        seqs = {"drifts": self.drifts, "diffusions": self.diffusions}
        if not self.symmetric:
            seqs.update(q_plus=self.q_plus, q_minus=self.q_minus)
            for name in ("q_plus", "q_minus"):
                tail = seqs[name].tail
                if tail is not None and not isinstance(tail, Constant):
                    raise UnsupportedTailError(f"{name} must have a constant tail")
        for name, seq in seqs.items():
            if self.size == INFINITE and not seq.is_infinite:
                raise ValueError(f"an infinite system needs a tail rule for {name}")
            if self.size != INFINITE and seq.length < self.size:
                raise ValueError(f"{name} defines {seq.length} values, system has {self.size}")

    @property
    def symmetric(self) -> bool:
        return self.q_plus is None

    @property
    def infinite(self) -> bool:
        return self.size == INFINITE

    def _check_n(self, n):
        if not self.infinite and n > self.size:
            raise ValueError(f"requested {n} ranks from a system of size {self.size}")

    def g(self, n: int) -> list:
        self._check_n(n)
        return self.drifts.head(n)

    def sigma2(self, n: int) -> list:
        self._check_n(n)
        return self.diffusions.head(n)

    def qp(self, n: int) -> list:
        self._check_n(n)
        return [_HALF] * n if self.symmetric else self.q_plus.head(n)

    def qm(self, n: int) -> list:
        self._check_n(n)
        return [_HALF] * n if self.symmetric else self.q_minus.head(n)

    def truncate(self, n: int) -> "SystemSpec":
        """The finite system made of the bottom ``n`` ranks."""
        self._check_n(n)
        fin = lambda s: SeqRule.finite(s.head(n))  # noqa: E731
        if self.symmetric:
            return SystemSpec(n, fin(self.drifts), fin(self.diffusions))
        return SystemSpec(n, fin(self.drifts), fin(self.diffusions),
                          fin(self.q_plus), fin(self.q_minus))

    # common models
    @classmethod
    def atlas(cls, size=INFINITE) -> "SystemSpec":
        return cls.m_atlas(1, size)

    @classmethod
    def m_atlas(cls, m: int, size=INFINITE) -> "SystemSpec":
        """Drift 1 on the bottom ``m`` ranks, 0 above, unit diffusions."""
        if size == INFINITE:
            return cls(size, SeqRule.eventually([1.0] * m, 0.0), SeqRule.constant(1.0))
        return cls(size, SeqRule.finite([1.0] * min(m, size) + [0.0] * max(size - m, 0)),
                   SeqRule.finite([1.0] * size))

    def to_dict(self) -> dict:
        out = {
            "size": self.size,
            "drifts": self.drifts.to_dict(),
            "diffusions": self.diffusions.to_dict(),
        }
        if self.symmetric:
            out["collisions"] = "symmetric"
        else:
            out["collisions"] = {"q_plus": self.q_plus.to_dict(), "q_minus": self.q_minus.to_dict()}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        extra = set(d) - {"size", "drifts", "diffusions", "collisions"}
        if extra:
            raise ValueError(f"unknown spec keys: {sorted(extra)}")
        size = d["size"]
        if isinstance(size, str) and size != INFINITE:
            raise ValueError(f"size must be an integer or {INFINITE!r}")
        coll = d.get("collisions", "symmetric")
        qp = qm = None
        if coll != "symmetric":
            if not isinstance(coll, dict) or set(coll) != {"q_plus", "q_minus"}:
                raise ValueError("collisions must be 'symmetric' or {q_plus, q_minus}")
            qp, qm = SeqRule.from_dict(coll["q_plus"]), SeqRule.from_dict(coll["q_minus"])
        return cls(size, SeqRule.from_dict(d["drifts"]), SeqRule.from_dict(d["diffusions"]), qp, qm)


@dataclass(frozen=True)
class InitialConfig:
    """Initial positions: named (any order) or ranked (nondecreasing)."""

    kind: str
    values: SeqRule

    def __post_init__(self):
        if self.kind not in (NAMED, RANKED):
            raise ValueError(f"kind must be {NAMED!r} or {RANKED!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.values.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "InitialConfig":
        d = dict(d)
        kind = d.pop("kind")
        return cls(kind, SeqRule.from_dict(d))


@dataclass(frozen=True)
class Check:
    id: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.entries)

    def __getitem__(self, cid: str) -> Check:
        for c in self.entries:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def failing(self) -> list[str]:
        return [c.id for c in self.entries if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [{"id": c.id, "passed": c.passed, "detail": c.detail} for c in self.entries],
        }


SPEC_CONDITIONS = (
    "size", "sigma_positive", "q_range", "q_chain",
    "drift_bounded_below", "diffusion_bounded_above", "q_plus_eventually_half",
)
INITIAL_CONDITIONS = ("ranked_nondecreasing", "tail_diverges", "seriesalpha", "gapnice")


def _chain_violations(qp: Sequence, qm: Sequence) -> list[tuple[int, float]]:
    # q+_{k+1} + q-_k = 1, k = 1..n-1 (1-based)
    bad = []
    for k in range(1, len(qp)):
        s = qp[k] + qm[k - 1]
        if abs(s - 1) > _CHAIN_TOL:
            bad.append((k, float(s)))
    return bad


def validate_spec(spec: SystemSpec) -> ValidationReport:
    """Check every standing assumption on a system spec.

    Failures are reported, never raised.  Infinite tails are decided
    analytically from their rule.
    """
    checks = []
    if spec.infinite:
        checks.append(Check("size", True, "infinite system"))
        # every rank where some explicit prefix ends, plus one tail index
        n = max(len(spec.drifts.prefix), len(spec.diffusions.prefix),
                0 if spec.symmetric else len(spec.q_plus.prefix),
                0 if spec.symmetric else len(spec.q_minus.prefix)) + 2
    else:
        n = spec.size
        checks.append(Check("size", n >= 2, f"N = {n}" + ("" if n >= 2 else " < 2")))

    sig = spec.diffusions if spec.infinite else SeqRule.finite(spec.sigma2(n))
    ok = sig.all_positive()
    checks.append(Check("sigma_positive", ok, "" if ok else "some sigma_k^2 <= 0"))

    if spec.symmetric:
        checks.append(Check("q_range", True, "symmetric collisions"))
        checks.append(Check("q_chain", True, "symmetric collisions"))
    else:
        qps = spec.q_plus if spec.infinite else SeqRule.finite(spec.qp(n))
        qms = spec.q_minus if spec.infinite else SeqRule.finite(spec.qm(n))
        ok = qps.all_in_open_unit_interval() and qms.all_in_open_unit_interval()
        checks.append(Check("q_range", ok, "" if ok else "some q_k outside (0, 1)"))
        bad = _chain_violations(spec.qp(n), spec.qm(n))
        if spec.infinite:
            # constant tails: q+_tail + q-_tail = 1 settles all k beyond the prefixes
            s = spec.q_plus.tail.value + spec.q_minus.tail.value
            if abs(s - 1) > _CHAIN_TOL:
                bad.append((n, float(s)))
        detail = "; ".join(f"q+_{k + 1} + q-_{k} = {s:g} != 1" for k, s in bad[:5])
        checks.append(Check("q_chain", not bad, detail))

    if spec.infinite:
        lo = spec.drifts.inf()
        checks.append(Check("drift_bounded_below", lo > -math.inf, f"inf g = {lo:g}"))
        hi = spec.diffusions.sup()
        checks.append(Check("diffusion_bounded_above", hi < math.inf, f"sup sigma^2 = {hi:g}"))
        if spec.symmetric:
            checks.append(Check("q_plus_eventually_half", True, "symmetric collisions"))
        else:
            tail = spec.q_plus.tail.value
            checks.append(Check("q_plus_eventually_half", tail >= _HALF,
                                f"tail q+ = {tail:g}"))
    else:
        for cid in ("drift_bounded_below", "diffusion_bounded_above", "q_plus_eventually_half"):
            checks.append(Check(cid, True, "not required for finite systems"))
    return ValidationReport(tuple(checks))


class RankResult(NamedTuple):
    """``permutation[k]`` is the (0-based) index of the particle with rank ``k``.

    For infinite inputs only the first ``len(permutation)`` ranks are explicit;
    ``identity_from`` is the 1-based rank from which the permutation is the
    identity.
    """

    permutation: np.ndarray
    ranked: np.ndarray
    identity_from: int | None = None


def _rank_finite(x) -> RankResult:
    x = np.asarray(x, dtype=float)
    perm = np.argsort(x, kind="stable")
    return RankResult(perm, x[perm], None)


def rank_configuration(x) -> RankResult:
    """Ranking permutation with ties broken by the smaller index.

    ``x`` is a finite vector or an infinite :class:`SeqRule`.
    """
    if not isinstance(x, SeqRule):
        return _rank_finite(x)
    if x.tail is None:
        return _rank_finite(np.asarray(x.prefix, dtype=float))
    tail = x.tail
    if tail.direction < 0:
        raise NotRankableError("tail decreases: infinitely many entries lie below each tail entry")
    p = len(x.prefix)
    if p == 0:
        return RankResult(np.empty(0, dtype=np.intp), np.empty(0), 1)
    top = max(float(v) for v in x.prefix)
    if tail.limit < top or (tail.limit == top and tail.direction > 0):
        raise NotRankableError(
            f"prefix entry {top:g} has infinitely many tail entries below it "
            f"(tail limit {tail.limit:g})")
    # first tail index whose value reaches the prefix maximum; ties go to the prefix
    lo, hi = p + 1, p + 1
    while tail(hi) < top:
        lo, hi = hi, 2 * hi
        if hi > _MAX_EXPLICIT:
            raise UnsupportedTailError("explicit ranked block would be too large")
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) >= top:
            hi = mid
        else:
            lo = mid + 1
    res = _rank_finite(x.array(hi - 1))
    return RankResult(res.permutation, res.ranked, hi)


def _is_rational(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def gaps_from_positions(y) -> np.ndarray | list:
    """``z_k = y_{k+1} - y_k``; exact for int/Fraction input."""
    if len(y) and all(_is_rational(v) for v in y):
        z = [b - a for a, b in zip(y[:-1], y[1:])]
        if any(v < 0 for v in z):
            raise NegativeGapError("positions are not nondecreasing")
        return z
    y = np.asarray(y, dtype=float)
    z = np.diff(y)
    if np.any(z < 0):
        k = int(np.argmax(z < 0))
        raise NegativeGapError(f"y_{k + 2} < y_{k + 1}: positions are not nondecreasing")
    return z


def positions_from_gaps(y1, z) -> np.ndarray | list:
    """Inverse of :func:`gaps_from_positions` given the bottom position."""
    if _is_rational(y1) and all(_is_rational(v) for v in z):
        out = [y1]
        for v in z:
            out.append(out[-1] + v)
        return out
    return np.cumsum(np.concatenate(([float(y1)], np.asarray(z, dtype=float))))


def check_gapnice(z: SeqRule) -> bool:
    """``sum exp(-alpha (z_1 + ... + z_n)^2) < inf`` for all ``alpha > 0``."""
    if z.tail is None:
        raise UnsupportedTailError("gap condition needs an infinite gap sequence")
    return gaussian_series_converges(partial_sum_growth(z.growth()))


def check_initial_admissible(cfg: InitialConfig) -> ValidationReport:
    """Decide admissibility of an initial configuration from its tail rule."""
    v = cfg.values
    checks = []
    if cfg.kind == RANKED:
        ok = v.is_nondecreasing()
        checks.append(Check("ranked_nondecreasing", ok, "" if ok else "ranked values decrease"))
    else:
        checks.append(Check("ranked_nondecreasing", True, "named configuration"))

    if not v.is_infinite:
        checks.append(Check("tail_diverges", True, "finite configuration"))
        checks.append(Check("seriesalpha", True, "finite configuration"))
        checks.append(Check("gapnice", True, "finite configuration"))
        return ValidationReport(tuple(checks))

    div = v.diverges_to_infinity()
    checks.append(Check("tail_diverges", div, f"tail limit {v.limit:g}"))
    g = v.growth()
    ok = div and gaussian_series_converges(g)
    detail = f"x_i ~ {g.coef:g} i^{g.power:g} log(i)^{g.logpower:g}"
    checks.append(Check("seriesalpha", ok, detail))
    if cfg.kind == RANKED:
        # independent route: partial sums of the gap sequence
        dg = v.tail.difference_growth()
        gap_ok = div and gaussian_series_converges(partial_sum_growth(dg))
        checks.append(Check("gapnice", gap_ok, "partial sums of gaps"))
    else:
        checks.append(Check("gapnice", True, "named configuration"))
    return ValidationReport(tuple(checks))
