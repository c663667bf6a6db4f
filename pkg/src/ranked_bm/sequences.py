"""Infinite real sequences as an explicit prefix plus an analytic tail.

Every coefficient sequence in this package (drifts, diffusions, collision
parameters, initial positions, stationary rates) is a :class:`SeqRule`.  The
tail belongs to a closed family of monotone rules,

    Constant(c)           c
    Power(a, b, p)        a + b * i**p
    Log(a, b, p, shift)   a + b * log(i + shift)**p

evaluated at the absolute (1-based) index ``i``.  On this family the
questions the model needs answered about infinite tails (bounds, divergence,
summability of Gaussian-type series) are decidable exactly through the
leading-order asymptotics ``coef * i**power * log(i)**logpower``, which is
what :class:`Growth` records.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import UnsupportedTailError

__all__ = [
    "Constant", "Power", "Log", "Tail", "SeqRule", "Growth",
    "partial_sum_growth", "series_converges", "gaussian_series_converges",
    "tail_from_dict", "tail_to_dict",
]


@dataclass(frozen=True)
class Growth:
    """Leading-order behaviour ``coef * i**power * log(i)**logpower``.

    ``kind`` is ``"power"`` for the generic case, ``"zero"`` for an
    eventually-zero sequence, ``"loglog"`` for ``coef * log(log(i))`` and
    ``"bounded"`` for a sequence known only to be bounded (e.g. the partial
    sums of a summable series).
    """

    coef: float = 0.0
    power: float = 0.0
    logpower: float = 0.0
    kind: str = "power"

    @property
    def limit(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "bounded":
            return math.nan
        if self.kind == "loglog":
            return math.copysign(math.inf, self.coef)
        if self.power > 0 or (self.power == 0 and self.logpower > 0):
            return math.copysign(math.inf, self.coef)
        if self.power < 0 or self.logpower < 0:
            return 0.0
        return float(self.coef)

    def reciprocal(self) -> "Growth":
        if self.kind != "power" or self.coef == 0:
            raise UnsupportedTailError(f"no closed-form reciprocal for {self}")
        return Growth(1.0 / self.coef, -self.power, -self.logpower)

    def square(self) -> "Growth":
        if self.kind == "zero":
            return self
        if self.kind != "power":
            raise UnsupportedTailError(f"no closed-form square for {self}")
        return Growth(self.coef ** 2, 2 * self.power, 2 * self.logpower)


_ZERO = Growth(kind="zero")


def partial_sum_growth(g: Growth) -> Growth:
    """Asymptotics of ``sum_{i<=n} x_i`` for ``x_i`` with growth ``g``."""
    if g.kind == "zero":
        return Growth(kind="bounded")
    if g.kind != "power":
        raise UnsupportedTailError(f"cannot sum a {g.kind} sequence in closed form")
    if g.coef == 0:
        return Growth(kind="bounded")
    p, q = g.power, g.logpower
    if p > -1:
        return Growth(g.coef / (p + 1), p + 1, q)
    if p == -1:
        if q > -1:
            return Growth(g.coef / (q + 1), 0.0, q + 1)
        if q == -1:
            return Growth(g.coef, kind="loglog")
    return Growth(kind="bounded")


def series_converges(g: Growth) -> bool:
    """Whether ``sum x_i`` converges for a positive sequence with growth ``g``."""
    if g.kind == "zero":
        return True
    if g.kind != "power":
        return False
    p, q = g.power, g.logpower
    return p < -1 or (p == -1 and q < -1)


def gaussian_series_converges(g: Growth) -> bool:
    """Whether ``sum exp(-alpha * x_i**2) < inf`` for every ``alpha > 0``.

    Requires ``x_i -> +inf``.  For ``x ~ c log(i)**q`` the terms are
    ``i**(-alpha c**2 log(i)**(2q-1))``, summable for every alpha iff
    ``q > 1/2``; at ``q = 1/2`` summability fails for ``alpha < 1/c**2``.
    """
    if g.limit != math.inf:
        return False
    if g.kind != "power":
        return False
    if g.power > 0:
        return True
    return g.power == 0 and g.logpower > 0.5


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, i):
        if isinstance(i, np.ndarray):
            return np.full(i.shape, float(self.value))
        return self.value

    @property
    def limit(self) -> float:
        return float(self.value)

    @property
    def direction(self) -> int:
        return 0

    def growth(self) -> Growth:
        return _ZERO if self.value == 0 else Growth(self.value, 0.0, 0.0)

    def difference_growth(self) -> Growth:
        return _ZERO


@dataclass(frozen=True)
class Power:
    a: float
    b: float
    p: float

    def __call__(self, i):
        if isinstance(i, np.ndarray):
            return self.a + self.b * i.astype(float) ** self.p
        return self.a + self.b * float(i) ** self.p

    @property
    def limit(self) -> float:
        if self.b == 0 or self.p == 0:
            return float(self.a + self.b)
        if self.p > 0:
            return math.copysign(math.inf, self.b)
        return float(self.a)

    @property
    def direction(self) -> int:
        return int(np.sign(self.b * self.p))

    def growth(self) -> Growth:
        if self.b == 0 or self.p == 0:
            return Constant(self.a + self.b).growth()
        if self.p > 0:
            return Growth(self.b, self.p, 0.0)
        if self.a != 0:
            return Growth(self.a, 0.0, 0.0)
        return Growth(self.b, self.p, 0.0)

    def difference_growth(self) -> Growth:
        """Growth of ``x_{i+1} - x_i``."""
        if self.b == 0 or self.p == 0:
            return _ZERO
        return Growth(self.b * self.p, self.p - 1, 0.0)


@dataclass(frozen=True)
class Log:
    a: float
    b: float
    p: float = 1.0
    shift: float = 0.0

    def __call__(self, i):
        if isinstance(i, np.ndarray):
            return self.a + self.b * np.log(i + self.shift) ** self.p
        return self.a + self.b * math.log(i + self.shift) ** self.p

    @property
    def limit(self) -> float:
        if self.b == 0 or self.p == 0:
            return float(self.a + self.b)
        if self.p > 0:
            return math.copysign(math.inf, self.b)
        return float(self.a)

    @property
    def direction(self) -> int:
        return int(np.sign(self.b * self.p))

    def growth(self) -> Growth:
        if self.b == 0 or self.p == 0:
            return Constant(self.a + self.b).growth()
        if self.p > 0:
            return Growth(self.b, 0.0, self.p)
        if self.a != 0:
            return Growth(self.a, 0.0, 0.0)
        return Growth(self.b, 0.0, self.p)

    def difference_growth(self) -> Growth:
        if self.b == 0 or self.p == 0:
            return _ZERO
        return Growth(self.b * self.p, -1.0, self.p - 1)


Tail = Union[Constant, Power, Log]

_TAIL_KINDS = {"constant": Constant, "power": Power, "log": Log}


def tail_to_dict(tail: Tail) -> dict:
    kind = {Constant: "constant", Power: "power", Log: "log"}[type(tail)]
    out = {"kind": kind}
    out.update({k: float(v) for k, v in tail.__dict__.items()})
    return out


def tail_from_dict(d: dict) -> Tail:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _TAIL_KINDS:
        raise UnsupportedTailError(f"unknown tail kind {kind!r}")
    cls = _TAIL_KINDS[kind]
    try:
        return cls(**{k: float(v) for k, v in d.items()})
    except TypeError as exc:
        raise UnsupportedTailError(f"bad parameters for {kind} tail: {exc}") from None


@dataclass(frozen=True)
class SeqRule:
    """``x_1, x_2, ...``: explicit ``prefix`` values, then ``tail(i)``.

    A rule without a tail is a finite sequence of length ``len(prefix)``.
    """

    prefix: tuple = ()
    tail: Tail | None = None

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))

    # construction helpers
    @classmethod
    def constant(cls, c) -> "SeqRule":
        return cls((), Constant(c))

    @classmethod
    def finite(cls, values) -> "SeqRule":
        return cls(tuple(values), None)

    @classmethod
    def eventually(cls, values, c=0.0) -> "SeqRule":
        return cls(tuple(values), Constant(c))

    @property
    def is_infinite(self) -> bool:
        return self.tail is not None

    @property
    def length(self) -> float:
        return math.inf if self.tail is not None else len(self.prefix)

    @property
    def first_tail_index(self) -> int:
        return len(self.prefix) + 1

    def value(self, i: int):
        """``x_i`` for a 1-based index."""
        if i < 1:
            raise IndexError("sequences are indexed from 1")
        if i <= len(self.prefix):
            return self.prefix[i - 1]
        if self.tail is None:
            raise IndexError(f"finite sequence of length {len(self.prefix)} has no entry {i}")
        return self.tail(i)

    def head(self, n: int) -> list:
        """The first ``n`` entries as Python numbers (exact types preserved)."""
        return [self.value(i) for i in range(1, n + 1)]

    def array(self, n: int) -> np.ndarray:
        out = np.empty(n)
        m = min(n, len(self.prefix))
        out[:m] = np.asarray(self.prefix[:m], dtype=float)
        if n > m:
            if self.tail is None:
                raise IndexError(f"finite sequence of length {len(self.prefix)} has no entry {n}")
            out[m:] = self.tail(np.arange(m + 1, n + 1, dtype=float))
        return out

    def growth(self) -> Growth:
        if self.tail is None:
            return _ZERO
        return self.tail.growth()

    @property
    def limit(self) -> float:
        if self.tail is None:
            raise UnsupportedTailError("a finite sequence has no limit")
        return self.tail.limit

    def _tail_range(self):
        first = float(self.tail(self.first_tail_index))
        return first, self.tail.limit

    def inf(self) -> float:
        vals = [float(v) for v in self.prefix]
        if self.tail is not None:
            vals.extend(self._tail_range())
        return min(vals) if vals else math.inf

    def sup(self) -> float:
        vals = [float(v) for v in self.prefix]
        if self.tail is not None:
            vals.extend(self._tail_range())
        return max(vals) if vals else -math.inf

    def all_positive(self) -> bool:
        if any(v <= 0 for v in self.prefix):
            return False
        if self.tail is None:
            return True
        first, lim = self._tail_range()
        return first > 0 and lim >= 0

    def all_in_open_unit_interval(self) -> bool:
        if any(not (0 < v < 1) for v in self.prefix):
            return False
        if self.tail is None:
            return True
        first, lim = self._tail_range()
        lo, hi = min(first, lim), max(first, lim)
        return first > 0 and first < 1 and lo >= 0 and hi <= 1 and (
            0 < lim < 1 or self.tail.direction != 0)

    def is_nondecreasing(self) -> bool:
        p = self.prefix
        if any(p[i] > p[i + 1] for i in range(len(p) - 1)):
            return False
        if self.tail is None:
            return True
        if self.tail.direction < 0:
            return False
        return not p or p[-1] <= self.tail(self.first_tail_index)

    def diverges_to_infinity(self) -> bool:
        return self.tail is not None and self.tail.limit == math.inf

    def to_dict(self) -> dict:
        return {
            "prefix": [float(v) for v in self.prefix],
            "tail": None if self.tail is None else tail_to_dict(self.tail),
        }

    @classmethod
    def from_dict(cls, d) -> "SeqRule":
        if isinstance(d, (int, float)):
            return cls.constant(float(d))
        if isinstance(d, (list, tuple)):
            return cls.finite(float(v) for v in d)
        extra = set(d) - {"prefix", "tail"}
        if extra:
            raise UnsupportedTailError(f"unknown sequence keys: {sorted(extra)}")
        tail = d.get("tail")
        return cls(
            tuple(float(v) for v in d.get("prefix", ())),
            None if tail is None else tail_from_dict(tail),
        )
