"""Time-discretised simulation of named particles and ranked gap processes.

Two schemes are provided.  ``named_euler`` moves named particles with the
drift and diffusion of their current rank.  ``gap_srbm`` steps the gap
vector directly: a free Euler step ``w = Z + mu dt + dB`` followed by the
discrete Skorokhod map, i.e. the linear complementarity problem

    Z' = w + R dl,   Z' >= 0,   dl >= 0,   Z'.dl = 0,

whose solution ``dl`` is the local-time increment of the step.  With
``boundary="bridge"`` the complementarity problem is posed on the
per-coordinate Brownian-bridge minimum of the step instead of its endpoint,
which removes the first-order boundary bias of plain projection.

Noise is drawn per rank channel from independent generators keyed by
``(seed, stream, channel)``, so systems of different size driven with the
same seed share the Brownian motions of their common ranks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, NoConvergenceError, NotSymmetricError
from .model import InitialConfig, SystemSpec, gaps_from_positions
from .reflection import build_reflection_data
from .sequences import SeqRule

__all__ = [
    "NAMED_EULER", "GAP_SRBM", "PROJECTION", "BRIDGE", "SHARED_RANK_CHANNELS",
    "SimConfig", "NoiseSource", "ZeroNoise", "GapTrajectory", "NamedTrajectory",
    "lcp_project", "simulate_named", "simulate_ranked_gaps", "simulate_coupled",
    "truncation_ladder_sim", "sample_stationary_gaps", "run_replicas", "LCP_TOL",
]

NAMED_EULER = "named_euler"
GAP_SRBM = "gap_srbm"
PROJECTION = "projection"
BRIDGE = "bridge"
SHARED_RANK_CHANNELS = "shared_rank_channels"

LCP_TOL = 1e-10
BLOCK = 8192

# generator families within one (seed, stream)
_RANK_NORMAL, _RANK_UNIFORM, _NAME_NORMAL, _INIT = range(4)


@dataclass(frozen=True)
class SimConfig:
    """Discretisation and replication settings.

    ``N`` selects the truncation size when simulating an infinite system.
    ``output_stride`` keeps every n-th step of the trajectory.
    """

    dt: float
    T: float
    burn_in: float = 0.0
    seed: int = 0
    replicas: int = 1
    scheme: str = GAP_SRBM
    boundary: str = PROJECTION
    output_stride: int = 1
    N: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not (self.T >= self.burn_in >= 0):
            raise ConfigError("need T >= burn_in >= 0")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.scheme not in (NAMED_EULER, GAP_SRBM):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.boundary not in (PROJECTION, BRIDGE):
            raise ConfigError(f"unknown boundary treatment {self.boundary!r}")
        if self.output_stride < 1:
            raise ConfigError("output_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown sim keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


class NoiseSource:
    """Independent standard normals per ``(step, channel)``.

    Each channel owns a generator seeded from ``(seed, stream, channel)``;
    draws advance it, so successive calls continue the same sequence.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._gens: dict = {}

    def _gen(self, family: int, channel: int) -> np.random.Generator:
        key = (family, channel)
        gen = self._gens.get(key)
        if gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, family, channel))
            gen = self._gens[key] = np.random.Generator(np.random.PCG64(ss))
        return gen

    def _block(self, family, n, start, count, draw) -> np.ndarray:
        out = np.empty((n, count))
        for j in range(count):
            out[:, j] = draw(self._gen(family, start + j), n)
        return out

    def normals(self, n: int, start: int, count: int) -> np.ndarray:
        """``(n, count)`` normals for rank channels ``start .. start+count-1``."""
        return self._block(_RANK_NORMAL, n, start, count,
                           lambda g, k: g.standard_normal(k))

    def uniforms(self, n: int, start: int, count: int) -> np.ndarray:
        """``(n, count)`` uniforms on [0, 1) for gap channels."""
        return self._block(_RANK_UNIFORM, n, start, count, lambda g, k: g.random(k))

    def name_normals(self, n: int, count: int) -> np.ndarray:
        """Normals for per-particle (named) channels ``0 .. count-1``."""
        return self._block(_NAME_NORMAL, n, 0, count, lambda g, k: g.standard_normal(k))

    def init_generator(self) -> np.random.Generator:
        """Generator reserved for drawing initial states."""
        return self._gen(_INIT, 0)


class ZeroNoise(NoiseSource):
    """All Gaussian increments zero; bridge minima then sit at the endpoints."""

    def __init__(self):
        super().__init__(0, 0)

    def _block(self, family, n, start, count, draw):
        return np.zeros((n, count))


@dataclass
class GapTrajectory:
    """Stored gap path with cumulative local times and bottom position.

    Row ``j`` holds the state after ``j * output_stride`` steps.
    """

    times: np.ndarray
    Z: np.ndarray
    L: np.ndarray
    Y1: np.ndarray
    dt: float
    output_stride: int = 1
    burn_in: float = 0.0
    boundary: str = PROJECTION
    max_lcp_residual: float = 0.0
    sigma_max: float = 1.0

    @property
    def N(self) -> int:
        return self.Z.shape[1] + 1

    def positions(self) -> np.ndarray:
        """Ranked positions ``Y_1 .. Y_N`` at each stored time."""
        return self.Y1[:, None] + np.concatenate(
            (np.zeros((len(self.Y1), 1)), np.cumsum(self.Z, axis=1)), axis=1)

    def post_burn_in(self) -> slice:
        first = int(np.searchsorted(self.times, self.burn_in - 0.5 * self.dt))
        return slice(first, None)

    def complementarity_violation(self) -> float:
        """Largest stored gap at a stored step where its local time grew.

        Meaningful for ``output_stride == 1`` with the projection boundary,
        where it is exactly the per-step complementarity residual.
        """
        grew = np.diff(self.L, axis=0) > 0
        if not grew.any():
            return 0.0
        return float(np.max(self.Z[1:][grew]))


@dataclass
class NamedTrajectory:
    """Named positions ``X`` and the ranking permutation at each stored time
    (``perm[j, k]`` is the particle holding rank ``k``)."""

    times: np.ndarray
    X: np.ndarray
    perm: np.ndarray
    dt: float
    output_stride: int = 1
    burn_in: float = 0.0

    def ranked(self) -> np.ndarray:
        return np.take_along_axis(self.X, self.perm, axis=1)

    def gaps(self) -> np.ndarray:
        return np.diff(self.ranked(), axis=1)

    def as_gap_trajectory(self) -> GapTrajectory:
        """Ranked view as a gap trajectory; local times are not tracked by
        the named scheme and are filled with NaN."""
        ranked = self.ranked()
        z = np.diff(ranked, axis=1)
        return GapTrajectory(self.times, z, np.full_like(z, np.nan), ranked[:, 0], self.dt,
                             self.output_stride, self.burn_in)

    def post_burn_in(self) -> slice:
        first = int(np.searchsorted(self.times, self.burn_in - 0.5 * self.dt))
        return slice(first, None)


def _bands(R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    R = np.asarray(R, dtype=float)
    d = R.shape[0]
    if R.shape != (d, d) or np.any(np.diag(R) != 1.0):
        raise ValueError("reflection matrix must be square with unit diagonal")
    if np.any(np.triu(R, 2)) or np.any(np.tril(R, -2)):
        raise ValueError("reflection matrix must be tridiagonal")
    return np.ascontiguousarray(np.diag(R, -1)), np.ascontiguousarray(np.diag(R, 1))


def _workspace(d: int):
    return np.zeros(d), np.zeros(d), np.zeros(d, dtype=np.bool_), np.zeros(d), np.zeros(d)


def lcp_project(w, R) -> tuple[np.ndarray, np.ndarray]:
    """Discrete Skorokhod map: ``(z, dl)`` with ``z = w + R dl >= 0``,
    ``dl >= 0`` and ``z.dl = 0`` for a tridiagonal unit-diagonal ``R``."""
    w = np.ascontiguousarray(w, dtype=float)
    lower, upper = _bands(R)
    d = w.shape[0]
    dl, _, active, cp, dp = _workspace(d)
    status, res = _kernels.lcp_solve(w, lower, upper, dl, active, cp, dp, 10 * d, LCP_TOL)
    if status != _kernels.LCP_OK:
        raise NoConvergenceError(f"complementarity residual {res:.3g} after polish", res)
    z = w + np.asarray(R, dtype=float) @ dl
    z[dl > 0] = 0.0
    return np.maximum(z, 0.0), dl


def _resolve_n(spec: SystemSpec, cfg: SimConfig, N: int | None) -> int:
    n = N if N is not None else cfg.N
    if n is None:
        if spec.infinite:
            raise ConfigError("simulating an infinite system needs a truncation size N")
        n = spec.size
    if not spec.infinite and n > spec.size:
        raise ConfigError(f"N = {n} exceeds the system size {spec.size}")
    if n < 2:
        raise ConfigError("the gap process needs N >= 2")
    return int(n)


def simulate_ranked_gaps(spec: SystemSpec, z0, cfg: SimConfig, *, N: int | None = None,
                         y1: float = 0.0, replica: int = 0, noise: NoiseSource | None = None,
                         channel_offset: int = 0) -> GapTrajectory:
    """Reflected Euler scheme for the gaps of the bottom ``N`` ranks.

    ``channel_offset`` shifts the rank channels, so that rank ``k`` of this
    system is driven by the Brownian motion of rank ``k + channel_offset``.
    """
    N = _resolve_n(spec, cfg, N)
    d = N - 1
    z = np.array(z0, dtype=float)
    if z.shape != (d,):
        raise ValueError(f"initial gaps must have length {d}")
    if np.any(z < 0):
        raise ValueError("initial gaps must be nonnegative")
    rd = build_reflection_data(spec, N)
    lower, upper = np.ascontiguousarray(rd.R_lower), np.ascontiguousarray(rd.R_upper)
    sig = np.sqrt(np.asarray(spec.sigma2(N), dtype=float))
    avar = np.ascontiguousarray(np.diag(rd.A))
    g1 = float(spec.g(1)[0])
    qm1 = float(spec.qm(1)[0])
    bridge = cfg.boundary == BRIDGE
    noise = noise if noise is not None else NoiseSource(cfg.seed, replica)

    n_steps, stride = cfg.n_steps, cfg.output_stride
    n_out = n_steps // stride + 1
    out_z = np.empty((n_out, d))
    out_l = np.empty((n_out, d))
    out_y1 = np.empty(n_out)
    out_z[0], out_l[0], out_y1[0] = z, 0.0, y1
    L = np.zeros(d)
    y = np.array([float(y1)])
    dl, m, active, cp, dp = _workspace(d)
    no_u = np.empty((0, 0))
    slot, step, worst = 1, 0, 0.0
    while step < n_steps:
        nb = min(BLOCK, n_steps - step)
        xi = noise.normals(nb, channel_offset, N)
        u = noise.uniforms(nb, channel_offset, d) if bridge else no_u
        status, bad, res, slot = _kernels.gap_block(
            z, y, L, xi, u, rd.mu, sig, avar, lower, upper, g1, qm1, cfg.dt, bridge,
            out_z, out_l, out_y1, step, stride, slot, 10 * d, LCP_TOL, dl, m, active, cp, dp)
        if status != _kernels.LCP_OK:
            raise NoConvergenceError(f"complementarity step failed at step {bad}", res)
        worst = max(worst, res)
        step += nb
    times = np.arange(n_out) * (stride * cfg.dt)
    return GapTrajectory(times, out_z, out_l, out_y1, cfg.dt, stride, cfg.burn_in,
                         cfg.boundary, worst, float(sig.max()))


def simulate_named(spec: SystemSpec, x0, cfg: SimConfig, *, replica: int = 0,
                   noise: NoiseSource | None = None) -> NamedTrajectory:
    """Euler scheme for named particles with rank-dependent coefficients."""
    if not spec.symmetric:
        raise NotSymmetricError("the named-particle scheme is defined for symmetric collisions")
    if spec.infinite:
        raise ConfigError("the named-particle scheme needs a finite system")
    x = np.array(x0, dtype=float)
    N = spec.size
    if x.shape != (N,):
        raise ValueError(f"initial positions must have length {N}")
    g = np.asarray(spec.g(N), dtype=float)
    sig = np.sqrt(np.asarray(spec.sigma2(N), dtype=float))
    noise = noise if noise is not None else NoiseSource(cfg.seed, replica)
    order = np.argsort(x, kind="stable").astype(np.int64)
    n_steps, stride = cfg.n_steps, cfg.output_stride
    n_out = n_steps // stride + 1
    out_x = np.empty((n_out, N))
    out_p = np.empty((n_out, N), dtype=np.int64)
    out_x[0], out_p[0] = x, order
    slot, step = 1, 0
    while step < n_steps:
        nb = min(BLOCK, n_steps - step)
        xi = noise.name_normals(nb, N)
        slot = _kernels.named_block(x, order, xi, g, sig, cfg.dt, out_x, out_p, step, stride, slot)
        step += nb
    times = np.arange(n_out) * (stride * cfg.dt)
    return NamedTrajectory(times, out_x, out_p, cfg.dt, stride, cfg.burn_in)


def simulate_coupled(spec_a: SystemSpec, spec_b: SystemSpec, z0_a, z0_b, cfg: SimConfig, *,
                     pairing: str = SHARED_RANK_CHANNELS, replica: int = 0,
                     y1_a: float = 0.0, y1_b: float = 0.0, N_a: int | None = None,
                     N_b: int | None = None, offset_b: int = 0):
    """Two gap trajectories driven by the same rank channels.

    ``offset_b`` lets system B use the channels of ranks shifted upward,
    as for comparing a system with the subsystem of its upper ranks.
    """
    if pairing != SHARED_RANK_CHANNELS:
        raise ConfigError(f"unknown pairing {pairing!r}")
    a = simulate_ranked_gaps(spec_a, z0_a, cfg, N=N_a, y1=y1_a, replica=replica)
    b = simulate_ranked_gaps(spec_b, z0_b, cfg, N=N_b, y1=y1_b, replica=replica,
                             channel_offset=offset_b)
    return a, b


def _initial_positions(y0, n: int) -> np.ndarray:
    if isinstance(y0, InitialConfig):
        y0 = y0.values
    if isinstance(y0, SeqRule):
        return y0.array(n)
    y0 = np.asarray(y0, dtype=float)
    if y0.shape[0] < n:
        raise ValueError(f"initial configuration has {y0.shape[0]} entries, need {n}")
    return y0[:n]


def truncation_ladder_sim(spec: SystemSpec, y0, Ns: Sequence[int], cfg: SimConfig, *,
                          replica: int = 0) -> dict[int, GapTrajectory]:
    """Simulate the ``N``-particle truncations for each ``N`` in ``Ns`` from
    the bottom ``N`` entries of the ranked start ``y0``, all on shared rank
    channels."""
    Ns = [int(n) for n in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("Ns must be increasing")
    out = {}
    for n in Ns:
        y = _initial_positions(y0, n)
        z = np.asarray(gaps_from_positions(y), dtype=float)
        out[n] = simulate_ranked_gaps(spec, z, cfg, N=n, y1=float(y[0]), replica=replica)
    return out


def sample_stationary_gaps(rates, rng: np.random.Generator, size=None,
                           factor: float = 1.0) -> np.ndarray:
    """Independent ``Exp(rate / factor)`` gaps; infinite rates give exact zeros."""
    rates = np.asarray(rates, dtype=float)
    shape = rates.shape if size is None else (size,) + rates.shape
    e = rng.standard_exponential(shape)
    with np.errstate(divide="ignore"):
        scale = np.where(np.isinf(rates), 0.0, factor / rates)
    return e * scale


def run_replicas(fn: Callable[[int], object], replicas: int, jobs: int = 1) -> list:
    """``[fn(0), ..., fn(replicas - 1)]``, optionally on a thread pool.

    The compiled kernels release the GIL, so threads run in parallel; the
    result order never depends on completion order.
    """
    if jobs <= 1 or replicas == 1:
        return [fn(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(replicas)))
