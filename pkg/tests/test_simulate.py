import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ranked_bm.errors import ConfigError, NotSymmetricError
from ranked_bm.model import SystemSpec
from ranked_bm.reflection import build_reflection_data, stationary_rates
from ranked_bm.sequences import Power, SeqRule
from ranked_bm.simulate import (
    BRIDGE, NAMED_EULER, PROJECTION, NoiseSource, SimConfig, ZeroNoise, lcp_project,
    run_replicas, sample_stationary_gaps, simulate_coupled, simulate_named,
    simulate_ranked_gaps, truncation_ladder_sim,
)


def brute_force_lcp(w, R):
    """Enumerate active sets; return every (z, dl) satisfying complementarity."""
    d = len(w)
    sols = []
    for mask in itertools.product([False, True], repeat=d):
        S = np.flatnonzero(mask)
        dl = np.zeros(d)
        if len(S):
            dl[S] = np.linalg.solve(R[np.ix_(S, S)], -w[S])
        z = w + R @ dl
        if np.all(dl >= -1e-12) and np.all(z >= -1e-12):
            sols.append((np.maximum(z, 0), np.maximum(dl, 0)))
    return sols


def test_sim_config_validation_and_round_trip():
    cfg = SimConfig(dt=0.01, T=2.0, burn_in=1.0, seed=5, boundary=BRIDGE)
    assert cfg.n_steps == 200
    assert SimConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        SimConfig(dt=0.0, T=1.0)
    with pytest.raises(ConfigError):
        SimConfig(dt=0.1, T=1.0, burn_in=2.0)
    with pytest.raises(ConfigError):
        SimConfig(dt=0.1, T=1.0, boundary="reflect")
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"dt": 0.1, "T": 1.0, "steps": 3})


def test_lcp_examples():
    R = np.array([[1.0, -0.5], [-0.5, 1.0]])
    z, dl = lcp_project(np.array([0.2, 0.5]), R)
    assert np.array_equal(z, [0.2, 0.5]) and np.array_equal(dl, [0.0, 0.0])
    z, dl = lcp_project(np.array([-0.2]), np.eye(1))
    assert z[0] == 0.0 and dl[0] == pytest.approx(0.2)
    z, dl = lcp_project(np.array([-0.3, 0.5]), R)
    assert np.allclose(z, [0.0, 0.35]) and np.allclose(dl, [0.3, 0.0])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_lcp_matches_unique_enumerated_solution(d, seed):
    rng = np.random.default_rng(seed)
    q = rng.uniform(0.05, 0.95, d + 1)
    R = np.eye(d)
    for k in range(d - 1):
        R[k, k + 1] = -q[k + 1]
        R[k + 1, k] = -(1 - q[k + 1])
    w = rng.normal(size=d)
    sols = brute_force_lcp(w, R)
    assert len(sols) == 1
    z, dl = lcp_project(w, R)
    assert np.allclose(z, sols[0][0], atol=1e-10)
    assert np.allclose(dl, sols[0][1], atol=1e-10)


def test_lcp_rejects_bad_matrix():
    with pytest.raises(ValueError):
        lcp_project(np.zeros(2), np.array([[2.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        lcp_project(np.zeros(3), np.array([[1.0, 0, 0.1], [0, 1.0, 0], [0, 0, 1.0]]))


def reference_projection(spec, z0, cfg, noise, y1=0.0):
    """Step-by-step projection scheme in plain numpy."""
    N = len(z0) + 1
    rd = build_reflection_data(spec, N)
    sig = np.sqrt(np.asarray(spec.sigma2(N), dtype=float))
    xi = noise.normals(cfg.n_steps, 0, N)
    z, L, y = np.array(z0, dtype=float), np.zeros(N - 1), y1
    zs, ls, ys = [z.copy()], [L.copy()], [y]
    g1, qm1 = spec.g(1)[0], spec.qm(1)[0]
    for n in range(cfg.n_steps):
        dB = sig * xi[n] * np.sqrt(cfg.dt)
        w = z + rd.mu * cfg.dt + dB[1:] - dB[:-1]
        z, dl = lcp_project(w, rd.R)
        L = L + dl
        y = y + g1 * cfg.dt + dB[0] - qm1 * dl[0]
        zs.append(z)
        ls.append(L)
        ys.append(y)
    return np.array(zs), np.array(ls), np.array(ys)


def test_kernel_matches_reference_projection():
    spec = SystemSpec(4, SeqRule.finite([1.0, -0.5, 0.2, 0.0]), SeqRule.finite([1.0, 2.0, 0.5, 1.5]),
                      SeqRule.finite([0.5, 0.6, 0.7, 0.7]), SeqRule.finite([0.4, 0.3, 0.3, 0.5]))
    cfg = SimConfig(dt=1e-3, T=2.0, seed=11)
    tr = simulate_ranked_gaps(spec, [0.05, 0.0, 0.1], cfg)
    Z, L, Y = reference_projection(spec, [0.05, 0.0, 0.1], cfg, NoiseSource(11, 0))
    assert np.allclose(tr.Z, Z, atol=1e-10)
    assert np.allclose(tr.L, L, atol=1e-10)
    assert np.allclose(tr.Y1, Y, atol=1e-10)
    assert L[-1].min() > 0


def test_projection_invariants():
    cfg = SimConfig(dt=1e-3, T=5.0, seed=3)
    tr = simulate_ranked_gaps(SystemSpec.atlas(6), np.zeros(5), cfg)
    assert np.all(tr.Z >= 0)
    assert np.all(np.diff(tr.L, axis=0) >= 0)
    assert tr.complementarity_violation() == 0.0
    assert tr.max_lcp_residual <= 1e-10
    pos = tr.positions()
    assert np.allclose(np.diff(pos, axis=1), tr.Z)
    assert np.array_equal(pos[:, 0], tr.Y1)


def test_output_stride_subsamples_the_same_path():
    full = simulate_ranked_gaps(SystemSpec.atlas(4), [0.5, 0.5, 0.5], SimConfig(dt=1e-3, T=1.0, seed=9))
    thin = simulate_ranked_gaps(SystemSpec.atlas(4), [0.5, 0.5, 0.5],
                                SimConfig(dt=1e-3, T=1.0, seed=9, output_stride=10))
    assert np.array_equal(full.Z[::10], thin.Z)
    assert np.allclose(thin.times, full.times[::10])


def test_blocks_do_not_change_the_path(monkeypatch):
    from ranked_bm import simulate as sim
    cfg = SimConfig(dt=1e-3, T=3.0, seed=2, boundary=BRIDGE)
    a = simulate_ranked_gaps(SystemSpec.atlas(4), [0.1, 0.2, 0.3], cfg)
    monkeypatch.setattr(sim, "BLOCK", 7)
    b = simulate_ranked_gaps(SystemSpec.atlas(4), [0.1, 0.2, 0.3], cfg)
    assert np.array_equal(a.Z, b.Z)


def test_zero_noise_is_deterministic_drift_plus_push():
    cfg = SimConfig(dt=0.1, T=1.0)
    for boundary in (PROJECTION, BRIDGE):
        tr = simulate_ranked_gaps(SystemSpec.atlas(2), [0.35], SimConfig(dt=0.1, T=1.0, boundary=boundary),
                                  noise=ZeroNoise())
        want = np.maximum(0.35 - tr.times, 0.0)
        assert np.allclose(tr.Z[:, 0], want, atol=1e-12)
    tr = simulate_ranked_gaps(SystemSpec.atlas(3), [0.0, 0.0], cfg, noise=ZeroNoise())
    assert np.all(tr.Z == 0)
    # from zero gaps the push splits as R^{-1} (dt, 0) = (4/3, 2/3) dt per step
    assert np.allclose(np.diff(tr.L, axis=0), [4 / 30, 2 / 30])


def test_named_single_particle_zero_noise():
    spec = SystemSpec(1, SeqRule.finite([0.0]), SeqRule.finite([1.0]))
    tr = simulate_named(spec, [3.0], SimConfig(dt=1.0, T=1.0), noise=ZeroNoise())
    assert np.array_equal(tr.X[:, 0], [3.0, 3.0])


def test_named_rejects_asymmetric_and_infinite():
    asym = SystemSpec(3, SeqRule.finite([1, 0, 0]), SeqRule.finite([1, 1, 1]),
                      SeqRule.finite([0.4, 0.6, 0.6]), SeqRule.finite([0.4, 0.4, 0.4]))
    with pytest.raises(NotSymmetricError):
        simulate_named(asym, [0, 1, 2], SimConfig(dt=0.1, T=1.0))
    with pytest.raises(ConfigError):
        simulate_named(SystemSpec.atlas(), [0, 1, 2], SimConfig(dt=0.1, T=1.0))


def test_named_permutation_ranks_positions():
    tr = simulate_named(SystemSpec.atlas(5), [0.4, 0.0, 0.3, 0.1, 0.2],
                        SimConfig(dt=1e-3, T=1.0, seed=4, scheme=NAMED_EULER))
    assert np.all(np.diff(tr.ranked(), axis=1) >= 0)
    assert np.array_equal(tr.perm[0], [1, 3, 4, 2, 0])
    g = tr.as_gap_trajectory()
    assert np.allclose(g.Z, tr.gaps()) and np.all(np.isnan(g.L))


def test_named_and_gap_schemes_share_the_stationary_law():
    spec = SystemSpec.atlas(3)
    law = stationary_rates(spec, 3)
    named_cfg = SimConfig(dt=1e-3, T=200.0, burn_in=5.0, seed=0, scheme=NAMED_EULER)
    gap_cfg = SimConfig(dt=1e-3, T=200.0, burn_in=5.0, seed=0, boundary=BRIDGE)
    reps = 64
    named = [simulate_named(spec, [0.0, 0.75, 2.25], named_cfg, replica=r).as_gap_trajectory()
             for r in range(reps)]
    gaps = [simulate_ranked_gaps(spec, [0.75, 1.5], gap_cfg, replica=r) for r in range(reps)]
    for trajs in (named, gaps):
        means = np.array([t.Z[t.post_burn_in()].mean(axis=0) for t in trajs]) * law.rates
        se = means.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(means.mean(axis=0) - 1) < 4 * se), (means.mean(axis=0), se)


def test_replicas_are_deterministic_across_jobs():
    cfg = SimConfig(dt=1e-3, T=1.0, seed=17, boundary=BRIDGE)
    fn = lambda r: simulate_ranked_gaps(SystemSpec.atlas(5), np.full(4, 0.5), cfg, replica=r).Z  # noqa: E731
    serial = run_replicas(fn, 4, jobs=1)
    threaded = run_replicas(fn, 4, jobs=3)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a, b)
    assert not np.array_equal(serial[0], serial[1])


def test_coupled_identical_inputs_are_bitwise_equal():
    cfg = SimConfig(dt=1e-3, T=1.0, seed=8)
    a, b = simulate_coupled(SystemSpec.atlas(4), SystemSpec.atlas(4), [0.2] * 3, [0.2] * 3, cfg)
    assert np.array_equal(a.Z, b.Z) and np.array_equal(a.L, b.L)
    with pytest.raises(ConfigError):
        simulate_coupled(SystemSpec.atlas(4), SystemSpec.atlas(4), [0.2] * 3, [0.2] * 3, cfg,
                         pairing="independent")


def test_truncation_ladder_shares_channels_and_orders_positions():
    y0 = SeqRule((), Power(0.0, 1.0, 1.0))
    out = truncation_ladder_sim(SystemSpec.atlas(), y0, (5, 10), SimConfig(dt=1e-3, T=3.0, seed=1))
    small, big = out[5].positions(), out[10].positions()[:, :5]
    # adding particles on top can only push the bottom ranks down
    assert np.all(big <= small + 1e-12)
    assert np.array_equal(out[5].times, out[10].times)


def test_infinite_spec_needs_truncation():
    with pytest.raises(ConfigError):
        simulate_ranked_gaps(SystemSpec.atlas(), [0.1], SimConfig(dt=0.1, T=1.0))
    with pytest.raises(ConfigError):
        simulate_ranked_gaps(SystemSpec.atlas(3), [0.1] * 4, SimConfig(dt=0.1, T=1.0), N=5)
    with pytest.raises(ValueError):
        simulate_ranked_gaps(SystemSpec.atlas(3), [0.1, -0.1], SimConfig(dt=0.1, T=1.0))


def test_sample_stationary_gaps():
    rng = np.random.default_rng(0)
    s = sample_stationary_gaps([2.0, np.inf], rng, size=100_000, factor=2.0)
    assert s.shape == (100_000, 2)
    assert np.all(s[:, 1] == 0)
    assert s[:, 0].mean() == pytest.approx(1.0, rel=0.02)


def test_noise_channels_are_independent_of_call_pattern():
    a = NoiseSource(3, 1).normals(10, 2, 3)
    src = NoiseSource(3, 1)
    b = np.vstack([src.normals(4, 2, 3), src.normals(6, 2, 3)])
    assert np.array_equal(a, b)
    # channel k draws the same numbers whatever block of channels it sits in
    c = NoiseSource(3, 1).normals(10, 3, 1)
    assert np.array_equal(a[:, 1], c[:, 0])
    assert not np.array_equal(NoiseSource(3, 2).normals(10, 2, 3), a)
