from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_chain_spec, random_symmetric_spec
from ranked_bm.errors import NotSymmetricError, SingularError
from ranked_bm.model import SystemSpec
from ranked_bm.reflection import (
    build_reflection_data, closed_form_neg_Rinv_mu_symmetric, skew_symmetry_check,
    skew_symmetry_residuals, solve_tridiagonal, stationary_rates, tightness_check,
)
from ranked_bm.sequences import SeqRule


def fin(*v):
    return SeqRule.finite(v)


def test_reflection_matrix_examples():
    rd = build_reflection_data(SystemSpec.atlas(3), 3)
    assert np.array_equal(rd.R, [[1, -0.5], [-0.5, 1]])
    assert np.array_equal(rd.A, [[2, -1], [-1, 2]])
    assert np.array_equal(build_reflection_data(SystemSpec.atlas(4), 4).mu, [-1, 0, 0])


def test_asymmetric_reflection_entries():
    spec = SystemSpec(4, fin(1, 0, 0, 0), fin(1, 2, 3, 4), fin(0.5, 0.7, 0.8, 0.9),
                      fin(0.3, 0.2, 0.1, 0.4))
    rd = build_reflection_data(spec, 4)
    assert np.allclose(rd.R_upper, [-0.2, -0.1])    # -q-_2, -q-_3
    assert np.allclose(rd.R_lower, [-0.7, -0.8])    # -q+_2, -q+_3
    assert np.allclose(np.diag(rd.A), [3, 5, 7])
    assert np.allclose(np.diag(rd.A, 1), [-2, -3])


def test_chain_condition_balances_interior_columns():
    # column k holds -q-_{k+1} and -q+_{k+2}, which sum to -1 under the chain condition
    rng = np.random.default_rng(0)
    for _ in range(50):
        spec = random_chain_spec(rng)
        sums = build_reflection_data(spec, spec.size).R.sum(axis=0)
        assert np.allclose(sums[1:-1], 0.0, atol=1e-12)
        assert np.all(sums > -1e-12)


def test_tightness_examples():
    t = tightness_check(build_reflection_data(SystemSpec.atlas(3), 3))
    assert t.tight
    assert np.allclose(t.neg_Rinv_mu, [4 / 3, 2 / 3], rtol=1e-14)
    t = tightness_check(build_reflection_data(SystemSpec.atlas(4), 4))
    assert np.allclose(t.neg_Rinv_mu, [1.5, 1.0, 0.5], rtol=1e-14)
    zero = SystemSpec(4, fin(0, 0, 0, 0), fin(1, 1, 1, 1))
    t = tightness_check(build_reflection_data(zero, 4))
    assert not t.tight and t.indeterminate


def test_closed_form_examples():
    assert np.allclose(closed_form_neg_Rinv_mu_symmetric(SystemSpec.atlas(4), 4), [1.5, 1.0, 0.5])
    c = SystemSpec(5, SeqRule.constant(0.7), SeqRule.constant(1.0))
    assert np.allclose(closed_form_neg_Rinv_mu_symmetric(c, 5), 0.0, atol=1e-15)
    s = SystemSpec(3, fin(2, 1, 0), fin(1, 1, 1))
    assert np.allclose(closed_form_neg_Rinv_mu_symmetric(s, 3), [2, 2])
    assert np.allclose(tightness_check(build_reflection_data(s, 3)).neg_Rinv_mu, [2, 2])
    asym = SystemSpec(3, fin(1, 0, 0), fin(1, 1, 1), fin(0.4, 0.6, 0.6), fin(0.4, 0.4, 0.4))
    with pytest.raises(NotSymmetricError):
        closed_form_neg_Rinv_mu_symmetric(asym, 3)


def test_thomas_matches_dense_solve():
    rng = np.random.default_rng(1)
    for _ in range(100):
        spec = random_chain_spec(rng, n_max=40)
        rd = build_reflection_data(spec, spec.size)
        b = rng.standard_normal(rd.N - 1)
        x = solve_tridiagonal(rd.R_lower, np.ones(rd.N - 1), rd.R_upper, b)
        assert np.allclose(x, np.linalg.solve(rd.R, b), rtol=1e-10, atol=1e-12)


def test_thomas_reports_zero_pivot():
    with pytest.raises(SingularError):
        solve_tridiagonal(np.array([1.0]), np.array([1.0, 1.0]), np.array([1.0]),
                          np.array([1.0, 2.0]))


def test_inverse_reflection_is_nonnegative():
    rng = np.random.default_rng(2)
    for _ in range(100):
        spec = random_chain_spec(rng, n_max=20)
        Rinv = np.linalg.inv(build_reflection_data(spec, spec.size).R)
        assert np.all(Rinv >= -1e-12)


def test_skew_symmetry_examples():
    assert skew_symmetry_check(SystemSpec(3, fin(1, 0, 0), fin(1, 2, 3)), 3)
    assert not skew_symmetry_check(SystemSpec(3, fin(1, 0, 0), fin(1, 1, 3)), 3)
    for s2 in ((1, 5), (7, 0.5)):
        assert skew_symmetry_check(SystemSpec(2, fin(1, 0), fin(*s2)), 2)


def test_skew_symmetry_constant_sigma_asymmetric():
    p = 0.3
    ss = SystemSpec(5, fin(1, 0, 0, 0, 0), SeqRule.constant(1.0),
                    SeqRule.constant(p), SeqRule.constant(1 - p))
    assert skew_symmetry_check(ss, 5)
    per_k, mat = skew_symmetry_residuals(ss, 5)
    assert np.all(np.abs(per_k) < 1e-14) and mat < 1e-14


def test_skew_symmetry_exact_with_fractions():
    spec = SystemSpec(4, fin(1, 0, 0, 0), fin(Fraction(1), Fraction(3, 2), Fraction(2), Fraction(5, 2)))
    per_k, _ = skew_symmetry_residuals(spec, 4)
    assert np.all(per_k == 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_skew_symmetry_criteria_agree(seed):
    spec = random_chain_spec(np.random.default_rng(seed))
    skew_symmetry_check(spec, spec.size)   # raises if the two criteria disagree


def test_stationary_rates_atlas():
    law = stationary_rates(SystemSpec.atlas(5), 5)
    assert law.status == "OK"
    assert np.allclose(law.rates, [1.6, 1.2, 0.8, 0.4], rtol=1e-14)
    assert np.allclose(law.means, [0.625, 5 / 6, 1.25, 2.5], rtol=1e-14)
    law = stationary_rates(SystemSpec.atlas(4), 4)
    assert np.allclose(law.rates, [1.5, 1.0, 0.5])


def test_stationary_rates_m_atlas():
    law = stationary_rates(SystemSpec.m_atlas(2), 6)
    assert law.rates[0] == pytest.approx(4 / 3, rel=1e-14)


def test_stationary_status_codes():
    zero = SystemSpec(4, fin(0, 0, 0, 0), fin(1, 1, 1, 1))
    assert stationary_rates(zero, 4).status == "NOT_TIGHT"
    assert stationary_rates(zero, 4).rates is None
    non_ss = SystemSpec(3, fin(1, 0, 0), fin(1, 1, 3))
    assert stationary_rates(non_ss, 3).status == "NOT_SKEW_SYMMETRIC"
    with pytest.raises(ValueError):
        stationary_rates(non_ss, 3).means


def test_stationary_density_solves_basic_adjoint_relation():
    # the product density exp(-<lambda, z>) is stationary for a skew-symmetric
    # SRBM exactly when R (lambda * diag(A) / 2) = -mu
    rng = np.random.default_rng(3)
    for _ in range(50):
        spec = random_symmetric_spec(rng, n_max=20)
        law = stationary_rates(spec, spec.size)
        if law.rates is None:
            continue
        rd = build_reflection_data(spec, spec.size)
        lhs = rd.R @ (law.rates * np.diag(rd.A) / 2)
        assert np.allclose(lhs, -rd.mu, rtol=1e-10, atol=1e-12)


def test_random_symmetric_closed_form_agreement():
    rng = np.random.default_rng(4)
    for _ in range(200):
        spec = random_symmetric_spec(rng)
        N = spec.size
        got = tightness_check(build_reflection_data(spec, N)).neg_Rinv_mu
        want = closed_form_neg_Rinv_mu_symmetric(spec, N)
        assert np.max(np.abs(got - want)) <= 1e-10 * np.max(np.abs(want))
