import math

import numpy as np
import pytest
from scipy import special

from wealthdual import duality as D
from wealthdual import stationary as S
from wealthdual.errors import SDependentMeasure, UnnormalizedTotal
from wealthdual.measures import Beta, ParetoType, Uniform, moment_nm


def rng(seed):
    return np.random.default_rng(seed)


# --- energy dual ------------------------------------------------------------

def test_generator_coeffs_uniform_11():
    a = D.energy_generator_coeffs(Uniform(), 1, 1)
    assert a[(0, 2)] == pytest.approx(1 / 6)
    assert a[(2, 0)] == pytest.approx(1 / 6)
    assert a[(1, 1)] == pytest.approx(2 / 6 - 1)


def test_generator_coeffs_trivial_row_and_sum():
    assert D.energy_generator_coeffs(Uniform(), 0, 0) == {(0, 0): 0.0}
    for n, m in [(2, 1), (0, 3), (2, 2)]:
        a = D.energy_generator_coeffs(Beta(2, 3), n, m)
        N = n + m
        assert sum(a.values()) == pytest.approx(moment_nm(Beta(2, 3), n, m) * 2**N - 1, abs=1e-14)
    with pytest.raises(SDependentMeasure):
        D.energy_generator_coeffs(ParetoType(1.0), 1, 1)


def test_c_moments():
    expo = D.ProductGamma(1.0)
    assert D.c_moments(expo, 2, 1) == pytest.approx(2.0)
    assert D.c_moments(expo, 0, 0) == 1.0
    assert D.c_moments(D.ProductGamma(2.0), 1, 1) == pytest.approx(4.0)
    mc = D.c_moments(D.SampledReference(D.ProductGamma(2.0).sample, 10**6, seed=1), 1, 1)
    assert mc == pytest.approx(4.0, rel=0.01)


def test_kmp_rates_uniform():
    ct = D.reference_table(Uniform(), 6)
    for level in range(1, 7):
        table = D.energy_dual_rates(Uniform(), ct, level)
        assert len(table.rates) == level * (level + 1)
        for q in table.rates.values():
            assert abs(q - 1.0 / (level + 1)) <= 1e-12
    assert D.energy_dual_rates(Uniform(), ct, 0).rates == {}


def test_beta_gamma_rates_brute_force():
    nu = Beta(2, 2)
    ct = D.MomentTable.product_gamma(2.0, 5)
    for level in range(1, 6):
        table = D.energy_dual_rates(nu, ct, level)
        for (src, tgt), q in table.rates.items():
            n, m = src
            k = tgt[0]
            nu_nm = special.beta(2 + n, 2 + m) / special.beta(2, 2)
            c = lambda i, j: special.gamma(2 + i) * special.gamma(2 + j)
            brute = math.comb(level, k) * nu_nm * c(k, level - k) / c(n, m)
            assert abs(q - brute) < 1e-10


def test_generator_rows_sum_to_zero_only_for_product_moments():
    nu = Beta(3, 3)
    good = D.MomentTable.product_gamma(3.0, 4)
    recip = D.MomentTable({key: 1.0 / v for key, v in good.c.items()})
    # level 1 is symmetric and passes for either orientation
    for n, m in [(2, 0), (2, 1), (1, 3)]:
        a = D.energy_generator_coeffs(nu, n, m)
        row_good = sum(v * good.c[k] for k, v in a.items()) / good.c[(n, m)]
        row_bad = sum(v * recip.c[k] for k, v in a.items()) / recip.c[(n, m)]
        assert abs(row_good) < 1e-12
        assert abs(row_bad) > 0.01


def test_duality_fn_energy():
    ct = D.reference_table(Uniform(), 3)
    assert D.duality_fn_energy(ct, 0, 0, 2.0, 3.0) == 1.0
    assert D.duality_fn_energy(ct, 1, 1, 2.0, 3.0) == pytest.approx(6.0)
    assert D.duality_fn_energy(ct, 2, 1, 0.0, 3.0) == 0.0


def test_energy_dual_level_conserved_and_uniform_occupation():
    ct = D.reference_table(Uniform(), 2)
    table = D.energy_dual_rates(Uniform(), ct, 2)
    traj = D.simulate_dual(table, (2, 0), 30_000.0, rng(0))
    assert all(s.n + s.m == 2 for _, s in traj)
    occ = dict.fromkeys(table.states, 0.0)
    for (t0, s), (t1, _) in zip(traj, traj[1:]):
        occ[s] += t1 - t0
    total = sum(occ.values())
    for v in occ.values():
        assert abs(v / total - 1 / 3) < 0.01


def test_zero_state_constant():
    table = D.energy_dual_rates(Uniform(), D.reference_table(Uniform(), 0), 0)
    traj = D.simulate_dual(table, (0, 0), 5.0, rng(1))
    assert [s for _, s in traj] == [(0, 0), (0, 0)]


# --- wealth dual ------------------------------------------------------------

def test_wealth_rates_r_example_and_exit_rate():
    rates = D.wealth_dual_rates_r(0.5, Uniform(), None, 1)
    assert rates == {0: pytest.approx(0.5)}
    for lam in (0.1, 0.5, 0.8):
        for nu in (Uniform(), Beta(2, 5)):
            for n in range(1, 7):
                total = sum(D.wealth_dual_rates_r(lam, nu, None, n).values())
                assert abs(total - (1 - lam**n)) < 1e-10


def test_wealth_rates_freeze_as_lambda_to_one():
    rates = D.wealth_dual_rates_r(1 - 1e-9, Uniform(), None, 3)
    assert max(rates.values()) < 1e-7


def test_wealth_rates_2d_examples():
    a = S.alpha_moments(0.5, Uniform(), 6)
    r = D.wealth_dual_rates_2d(0.5, Uniform(), a, (1, 0))
    assert r == {(0, 0): pytest.approx(0.5)}
    a0 = S.alpha_moments(0.0, Beta(2, 3), 6)
    r0 = D.wealth_dual_rates_2d(0.0, Beta(2, 3), a0, (2, 1))
    assert {k for k, v in r0.items() if v > 0} == {(0, 0)}
    assert r0[(0, 0)] == pytest.approx(moment_nm(Beta(2, 3), 2, 1) / S.alpha_joint(0.0, Beta(2, 3), 2, 1, a0))


def test_wealth_rates_2d_symmetry_and_exit():
    nu = Beta(2, 2)
    a = S.alpha_moments(0.4, nu, 8)
    for n1, n2 in [(2, 1), (3, 0), (2, 2), (1, 3)]:
        q = D.wealth_dual_rates_2d(0.4, nu, a, (n1, n2))
        q_swap = D.wealth_dual_rates_2d(0.4, nu, a, (n2, n1))
        for (k1, k2), v in q.items():
            assert v == pytest.approx(q_swap[(k2, k1)], rel=1e-12)
            assert v >= 0
        assert sum(q.values()) == pytest.approx(1 - 0.4 ** (n1 + n2), abs=1e-10)


def test_wealth_dual_total_non_increasing_and_absorbed():
    table = D.wealth_dual_table(0.5, Uniform(), (3, 0))
    r = rng(2)
    times = []
    for _ in range(300):
        traj = D.simulate_dual(table, (3, 0), 1e6, r)
        totals = [s.n + s.m for _, s in traj]
        assert all(a >= b for a, b in zip(totals, totals[1:]))
        assert traj[-1][1] == (0, 0)
        times.append(traj[-2][0])
    assert np.isfinite(np.mean(times))


def test_exact_expectation_matches_monte_carlo_dual():
    a = S.alpha_moments(0.5, Uniform(), 3)
    table = D.wealth_dual_table(0.5, Uniform(), (2, 1), a)
    f = lambda n, m: D.duality_fn_wealth(a, n, m, 0.3, 0.7)
    exact = D.exact_dual_expectation(table, (2, 1), 1.0, f)
    ends = D.dual_endpoints(table, (2, 1), 1.0, 200_000, seed=3)
    mc, se = D._dual_side(lambda n, m, x, y: D.duality_fn_wealth(a, n, m, x, y), ends, 0.3, 0.7)
    assert abs(mc - exact) < 3 * se


# --- duality checks -----------------------------------------------------------

def test_duality_check_kmp_11():
    r = D.duality_check("energy", 1.0, 1.0, 1, 1, 1.0, 10**6, seed=4)
    assert r.passed


def test_duality_check_trivial_cases():
    r = D.duality_check("energy", 0.4, 2.0, 0, 0, 1.0, 1000, seed=5)
    assert r.lhs == r.rhs == 1.0
    r = D.duality_check("wealth", 0.4, 0.6, 2, 1, 0.0, 1000, seed=5)
    assert r.lhs == r.rhs and r.stderr_lhs == 0.0


def test_wealth_duality_requires_unit_total():
    with pytest.raises(UnnormalizedTotal):
        D.duality_check("wealth", 0.4, 0.7, 1, 0, 1.0, 100)


def test_duality_sweep_small():
    res = D.duality_sweep("energy", 0.7, 1.3, 3, [0.5, 1.5], 100_000, seed=6)
    assert len(res) == 2 * 10
    assert all(r.passed for r in res)
    res = D.duality_sweep("energy", 0.7, 1.3, 2, [1.0], 50_000, measure=Beta(2, 2), seed=7)
    assert all(r.passed for r in res)


def test_wealth_sweep_beta():
    res = D.duality_sweep("wealth", 0.25, 0.75, 3, [1.0], 100_000, measure=Beta(2, 2), lam=0.3,
                          seed=8)
    assert all(r.passed for r in res)


# --- harmonicity and factorisation -------------------------------------------

def test_harmonic_profile_reference_measure():
    ct = D.reference_table(Uniform(), 4)
    prof = D.harmonic_profile(D.ProductGamma(1.0).sample, ct, 3, 10**6, seed=9)
    for mean, se in prof.values():
        assert abs(mean - 1.0) < 3 * se


def test_harmonic_profile_canonical_constant():
    ct = D.reference_table(Uniform(), 4)
    sampler = lambda g, n: S.sample_canonical_energy(2.0, Uniform(), g, n)
    for level in range(1, 5):
        prof = D.harmonic_profile(sampler, ct, level, 10**6, seed=10)
        target = 2.0**level / math.factorial(level + 1)
        for mean, se in prof.values():
            assert abs(mean - target) < 4 * se


def test_harmonic_profile_non_invariant():
    ct = D.reference_table(Uniform(), 4)
    sampler = lambda g, n: (np.full(n, 2.0) + 0.01 * g.random(n), np.full(n, 0.5))
    prof = D.harmonic_profile(sampler, ct, 2, 10_000, seed=11)
    means = [m for m, _ in prof.values()]
    ses = [se for _, se in prof.values()]
    assert max(means) - min(means) > 5 * max(ses)


def test_factorization_product_gamma_exact():
    for k in (1.0, 2.0, 3.5):
        c = D.MomentTable.product_gamma(k, 6).c
        for n in range(4):
            for m in range(4):
                assert abs(c[(n, m)] * c[(0, 0)] - c[(n, 0)] * c[(0, m)]) < 1e-10 * c[(n, m)]


def test_factorization_fails_for_positive_lambda():
    spec = S.GrandCanonicalSpec(S.GammaLaw(2.0))
    x, y = S.sample_grand_canonical(spec, 0.5, Uniform(), rng=rng(12), size=10**6)
    defect, se = D.factorization_defect(x, y, 1, 1)
    assert abs(defect) > 5 * se
    x, y = S.sample_grand_canonical(spec, 0.0, Uniform(), rng=rng(13), size=10**6)
    defect, se = D.factorization_defect(x, y, 1, 1)
    assert abs(defect) < 3 * se
