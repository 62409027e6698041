import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wealthdual import nagent as N
from wealthdual.errors import AsymmetricKernel, AsymmetricMean, RowSumViolation
from wealthdual.exchange import ModelParams, WealthPair, simulate
from wealthdual.measures import Beta, ParetoType, Uniform
from wealthdual.stats import mean_stderr


def test_build_walk_examples():
    k = N.build_walk([[0, 1], [1, 0]])
    assert k.size == 2
    i, j, rate = k.pairs()
    assert list(i) == [0] and list(j) == [1] and list(rate) == [2.0]
    with pytest.raises(AsymmetricKernel):
        N.build_walk([[0.5, 0.5], [0.2, 0.8]])
    with pytest.raises(RowSumViolation):
        N.build_walk([[0, 0.9], [0.9, 0]])
    with pytest.raises(ValueError):
        N.build_walk([[0, 1, 0], [1, 0, 0]])


def test_ring_and_complete():
    r = N.ring(10)
    assert np.allclose(r.p.sum(axis=1), 1.0)
    assert len(r.pairs()[0]) == 10
    assert np.array_equal(N.ring(2).p, [[0, 1], [1, 0]])
    c = N.complete(4)
    assert len(c.pairs()[0]) == 6
    assert np.allclose(c.pairs()[2], 2 / 3)


def test_two_agents_pathwise_equal_to_pair_process():
    # the only pair of the 2-ring rings at rate 2 and consumes the same draws
    lam = 0.3
    a = N.simulate_nagent([0.4, 1.1], lam, Uniform(), N.ring(2), 5.0, np.random.default_rng(0))
    b = simulate(WealthPair(0.4, 1.1), ModelParams(lam, jump_rate=2.0), Uniform(), 5.0,
                 np.random.default_rng(0))
    assert len(a) == len(b)
    for (ta, xa), (tb, pb) in zip(a, b):
        assert ta == tb
        assert xa[0] == pytest.approx(pb.x, abs=1e-14)
        assert xa[1] == pytest.approx(pb.y, abs=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 8), st.floats(0.0, 0.95), st.integers(0, 2**31))
def test_total_wealth_conserved(n, lam, seed):
    x0 = np.random.default_rng(seed).random(n)
    traj = N.simulate_nagent(x0, lam, Beta(2, 2), N.ring(n), 3.0, np.random.default_rng(seed))
    for _, x in traj:
        assert abs(x.sum() - x0.sum()) <= 1e-12 * x0.sum()
        assert np.all(x >= 0)
    ends, _ = N.nagent_endpoints(x0, lam, Beta(2, 2), N.complete(n), 3.0, 50, seed=seed)
    assert np.allclose(ends.sum(axis=1), x0.sum(), rtol=1e-12, atol=0)


def test_endpoints_independent_of_threads():
    x0 = np.eye(6)[0]
    a, ea = N.nagent_endpoints(x0, 0.5, Uniform(), N.ring(6), 2.0, 20_000, seed=1)
    b, eb = N.nagent_endpoints(x0, 0.5, Uniform(), N.ring(6), 2.0, 20_000, seed=1, threads=3)
    assert np.array_equal(a, b) and np.array_equal(ea, eb)


def test_event_rate():
    _, ev = N.nagent_endpoints(np.ones(5), 0.2, Uniform(), N.ring(5), 2.0, 20_000, seed=2)
    # five pairs, each at rate 2 * 1/2
    m, se = mean_stderr(ev)
    assert abs(m - 5 * 2.0) < 3 * se


def test_measure_validation():
    with pytest.raises(AsymmetricMean):
        N.nagent_endpoints(np.ones(3), 0.2, Beta(2, 3), N.ring(3), 1.0, 10)
    with pytest.raises(ValueError):
        N.nagent_endpoints(np.ones(3), 0.2, ParetoType(1.0), N.ring(3), 1.0, 10)
    with pytest.raises(ValueError):
        N.simulate_nagent(np.ones(4), 0.2, Uniform(), N.ring(3), 1.0, np.random.default_rng(0))


# --- heat kernel ---------------------------------------------------------------

def test_heat_kernel_two_sites():
    for t in (0.0, 0.3, 1.0, 7.5, 40.0):
        h = N.heat_kernel(N.ring(2), t)
        assert h[0, 0] == pytest.approx((1 + math.exp(-2 * t)) / 2, abs=1e-12)


def test_heat_kernel_matches_expm():
    from scipy.linalg import expm

    for k in (N.ring(10), N.complete(5)):
        for t in (0.5, 3.0, 25.0):
            ref = expm(t * (k.p - np.eye(k.size)))
            assert np.max(np.abs(N.heat_kernel(k, t) - ref)) < 1e-12


def test_heat_kernel_stochastic_and_semigroup():
    k = N.ring(7)
    a, b = N.heat_kernel(k, 0.8), N.heat_kernel(k, 1.7)
    assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(a >= 0)
    assert np.max(np.abs(a @ b - N.heat_kernel(k, 2.5))) < 1e-12
    with pytest.raises(ValueError):
        N.heat_kernel(k, -1.0)


def test_propensity_is_a_time_change():
    k = N.ring(10)
    x0 = np.eye(10)[0]
    for lam, lam2, t in [(0.5, 0.2, 1.0), (0.0, 0.9, 0.3), (0.7, 0.1, 4.0)]:
        a = N.mean_profile(x0, lam, k, t)
        b = N.mean_profile(x0, lam2, k, t * (1 - lam) / (1 - lam2))
        assert np.max(np.abs(a - b)) < 1e-12


# --- expected wealth -------------------------------------------------------------

def test_expected_wealth_two_agents_closed_form():
    rows = N.expected_wealth_check([1.0, 0.0], 0.5, N.ring(2), 1.0, 100_000, Uniform(), seed=3)
    assert rows[0].analytic == pytest.approx((1 + math.exp(-2 * 0.5)) / 2, abs=1e-12)
    assert all(r.passed for r in rows)


def test_expected_wealth_ring():
    rows = N.expected_wealth_check(np.eye(10)[0], 0.5, N.ring(10), 1.0, 50_000, Beta(2, 2),
                                   seed=4, sigma=4)
    assert all(r.passed for r in rows)


def test_expected_wealth_at_zero_time():
    rows = N.expected_wealth_check([0.2, 0.5, 0.3], 0.4, N.complete(3), 0.0, 10, Uniform())
    assert [r.mc_mean for r in rows] == [0.2, 0.5, 0.3]
    assert all(r.passed and r.stderr == 0 for r in rows)


def test_uniform_profile_stays_flat():
    rows = N.expected_wealth_check(np.ones(6), 0.3, N.ring(6), 2.0, 20_000, Uniform(), seed=5)
    assert all(r.analytic == pytest.approx(1.0, abs=1e-12) for r in rows)
    assert all(r.passed for r in rows)


def test_exchangeable_agents():
    # agents 1 and 9 sit symmetrically around the unit mass on the ring
    ends, _ = N.nagent_endpoints(np.eye(10)[0], 0.5, Uniform(), N.ring(10), 1.5, 50_000, seed=6)
    d, se = mean_stderr(ends[:, 1] - ends[:, 9])
    assert abs(d) < 3 * se


# --- harmonicity ---------------------------------------------------------------

def test_harmonic_for_iid_configurations():
    res = N.harmonicity_check(lambda g, n: g.exponential(size=(n, 8)), N.ring(8), 50_000, seed=7)
    assert res.max_z() < 4


def test_harmonic_after_long_run():
    k = N.ring(6)
    x0 = np.eye(6)[0] * 6

    def sampler(g, n):
        return N.nagent_endpoints(x0, 0.5, Uniform(), k, 40.0, n, seed=g)[0]

    assert N.harmonicity_check(sampler, k, 20_000, seed=8).max_z() < 4


def test_unit_mass_is_not_harmonic():
    res = N.harmonicity_check(lambda g, n: np.tile(np.eye(5)[0], (n, 1)), N.ring(5), 100, seed=9)
    assert res.max_z() > 5
    assert res.residual[0] == pytest.approx(-1.0)
