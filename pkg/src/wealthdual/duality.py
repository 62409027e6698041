"""Discrete dual chains of the two-agent models.

Energy model (s-independent nu).  The generator maps f_nm = x^n y^m to
``sum_k a_{nm;k,N-k} f_{k,N-k}`` with N = n + m,
``a_{nm;k,N-k} = C(N,k) nu_nm - [k = n]``.  Given moments c_nm of an
invariant measure mu0, ``q_{nm,rs} = a_{nm;rs} c_rs / c_nm`` are the rates of a
chain on the level set {n + m = N} and ``D(n,m;x,y) = x^n y^m / c_nm`` is a
duality function.

Wealth model.  On r = x / s, ``K(n1,n2;r) = r^n1 (1-r)^n2`` is mapped to
lower-order K's; the dual jumps *down* from (n1,n2) to (k1,k2) <= (n1,n2) at
rate ``A(k,n) alpha(k) / alpha(n)`` where alpha are mixed moments of the
stationary law eps_inf.  The total n1 + n2 never increases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import expm

from . import kernels
from .errors import SDependentMeasure, UnnormalizedTotal
from .exchange import ModelParams, simulate_endpoints
from .measures import Beta, RedistributionMeasure, Uniform, moment_nm
from .stationary import GammaLaw, GrandCanonicalSpec, alpha_moments, sample_grand_canonical
from .stats import mean_stderr
from .trials import as_seed, block_rng, run_blocks


class DualState(NamedTuple):
    n: int
    m: int


@dataclass
class DualRateTable:
    """Off-diagonal jump rates of a finite dual chain.

    ``rates[(state, target)]`` is the rate of jumping from ``state`` to
    ``target``; the diagonal is implied (minus the exit rate).  ``level`` is
    the conserved total for energy duals and ``None`` for wealth duals.
    """

    states: list
    rates: dict
    level: int | None = None
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.states = [DualState(*s) for s in self.states]
        self._index = {s: i for i, s in enumerate(self.states)}
        for (a, b), q in self.rates.items():
            if a == b:
                raise ValueError("diagonal entries are implied, not stored")
            if q < 0:
                raise ValueError(f"negative rate {q} for {a} -> {b}")

    def index(self, state) -> int:
        return self._index[DualState(*state)]

    def generator(self) -> np.ndarray:
        k = len(self.states)
        g = np.zeros((k, k))
        for (a, b), q in self.rates.items():
            g[self._index[a], self._index[b]] += q
        g[np.diag_indices(k)] = -g.sum(axis=1)
        return g

    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.generator())

    def jump_tables(self):
        """Exit rates and row-wise cumulative jump probabilities for the kernel."""
        g = self.generator()
        q = -np.diag(g).copy()
        off = g.copy()
        np.fill_diagonal(off, 0.0)
        cum = np.zeros_like(off)
        for i in range(len(q)):
            if q[i] > 0:
                row = np.cumsum(off[i]) / q[i]
                last = int(np.flatnonzero(off[i] > 0)[-1])
                row[last:] = 1.0
                cum[i] = row
        return np.ascontiguousarray(q), np.ascontiguousarray(cum)

    def transition_matrix(self, t: float) -> np.ndarray:
        return expm(self.generator() * t)


# ---------------------------------------------------------------------------
# moment tables / reference measures


@dataclass
class MomentTable:
    """Moments c_nm of a reference invariant measure, or eps_inf moments.

    ``c`` maps (n, m) to c_nm (with ``c_se`` its Monte Carlo standard error,
    zero when analytic).  ``alpha`` holds alpha_0..alpha_K for the wealth dual.
    """

    c: dict = field(default_factory=dict)
    c_se: dict = field(default_factory=dict)
    alpha: np.ndarray | None = None
    lam: float | None = None

    @classmethod
    def product_gamma(cls, shape: float, max_level: int, rate: float = 1.0) -> "MomentTable":
        """c_nm = Gamma(k+n) Gamma(k+m) / (Gamma(k)^2 rate^(n+m))."""
        c = {}
        for n in range(max_level + 1):
            for m in range(max_level + 1 - n):
                c[(n, m)] = c_moments(ProductGamma(shape, rate), n, m)
        return cls(c, {key: 0.0 for key in c})

    @classmethod
    def from_samples(cls, x, y, max_level: int) -> "MomentTable":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c, se = {}, {}
        for n in range(max_level + 1):
            for m in range(max_level + 1 - n):
                c[(n, m)], se[(n, m)] = mean_stderr(x**n * y**m)
        c[(0, 0)], se[(0, 0)] = 1.0, 0.0
        return cls(c, se)

    @classmethod
    def wealth(cls, lam: float, measure: RedistributionMeasure, max_level: int) -> "MomentTable":
        return cls(alpha=alpha_moments(lam, measure, max_level), lam=lam)

    def alpha_joint(self, i: int, j: int) -> float:
        a = self.alpha
        return math.fsum(math.comb(j, k) * (-1) ** k * a[i + k] for k in range(j + 1))


@dataclass(frozen=True)
class ProductGamma:
    """Product of two Gamma(shape, rate) laws; shape 1 is the exponential."""

    shape: float = 1.0
    rate: float = 1.0

    def sample(self, rng, size):
        return (rng.gamma(self.shape, 1.0 / self.rate, size),
                rng.gamma(self.shape, 1.0 / self.rate, size))


@dataclass(frozen=True)
class SampledReference:
    """An invariant measure known only through a sampler ``f(rng, size) -> (x, y)``."""

    sampler: Callable
    n_samples: int = 10**6
    seed: int = 0

    def sample(self, rng, size):
        return self.sampler(rng, size)


def c_moments(mu0, n: int, m: int) -> float:
    """c_nm = int x^n y^m mu0(dx dy); analytic for ``ProductGamma``."""
    if n == 0 and m == 0:
        return 1.0
    if isinstance(mu0, ProductGamma):
        k = mu0.shape
        lg = math.lgamma
        return math.exp(lg(k + n) + lg(k + m) - 2 * lg(k)) / mu0.rate ** (n + m)
    rng = np.random.default_rng(mu0.seed)
    x, y = mu0.sample(rng, mu0.n_samples)
    return mean_stderr(np.asarray(x) ** n * np.asarray(y) ** m)[0]


def reference_table(measure: RedistributionMeasure, max_level: int, n_samples: int = 10**6,
                    seed: int = 0) -> MomentTable:
    """Default reference moments: exponential product for Uniform, Gamma(k) product
    for Beta(k, k), grand-canonical Monte Carlo (S ~ Gamma(2, 1)) otherwise."""
    if isinstance(measure, Uniform):
        return MomentTable.product_gamma(1.0, max_level)
    if isinstance(measure, Beta) and measure.a == measure.b:
        return MomentTable.product_gamma(measure.a, max_level)
    rng = np.random.default_rng(seed)
    x, y = sample_grand_canonical(GrandCanonicalSpec(GammaLaw(2.0)), 0.0, measure,
                                  rng=rng, size=n_samples)
    return MomentTable.from_samples(x, y, max_level)


# ---------------------------------------------------------------------------
# energy model dual


def energy_generator_coeffs(measure: RedistributionMeasure, n: int, m: int) -> dict:
    """Coefficients a_{nm;k,N-k} of L f_nm in the basis f_{k,N-k}."""
    if measure.s_dependent:
        raise SDependentMeasure("energy dual requires an s-independent measure")
    N = n + m
    nu = moment_nm(measure, n, m)
    out = {DualState(k, N - k): math.comb(N, k) * nu for k in range(N + 1)}
    out[DualState(n, m)] -= 1.0
    return out


def energy_dual_rates(measure: RedistributionMeasure, ctable: MomentTable, level: int) -> DualRateTable:
    """Dual chain on {(k, level - k)} with q_{nm,rs} = a_{nm;rs} c_rs / c_nm."""
    states = [DualState(k, level - k) for k in range(level + 1)]
    rates = {}
    if level > 0:
        for st in states:
            a = energy_generator_coeffs(measure, *st)
            for tgt in states:
                if tgt != st:
                    rates[(st, tgt)] = a[tgt] * ctable.c[tgt] / ctable.c[st]
    return DualRateTable(states, rates, level)


def duality_fn_energy(ctable: MomentTable, n: int, m: int, x, y):
    return np.asarray(x, dtype=float) ** n * np.asarray(y, dtype=float) ** m / ctable.c[(n, m)]


# ---------------------------------------------------------------------------
# wealth model dual


def _alpha_of(alpha, lam, measure, n):
    if isinstance(alpha, MomentTable):
        return alpha.alpha
    if alpha is None:
        return alpha_moments(lam, measure, n)
    return np.asarray(alpha)


def wealth_dual_rates_r(lam: float, measure: RedistributionMeasure, alpha, n: int) -> dict:
    """Rates n -> k (k < n) of the dual of the r-process with D(n, r) = r^n / alpha_n."""
    a = _alpha_of(alpha, lam, measure, n)
    return {k: a[k] / a[n] * math.comb(n, k) * lam**k * (1.0 - lam) ** (n - k)
            * moment_nm(measure, n - k, 0) for k in range(n)}


def _alpha2(a, i, j):
    return math.fsum(math.comb(j, k) * (-1) ** k * a[i + k] for k in range(j + 1))


def wealth_dual_rates_2d(lam: float, measure: RedistributionMeasure, alpha, state) -> dict:
    """Rates (n1, n2) -> (k1, k2), k <= n componentwise, k != n.

    Q = A(k, n) alpha(k1, k2) / alpha(n1, n2) with
    A = C(n1,k1) C(n2,k2) lam^(k1+k2) (1-lam)^(n1+n2-k1-k2) nu_{n1-k1, n2-k2}.
    """
    n1, n2 = state
    a = _alpha_of(alpha, lam, measure, n1 + n2)
    an = _alpha2(a, n1, n2)
    out = {}
    for k1 in range(n1 + 1):
        for k2 in range(n2 + 1):
            if (k1, k2) == (n1, n2):
                continue
            big_a = (math.comb(n1, k1) * math.comb(n2, k2) * lam ** (k1 + k2)
                     * (1.0 - lam) ** (n1 + n2 - k1 - k2) * moment_nm(measure, n1 - k1, n2 - k2))
            out[DualState(k1, k2)] = big_a * _alpha2(a, k1, k2) / an
    return out


def wealth_dual_table(lam: float, measure: RedistributionMeasure, top, alpha=None) -> DualRateTable:
    """Dual chain on {(k1, k2) <= top} for the wealth model."""
    n1, n2 = top
    a = _alpha_of(alpha, lam, measure, n1 + n2)
    states = [DualState(k1, k2) for k1 in range(n1 + 1) for k2 in range(n2 + 1)]
    rates = {}
    for st in states:
        for tgt, q in wealth_dual_rates_2d(lam, measure, a, st).items():
            if q > 0:
                rates[(st, tgt)] = q
    return DualRateTable(states, rates, None)


def duality_fn_wealth(alpha, n1: int, n2: int, x, y):
    """x^n1 y^n2 / alpha(n1, n2); equals r^n1 (1-r)^n2 / alpha(n1, n2) when x + y = 1."""
    a = alpha.alpha if isinstance(alpha, MomentTable) else np.asarray(alpha)
    return np.asarray(x, dtype=float) ** n1 * np.asarray(y, dtype=float) ** n2 / _alpha2(a, n1, n2)


# ---------------------------------------------------------------------------
# simulation


def simulate_dual(table: DualRateTable, initial, t_end: float, rng: np.random.Generator):
    """Single trajectory [(time, DualState), ...] of the dual chain."""
    state = DualState(*initial)
    q, cum = table.jump_tables()
    traj = [(0.0, state)]
    t = 0.0
    i = table.index(state)
    while q[i] > 0:
        t += -math.log1p(-rng.random()) / q[i]
        if t > t_end:
            break
        i = min(int(np.searchsorted(cum[i], rng.random(), side="right")), len(q) - 1)
        traj.append((t, table.states[i]))
    if traj[-1][0] != t_end:
        traj.append((float(t_end), table.states[i]))
    return traj


def dual_endpoints(table: DualRateTable, initial, t_end: float, trials: int, seed=0,
                   threads: int = 1, stream: int = 0):
    """Final states (as an (trials, 2) int array) of independent dual runs."""
    q, cum = table.jump_tables()
    start = table.index(initial)
    seed = as_seed(seed)

    def block(lo, hi, rng):
        s0 = np.full(hi - lo, start, dtype=np.int64)
        return kernels.ctmc_endpoints(s0, q, cum, float(t_end), rng)

    idx, _ = run_blocks(trials, seed, block, stream=stream, threads=threads)
    return np.asarray(table.states, dtype=np.int64)[idx]


@dataclass
class DualityResult:
    model: str
    n: int
    m: int
    t: float
    lhs: float
    rhs: float
    stderr_lhs: float
    stderr_rhs: float
    sigma: float = 3.0

    @property
    def passed(self) -> bool:
        diff = abs(self.lhs - self.rhs)
        return diff == 0.0 or diff < self.sigma * (self.stderr_lhs + self.stderr_rhs)

    def row(self):
        return (self.model, self.n, self.m, self.t, self.lhs, self.rhs,
                self.stderr_lhs, self.stderr_rhs, self.passed)


def _duality_setup(model, measure, lam, x, y, max_order):
    if model == "energy":
        measure = measure or Uniform()
        ctable = reference_table(measure, max_order)
        params = ModelParams(0.0)
        fn = lambda n, m, a, b: duality_fn_energy(ctable, n, m, a, b)
        tables = {N: energy_dual_rates(measure, ctable, N) for N in range(max_order + 1)}
        table_for = lambda n, m: tables[n + m]
    elif model == "wealth":
        measure = measure or Uniform()
        if abs(x + y - 1.0) > 1e-12:
            raise UnnormalizedTotal(f"wealth duality needs x + y = 1, got {x + y}")
        alpha = alpha_moments(lam, measure, max_order)
        params = ModelParams(lam)
        fn = lambda n, m, a, b: duality_fn_wealth(alpha, n, m, a, b)
        cache = {}

        def table_for(n, m):
            if (n, m) not in cache:
                cache[(n, m)] = wealth_dual_table(lam, measure, (n, m), alpha)
            return cache[(n, m)]
    else:
        raise ValueError(f"unknown model {model!r}")
    return params, measure, fn, table_for


def _dual_side(fn, ends, x, y):
    # D(k; x, y) is evaluated once per distinct dual state, then gathered
    states, inv = np.unique(ends, axis=0, return_inverse=True)
    vals = np.array([float(fn(int(a), int(b), x, y)) for a, b in states])
    return mean_stderr(vals[inv.ravel()])


def duality_sweep(model: str, x: float, y: float, max_order: int, times, trials: int,
                  measure: RedistributionMeasure | None = None, lam: float = 0.5,
                  seed=0, threads: int = 1, sigma: float = 3.0) -> list[DualityResult]:
    """Two-sided Monte Carlo duality check for every (n, m) with n + m <= max_order.

    Left side: mean of D(n, m; X_t, Y_t) over forward runs from (x, y).
    Right side: mean of D(N_t, M_t; x, y) over dual runs from (n, m).
    One forward batch per time serves all (n, m).
    """
    params, measure, fn, table_for = _duality_setup(model, measure, lam, x, y, max_order)
    seed = as_seed(seed)
    pairs = [(n, N - n) for N in range(max_order + 1) for n in range(N, -1, -1)]
    out = []
    for ti, t in enumerate(times):
        xt, yt, _ = simulate_endpoints(x, y, params, measure, t, trials, seed=seed,
                                       threads=threads, stream=1 + ti)
        for pi, (n, m) in enumerate(pairs):
            lhs, se_l = mean_stderr(fn(n, m, xt, yt))
            ends = dual_endpoints(table_for(n, m), (n, m), t, trials, seed=seed,
                                  threads=threads, stream=10_000 * (1 + ti) + pi)
            rhs, se_r = _dual_side(fn, ends, x, y)
            out.append(DualityResult(model, n, m, float(t), lhs, rhs, se_l, se_r, sigma))
    return out


def duality_check(model: str, x: float, y: float, n: int, m: int, t: float, trials: int,
                  measure: RedistributionMeasure | None = None, lam: float = 0.5, seed=0,
                  threads: int = 1) -> DualityResult:
    """(lhs, rhs, stderr_lhs, stderr_rhs) for one (n, m, t)."""
    params, measure, fn, table_for = _duality_setup(model, measure, lam, x, y, n + m)
    seed = as_seed(seed)
    if t == 0:
        d = float(fn(n, m, x, y))
        return DualityResult(model, n, m, 0.0, d, d, 0.0, 0.0)
    xt, yt, _ = simulate_endpoints(x, y, params, measure, t, trials, seed=seed,
                                   threads=threads, stream=1)
    lhs, se_l = mean_stderr(fn(n, m, xt, yt))
    ends = dual_endpoints(table_for(n, m), (n, m), t, trials, seed=seed, threads=threads,
                          stream=2)
    rhs, se_r = _dual_side(fn, ends, x, y)
    return DualityResult(model, n, m, float(t), lhs, rhs, se_l, se_r)


def exact_dual_expectation(table: DualRateTable, initial, t: float, values: Callable) -> float:
    """E_initial[values(N_t, M_t)] from the matrix exponential of the dual generator."""
    p = table.transition_matrix(t)[table.index(initial)]
    return float(sum(pk * values(*st) for pk, st in zip(p, table.states)))


# ---------------------------------------------------------------------------
# harmonicity and factorisation


def harmonic_profile(mu_sampler: Callable, ctable: MomentTable, level: int, trials: int,
                     seed=0) -> dict:
    """(n, m) -> (int x^n y^m dmu / c_nm, stderr) for every (n, m) on ``level``.

    For an invariant mu the profile is constant on the level.
    """
    rng = block_rng(as_seed(seed), 0, level)
    x, y = mu_sampler(rng, trials)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = {}
    for n in range(level, -1, -1):
        m = level - n
        out[DualState(n, m)] = mean_stderr(x**n * y**m / ctable.c[(n, m)])
    return out


def factorization_defect(x, y, n: int, m: int) -> tuple[float, float]:
    """E[x^n y^m] - E[x^n] E[y^m] with a delta-method standard error.

    Zero iff c_nm c_00 = c_n0 c_0m; product invariant measures give zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    f, g, h = x**n * y**m, x**n, y**m
    mg, mh = g.mean(), h.mean()
    defect = f.mean() - mg * mh
    influence = f - mh * g - mg * h
    return float(defect), float(influence.std(ddof=1) / math.sqrt(x.size))
