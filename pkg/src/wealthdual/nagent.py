"""Wealth exchange among N agents on a weighted graph.

Each unordered pair {i, j} carries a clock of rate 2 p(i, j); when it rings
the pair performs the two-agent move ``T^lam_eps`` with eps ~ nu.  For a
symmetric stochastic ``p`` and a measure with mean 1/2, the mean wealth
profile evolves as

    E_x[x_i(t)] = sum_j p_{(1-lam) t}(i, j) x_j,

where ``p_t = exp(t (P - I))`` is the heat kernel of the rate-one walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .errors import AsymmetricKernel, AsymmetricMean, RowSumViolation
from .measures import RedistributionMeasure
from .stats import mean_stderr
from .trials import as_seed, run_blocks

KERNEL_TOL = 1e-12
MEAN_TOL = 1e-10
HEAT_TOL = 1e-12
_MAX_UNIFORM_T = 16.0


@dataclass(frozen=True, eq=False)
class WalkKernel:
    """Symmetric jump matrix of a random walk on {0, .., N-1}."""

    p: np.ndarray

    @property
    def size(self) -> int:
        return self.p.shape[0]

    def pairs(self):
        """Unordered pairs i < j with p(i, j) > 0 and their clock rates 2 p(i, j)."""
        i, j = np.nonzero(np.triu(self.p, k=1))
        return i.astype(np.int64), j.astype(np.int64), 2.0 * self.p[i, j]


def build_walk(weights) -> WalkKernel:
    p = np.array(weights, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("jump matrix must be square")
    if np.any(p < 0):
        raise ValueError("jump matrix must be nonnegative")
    if np.max(np.abs(p - p.T)) > KERNEL_TOL:
        raise AsymmetricKernel("jump matrix must satisfy p(i, j) = p(j, i)")
    dev = np.max(np.abs(p.sum(axis=1) - 1.0))
    if dev > KERNEL_TOL:
        raise RowSumViolation(f"row sums deviate from 1 by {dev:.3g}")
    p.setflags(write=False)
    return WalkKernel(p)


def ring(n: int) -> WalkKernel:
    """Nearest-neighbour walk on a cycle; for n = 2 the two neighbours coincide."""
    if n < 2:
        raise ValueError("a ring needs at least two sites")
    p = np.zeros((n, n))
    for i in range(n):
        p[i, (i + 1) % n] += 0.5
        p[i, (i - 1) % n] += 0.5
    return build_walk(p)


def complete(n: int) -> WalkKernel:
    if n < 2:
        raise ValueError("a complete graph needs at least two sites")
    p = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(p, 0.0)
    return build_walk(p)


def _check_config(x0, n=None) -> np.ndarray:
    x = np.array(x0, dtype=float)
    if x.ndim != 1 or np.any(x < 0):
        raise ValueError("agent configuration must be a vector of nonnegative wealths")
    if n is not None and x.size != n:
        raise ValueError(f"configuration has {x.size} agents, kernel has {n}")
    return x


def _check_measure(measure: RedistributionMeasure) -> None:
    measure.require_s_independent()
    mean = measure.mean(1.0)
    if abs(mean - 0.5) > MEAN_TOL:
        raise AsymmetricMean(f"redistribution measure has mean {mean}, need 1/2")


def _schedule(kernel):
    pi, pj, rates = kernel.pairs()
    total = float(rates.sum())
    cum = np.cumsum(rates) / total
    cum[-1] = 1.0
    return pi, pj, cum, total


def simulate_nagent(x0, lam: float, measure: RedistributionMeasure, kernel: WalkKernel,
                    t_end: float, rng: np.random.Generator):
    """One event-driven trajectory; returns a list of ``(time, x)``.

    A single clock of total rate sum 2 p(i, j) fires and a pair is picked in
    proportion to its rate (no pick when there is only one pair).
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1)")
    _check_measure(measure)
    x = _check_config(x0, kernel.size)
    pi, pj, cum, total = _schedule(kernel)
    npairs = len(pi)
    traj = [(0.0, x.copy())]
    t = 0.0
    while True:
        t += -math.log1p(-rng.random()) / total
        if t > t_end:
            break
        q = min(int(np.searchsorted(cum, rng.random(), side="right")), npairs - 1) \
            if npairs > 1 else 0
        eps = float(measure.sample(rng, 1.0))
        i, j = pi[q], pj[q]
        s = x[i] + x[j]
        xi = min(max(lam * x[i] + (1.0 - lam) * eps * s, 0.0), s)
        x[i] = xi
        x[j] = s - xi
        traj.append((t, x.copy()))
    if traj[-1][0] != t_end:
        traj.append((float(t_end), x.copy()))
    return traj


def nagent_endpoints(x0, lam: float, measure: RedistributionMeasure, kernel: WalkKernel,
                     t_end: float, trials: int, seed=0, threads: int = 1, stream: int = 0):
    """Configurations at ``t_end`` of independent runs; returns ``(x, n_events)``.

    ``x0`` is one configuration (shared by all runs) or a (trials, N) array.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1)")
    _check_measure(measure)
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        _check_config(x0, kernel.size)
    x0 = np.ascontiguousarray(np.broadcast_to(x0, (trials, kernel.size)))
    if np.any(x0 < 0):
        raise ValueError("wealths must be nonnegative")
    pi, pj, cum, total = _schedule(kernel)
    sampler = measure.sampler()

    def block(lo, hi, rng):
        return kernels.nagent_endpoints(x0[lo:hi], pi, pj, cum, total, float(lam),
                                        float(t_end), sampler, rng)

    return run_blocks(trials, as_seed(seed), block, stream=stream, threads=threads)


def heat_kernel(kernel: WalkKernel, t: float) -> np.ndarray:
    """p_t = exp(t (P - I)) by uniformization, to absolute error 1e-12.

    The Poisson(t)-weighted sum of powers of P is truncated once the
    remaining Poisson mass is below the tolerance.  Large t is split into
    2^k equal pieces and the result squared back up.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    p = kernel.p
    n = p.shape[0]
    if t == 0:
        return np.eye(n)
    halvings = max(0, math.ceil(math.log2(t / _MAX_UNIFORM_T))) if t > _MAX_UNIFORM_T else 0
    tau = t / 2**halvings
    w = math.exp(-tau)
    power = np.eye(n)
    out = w * power
    mass = w
    k = 0
    while 1.0 - mass > HEAT_TOL * 1e-2:
        k += 1
        w *= tau / k
        power = power @ p
        out += w * power
        mass += w
        if w == 0.0 and k > tau:
            break
    for _ in range(halvings):
        out = out @ out
    return out


def mean_profile(x0, lam: float, kernel: WalkKernel, t: float) -> np.ndarray:
    """Analytic E[x(t)] = p_{(1-lam) t} x0."""
    return heat_kernel(kernel, (1.0 - lam) * t) @ np.asarray(x0, dtype=float)


class WealthRow(NamedTuple):
    agent: int
    mc_mean: float
    analytic: float
    stderr: float
    passed: bool


def expected_wealth_check(x0, lam: float, kernel: WalkKernel, t: float, trials: int,
                          measure: RedistributionMeasure, seed=0, threads: int = 1,
                          sigma: float = 3.0, stream: int = 0) -> list[WealthRow]:
    """Per-agent Monte Carlo mean of x_i(t) against sum_j p_{(1-lam)t}(i, j) x_j."""
    x0 = _check_config(x0, kernel.size)
    analytic = mean_profile(x0, lam, kernel, t)
    if t == 0:
        # no event has fired: every run sits at x0
        return [WealthRow(i, float(x0[i]), float(analytic[i]), 0.0, True)
                for i in range(kernel.size)]
    ends, _ = nagent_endpoints(x0, lam, measure, kernel, t, trials, seed, threads, stream)
    rows = []
    for i in range(kernel.size):
        m, se = mean_stderr(ends[:, i])
        diff = abs(m - analytic[i])
        rows.append(WealthRow(i, m, float(analytic[i]), se,
                              bool(diff == 0.0 or diff <= sigma * se)))
    return rows


class HarmonicityResult(NamedTuple):
    residual: np.ndarray
    stderr: np.ndarray

    def max_z(self) -> float:
        """Largest |residual| / stderr (inf if a residual is nonzero with zero stderr)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.residual) / self.stderr
        z = np.where(self.residual == 0.0, 0.0, z)
        return float(np.max(z))


def harmonicity_check(mu_sampler: Callable, kernel: WalkKernel, trials: int,
                      seed=0) -> HarmonicityResult:
    """Residual P rho - rho of rho_i = E_mu[x_i], with per-site standard errors.

    ``mu_sampler(rng, size)`` returns a (size, N) array of configurations.
    The residual is linear in the samples, so its standard error comes from
    the per-sample residual vectors.
    """
    rng = np.random.default_rng(as_seed(seed))
    x = np.asarray(mu_sampler(rng, trials), dtype=float)
    if x.shape != (trials, kernel.size):
        raise ValueError(f"sampler returned shape {x.shape}, expected {(trials, kernel.size)}")
    res = x @ (kernel.p - np.eye(kernel.size)).T
    mean = res.mean(axis=0)
    se = res.std(axis=0, ddof=1) / math.sqrt(trials)
    return HarmonicityResult(mean, se)
