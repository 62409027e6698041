"""Stationary laws of the two-agent models.

For an s-independent redistribution measure nu and saving propensity lam, the
wealth fraction r = x / s of the wealth model performs the contraction

    r <- lam r + (1 - lam) eps,    eps ~ nu,

whose unique stationary law is that of

    eps_inf = sum_{n >= 0} (1 - lam) lam^n eps_n.

Stationary states of the pair are ``(eps_inf S, (1 - eps_inf) S)`` for any
law of the total S.  With two propensities the recursion becomes
``r <- r (lam1 + (lam2 - lam1) eps) + (1 - lam2) eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import Degenerate, TruncationOverflow
from .measures import Density1D, RedistributionMeasure, induce_from_density, moment_nm

DEFAULT_S_GRID = (0.5, 1.0, 2.0, 5.0, 10.0)
DEFAULT_A_GRID = np.linspace(0.0, 1.0, 103)[1:-1]


@dataclass(frozen=True)
class SeriesTruncation:
    """Truncation of the eps_inf series at an absolute error ``tol``."""

    tol: float = 1e-12

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")

    def depth(self, lam: float, lam2: float | None = None) -> int:
        """Number of recursion steps N after which the tail is below ``tol``.

        Single propensity: lam^N <= tol.  Two propensities: the per-step
        multiplier is at most rho = max(lam1, lam2) and the tail is bounded by
        rho^N max(1, (1 - lam2) / (1 - rho)).
        """
        if lam2 is None:
            lam2 = lam
        rho = max(lam, lam2)
        if rho >= 1.0:
            raise TruncationOverflow(f"contraction factor {rho} >= 1, series does not converge")
        if rho == 0.0:
            return 0
        scale = max(1.0, (1.0 - lam2) / (1.0 - rho))
        return max(0, math.ceil(math.log(self.tol / scale) / math.log(rho)))


DEFAULT_TRUNCATION = SeriesTruncation()


def eps_infinity_from_draws(lam1: float, lam2: float, eps: np.ndarray) -> np.ndarray:
    """Truncated series evaluated on explicit draws ``eps[:, 0..N]``.

    Column N seeds the Horner evaluation; columns N-1 .. 0 are the series
    terms.  Useful for coupling runs with different truncation depths.
    """
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    r = eps[:, -1].copy()
    for k in range(eps.shape[1] - 2, -1, -1):
        e = eps[:, k]
        r = (1.0 - lam2) * e + (lam1 + (lam2 - lam1) * e) * r
    return r


def _eps_inf(l1, l2, measure, trunc, rng, size):
    measure.require_s_independent()
    n = 1 if size is None else int(np.prod(size))
    depth = trunc.depth(l1, l2)
    out = kernels.eps_infinity(float(l1), float(l2), depth, n, measure.sampler(), rng)
    return float(out[0]) if size is None else out.reshape(size)


def sample_eps_infinity(lam: float, measure: RedistributionMeasure,
                        trunc: SeriesTruncation = DEFAULT_TRUNCATION,
                        rng: np.random.Generator | None = None, size=None):
    """Draw from the stationary law of r <- lam r + (1 - lam) eps."""
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1)")
    return _eps_inf(lam, lam, measure, trunc, rng or np.random.default_rng(), size)


def alpha_moments(lam: float, measure: RedistributionMeasure, n_max: int,
                  lam2: float | None = None) -> np.ndarray:
    """Moments alpha_n = E[eps_inf^n], n = 0..n_max, from the stationarity recursion

        alpha_n (1 - lam^n) = sum_{k<n} C(n,k) lam^k (1-lam)^(n-k) m_(n-k) alpha_k

    With two propensities the factor of alpha_k is
    ``C(n,k) E[(lam1 + (lam2 - lam1) eps)^k ((1 - lam2) eps)^(n-k)]``.
    """
    l2 = lam if lam2 is None else lam2
    if lam >= 1.0 or l2 >= 1.0:
        raise Degenerate("lambda = 1 freezes the recursion; alpha is undefined")
    measure.require_s_independent()
    m = [moment_nm(measure, j, 0) for j in range(n_max + 1)]
    b = l2 - lam

    def coeff(n, k):
        # E[(lam + b eps)^k ((1 - l2) eps)^(n - k)]
        inner = math.fsum(math.comb(k, j) * lam ** (k - j) * b**j * m[j + n - k]
                          for j in range(k + 1))
        return (1.0 - l2) ** (n - k) * inner

    alpha = np.empty(n_max + 1)
    alpha[0] = 1.0
    for n in range(1, n_max + 1):
        acc = math.fsum(math.comb(n, k) * coeff(n, k) * alpha[k] for k in range(n))
        alpha[n] = acc / (1.0 - coeff(n, n))
    return alpha


def alpha_joint(lam: float, measure: RedistributionMeasure, i: int, j: int,
                alpha: np.ndarray | None = None) -> float:
    """alpha(i, j) = E[eps_inf^i (1 - eps_inf)^j]."""
    if alpha is None or len(alpha) < i + j + 1:
        alpha = alpha_moments(lam, measure, i + j)
    return math.fsum(math.comb(j, k) * (-1) ** k * alpha[i + k] for k in range(j + 1))


def _split(r, s):
    x = r * s
    return x, s - x


def sample_canonical_energy(s: float, measure: RedistributionMeasure,
                            rng: np.random.Generator, size=None):
    """(eps s, (1 - eps) s) with eps ~ nu(s, .): the canonical measure at total s."""
    eps = measure.sample(rng, s, size)
    return _split(eps, s)


def sample_stationary_wealth(s: float, lam: float, measure: RedistributionMeasure,
                             trunc: SeriesTruncation = DEFAULT_TRUNCATION,
                             rng: np.random.Generator | None = None, size=None):
    """(eps_inf s, (1 - eps_inf) s): the stationary wealth pair at total s."""
    rng = rng or np.random.default_rng()
    if lam == 0.0:
        return sample_canonical_energy(s, measure, rng, size)
    return _split(sample_eps_infinity(lam, measure, trunc, rng, size), s)


def sample_two_prop(s: float, l1: float, l2: float, measure: RedistributionMeasure,
                    trunc: SeriesTruncation = DEFAULT_TRUNCATION,
                    rng: np.random.Generator | None = None, size=None):
    """Stationary pair under agent-dependent propensities (l1, l2)."""
    rng = rng or np.random.default_rng()
    if not (0.0 <= l1 < 1.0 and 0.0 <= l2 < 1.0):
        raise ValueError("propensities must lie in [0, 1)")
    return _split(_eps_inf(l1, l2, measure, trunc, rng, size), s)


# ---------------------------------------------------------------------------
# grand canonical measures


@dataclass(frozen=True)
class PointMass:
    s: float

    def sample(self, rng, size=None):
        return self.s if size is None else np.full(size, float(self.s))


@dataclass(frozen=True)
class GammaLaw:
    shape: float
    rate: float = 1.0

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)


@dataclass(frozen=True)
class CustomLaw:
    sampler: Callable

    def sample(self, rng, size=None):
        return self.sampler(rng, size)


@dataclass(frozen=True)
class GrandCanonicalSpec:
    """Law of the total S: ``PointMass``, ``GammaLaw`` or ``CustomLaw``."""

    s_law: PointMass | GammaLaw | CustomLaw


def sample_grand_canonical(spec: GrandCanonicalSpec, lam: float, measure: RedistributionMeasure,
                           trunc: SeriesTruncation = DEFAULT_TRUNCATION,
                           rng: np.random.Generator | None = None, size=None):
    """Draw S from ``spec.s_law``, then a canonical/stationary pair at total S."""
    rng = rng or np.random.default_rng()
    n = 1 if size is None else int(size)
    s = np.atleast_1d(np.asarray(spec.s_law.sample(rng, n), dtype=float))
    if np.any(s < 0):
        raise ValueError("the total S must be nonnegative")
    if not measure.s_dependent:
        r = (measure.sample(rng, 1.0, n) if lam == 0.0
             else sample_eps_infinity(lam, measure, trunc, rng, n))
    elif lam == 0.0:
        r = np.array([measure.sample(rng, si) for si in s])
    else:
        raise NotImplementedError("s-dependent measures with lambda > 0 are not sampled "
                                  "in grand-canonical form")
    x, y = _split(r, s)
    if size is None:
        return float(x[0]), float(y[0])
    return x, y


def verify_product_invariance(mu: Density1D, measure: RedistributionMeasure,
                              s_grid=DEFAULT_S_GRID, a_grid=DEFAULT_A_GRID) -> float:
    """sup over the grid of |nu(s, a) - mu(as) mu((1-a)s) / int_0^1 mu(bs) mu((1-b)s) db|.

    Zero (to quadrature accuracy) iff the product measure mu(x) mu(y) is
    invariant for the energy model with redistribution measure ``measure``.
    """
    induced = induce_from_density(mu)
    a = np.asarray(a_grid, dtype=float)
    worst = 0.0
    for s in s_grid:
        diff = np.abs(measure.pdf(s, a) - induced.pdf(s, a))
        worst = max(worst, float(np.max(diff)))
    return worst
