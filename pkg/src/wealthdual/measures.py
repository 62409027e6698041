"""Redistribution measures nu(s, d eps) on [0, 1].

A redistribution measure gives, for a pair with total wealth ``s``, the law
of the fraction ``eps`` of the pooled wealth handed to the first agent.
Built-in families are :class:`Uniform`, :class:`Beta`, :class:`ParetoType`,
measures induced from a candidate invariant density
(:func:`induce_from_density`) and arbitrary :class:`CustomDensity`.

Every measure exposes ``pdf``, ``cdf``, ``sample`` and ``moment``.  The
module-level functions :func:`density`, :func:`sample` and :func:`moment_nm`
are thin, validating wrappers around those methods.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate as _integrate
from scipy import special

from .errors import (
    DegenerateSupport,
    NonAdmissible,
    QuadratureFailure,
    SDependentMeasure,
    ZeroDenominator,
)

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-12
TABLE_POINTS = 1024

KIND_UNIFORM = 0
KIND_BETA = 1
KIND_TABLE = 2

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def integrate(f: Callable[[float], float], lo: float, hi: float) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[lo, hi]``.

    QUADPACK never evaluates the endpoints, so integrable endpoint
    singularities (Beta with a < 1, Pareto-type) are safe.  Round-off
    reports are tolerated when the error estimate is still tiny.
    """
    if hi <= lo:
        return 0.0
    res = _integrate.quad(f, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                          limit=500, full_output=1)
    value, abserr = res[0], res[1]
    if len(res) > 3:
        ier_msg = res[3]
        if abserr > 1e-9 * max(1.0, abs(value)) or not np.isfinite(value):
            raise QuadratureFailure(f"quadrature on [{lo}, {hi}] failed: {ier_msg}")
    return float(value)


class EpsSampler(NamedTuple):
    """Flat description of an eps-sampler, consumed by the simulation kernels."""

    kind: int
    a: float
    b: float
    cdf: np.ndarray
    grid: np.ndarray


_EMPTY = np.zeros(2)


def invert_table(cdf: np.ndarray, grid: np.ndarray, u):
    """Inverse of a piecewise-linear CDF tabulated at ``grid``.

    The arithmetic here is mirrored exactly by the compiled and the
    pure-Python kernels; keep the three in sync.
    """
    u = np.asarray(u, dtype=float)
    last = len(cdf) - 2
    j = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, last)
    w = (u - cdf[j]) / (cdf[j + 1] - cdf[j])
    out = grid[j] + w * (grid[j + 1] - grid[j])
    return np.minimum(out, grid[-1])


def invert_table_scalar(cdf, grid, u: float) -> float:
    last = len(cdf) - 2
    j = bisect.bisect_right(cdf, u) - 1
    j = 0 if j < 0 else (last if j > last else j)
    w = (u - cdf[j]) / (cdf[j + 1] - cdf[j])
    out = grid[j] + w * (grid[j + 1] - grid[j])
    return out if out < grid[-1] else grid[-1]


# ---------------------------------------------------------------------------
# one-dimensional candidate invariant densities


@dataclass(frozen=True)
class Density1D:
    """A probability density on ``[lower, inf)``.

    Closed forms are provided for Gamma(shape, rate), the exponential law and
    Pareto-I(alpha) (support ``x >= 1``).
    """

    kind: str
    params: tuple = ()
    lower: float = 0.0
    func: Callable | None = field(default=None, compare=False, repr=False)

    @classmethod
    def gamma(cls, shape: float, rate: float = 1.0) -> "Density1D":
        if shape <= 0 or rate <= 0:
            raise ValueError("gamma shape and rate must be positive")
        return cls("gamma", (float(shape), float(rate)))

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "Density1D":
        if rate <= 0:
            raise ValueError("exponential rate must be positive")
        return cls("exponential", (float(rate),))

    @classmethod
    def pareto1(cls, alpha: float) -> "Density1D":
        if alpha <= 0:
            raise ValueError("Pareto index must be positive")
        return cls("pareto1", (float(alpha),), lower=1.0)

    @classmethod
    def custom(cls, func: Callable, lower: float = 0.0) -> "Density1D":
        return cls("custom", (), lower=float(lower), func=func)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "gamma":
                k, rate = self.params
                out = k * math.log(rate) + special.xlogy(k - 1.0, x) - rate * x - special.gammaln(k)
            elif self.kind == "exponential":
                (rate,) = self.params
                out = math.log(rate) - rate * x
            elif self.kind == "pareto1":
                (alpha,) = self.params
                out = math.log(alpha) - (alpha + 1.0) * np.log(x)
            else:
                out = np.log(self.func(x))
        return np.where(x >= self.lower, out, -np.inf)

    def pdf(self, x):
        if self.kind == "custom":
            x = np.asarray(x, dtype=float)
            return np.where(x >= self.lower, self.func(x), 0.0)
        return np.exp(self.logpdf(x))

    def moment(self, n: int) -> float:
        """E[X^n]; closed form where known, quadrature otherwise."""
        if self.kind == "gamma":
            k, rate = self.params
            return math.exp(special.gammaln(k + n) - special.gammaln(k)) / rate**n
        if self.kind == "exponential":
            (rate,) = self.params
            return math.factorial(n) / rate**n
        if self.kind == "pareto1":
            (alpha,) = self.params
            return alpha / (alpha - n) if alpha > n else math.inf
        return integrate(lambda x: x**n * float(self.pdf(x)), self.lower, np.inf)


@dataclass(frozen=True)
class Density2D:
    """A joint density mu(x, y) on the quadrant."""

    func: Callable
    name: str = "custom2d"

    def pdf(self, x, y):
        return self.func(x, y)


# ---------------------------------------------------------------------------
# redistribution measures


class RedistributionMeasure:
    """Base class.  Subclasses define the density on ``support(s)``."""

    family: str = "abstract"
    s_dependent: bool = False

    def support(self, s: float) -> tuple[float, float]:
        return 0.0, 1.0

    def _pdf(self, s: float, eps: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def pdf(self, s: float, eps):
        """Density at ``eps`` (vectorised); zero outside the support."""
        lo, hi = self.support(s)
        eps = np.asarray(eps, dtype=float)
        inside = (eps >= lo) & (eps <= hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self._pdf(s, np.where(inside, eps, 0.5 * (lo + hi)))
        return np.where(inside, val, 0.0)

    def cdf(self, s: float, eps):
        """Distribution function by quadrature (vectorised).

        Large inputs start from the quadrature anchors of the sampling table
        and add a 20-point Gauss-Legendre integral up to each point; the two
        end cells, where the density may be singular, use adaptive quadrature.
        """
        lo, hi = self.support(s)
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        out = np.where(eps <= lo, 0.0, 1.0)
        inner = np.flatnonzero((eps > lo) & (eps < hi))
        f = lambda t: float(self._pdf(s, np.float64(t)))
        if inner.size <= 64:
            for i in inner:
                out[i] = integrate(f, lo, eps[i])
            return out
        cdf, grid = self._table(s)
        e = eps[inner]
        last = len(grid) - 2
        j = np.clip(np.searchsorted(grid, e, side="right") - 1, 0, last)
        mid_cell = (j > 0) & (j < last)
        a, b = grid[j[mid_cell]], e[mid_cell]
        half, centre = 0.5 * (b - a), 0.5 * (a + b)
        res = np.empty_like(e)
        res[mid_cell] = cdf[j[mid_cell]] + half * (
            self.pdf(s, centre[:, None] + half[:, None] * _GL_NODES) @ _GL_WEIGHTS)
        for k in np.flatnonzero(~mid_cell):
            res[k] = integrate(f, lo, e[k]) if j[k] == 0 else 1.0 - integrate(f, e[k], hi)
        out[inner] = res
        return out

    def moment(self, n: int, m: int, s: float = 1.0) -> float:
        lo, hi = self.support(s)
        return integrate(
            lambda e: e**n * (1.0 - e) ** m * float(self._pdf(s, np.float64(e))), lo, hi)

    def mean(self, s: float = 1.0) -> float:
        return self.moment(1, 0, s)

    def sampler(self, s: float = 1.0) -> EpsSampler:
        cdf, grid = self._table(s)
        return EpsSampler(KIND_TABLE, 0.0, 0.0, cdf, grid)

    def sample(self, rng: np.random.Generator, s: float = 1.0, size=None):
        """Draw eps ~ nu(s, .); one uniform per draw for tabulated measures."""
        spec = self.sampler(s)
        if spec.kind == KIND_UNIFORM:
            return rng.random(size)
        if spec.kind == KIND_BETA:
            return rng.beta(spec.a, spec.b, size)
        if size is None:
            return invert_table_scalar(spec.cdf, spec.grid, rng.random())
        return invert_table(spec.cdf, spec.grid, rng.random(size))

    def _table(self, s: float):
        return _cdf_table(self, float(s))

    def require_s_independent(self) -> None:
        if self.s_dependent:
            raise SDependentMeasure(f"{self!r} depends on the total s")


@lru_cache(maxsize=256)
def _cdf_table(measure: RedistributionMeasure, s: float):
    lo, hi = measure.support(s)
    grid = np.linspace(lo, hi, TABLE_POINTS)
    f = lambda t: float(measure._pdf(s, np.float64(t)))
    pieces = [integrate(f, grid[i], grid[i + 1]) for i in range(TABLE_POINTS - 1)]
    cdf = np.concatenate([[0.0], np.cumsum(pieces)])
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    grid.setflags(write=False)
    cdf.setflags(write=False)
    return cdf, grid


class Uniform(RedistributionMeasure):
    family = "uniform"

    def _pdf(self, s, eps):
        return np.ones_like(eps)

    def cdf(self, s, eps):
        return np.clip(np.asarray(eps, dtype=float), 0.0, 1.0)

    def moment(self, n, m, s=1.0):
        return math.factorial(n) * math.factorial(m) / math.factorial(n + m + 1)

    def sampler(self, s=1.0):
        return EpsSampler(KIND_UNIFORM, 0.0, 0.0, _EMPTY, _EMPTY)

    def __repr__(self):
        return "Uniform()"

    def __eq__(self, other):
        return isinstance(other, Uniform)

    def __hash__(self):
        return hash("uniform")


class Beta(RedistributionMeasure):
    family = "beta"

    def __init__(self, a: float, b: float):
        if not (a > 0 and b > 0):
            raise NonAdmissible("Beta parameters must be positive")
        self.a = float(a)
        self.b = float(b)
        self._lognorm = float(special.betaln(self.a, self.b))

    def _pdf(self, s, eps):
        return np.exp(special.xlogy(self.a - 1.0, eps)
                      + special.xlog1py(self.b - 1.0, -eps) - self._lognorm)

    def cdf(self, s, eps):
        return special.betainc(self.a, self.b, np.clip(np.asarray(eps, dtype=float), 0.0, 1.0))

    def moment(self, n, m, s=1.0):
        return math.exp(special.betaln(self.a + n, self.b + m) - self._lognorm)

    def sampler(self, s=1.0):
        return EpsSampler(KIND_BETA, self.a, self.b, _EMPTY, _EMPTY)

    def __repr__(self):
        return f"Beta({self.a:g}, {self.b:g})"

    def __eq__(self, other):
        return isinstance(other, Beta) and (self.a, self.b) == (other.a, other.b)

    def __hash__(self):
        return hash(("beta", self.a, self.b))


class ParetoType(RedistributionMeasure):
    """Density proportional to eps^(-alpha-1) (1-eps)^(-alpha-1) on [1/s, 1-1/s].

    Full support on [0, 1] is given up here; the law is only defined for
    s > 2.  The normalising constant has no closed form and is computed by
    quadrature, memoised per s.
    """

    family = "pareto"
    s_dependent = True

    def __init__(self, alpha: float):
        if alpha <= 0:
            raise NonAdmissible("Pareto index must be positive")
        self.alpha = float(alpha)
        self._norm = lru_cache(maxsize=1024)(self._normalizer)

    def support(self, s):
        if not s > 2:
            raise DegenerateSupport(f"ParetoType needs s > 2, got s={s}")
        return 1.0 / s, (s - 1.0) / s

    def _raw(self, eps):
        return (eps * (1.0 - eps)) ** (-self.alpha - 1.0)

    def _normalizer(self, s):
        lo, hi = self.support(s)
        return integrate(lambda e: self._raw(e), lo, hi)

    def _pdf(self, s, eps):
        return self._raw(eps) / self._norm(float(s))

    def __repr__(self):
        return f"ParetoType({self.alpha:g})"

    def __eq__(self, other):
        return isinstance(other, ParetoType) and self.alpha == other.alpha

    def __hash__(self):
        return hash(("pareto", self.alpha))


class CustomDensity(RedistributionMeasure):
    """User-supplied ``f(s, eps)``, normalised numerically for each s.

    ``s_dependent`` is declared by the caller, never inferred.
    """

    family = "custom"

    def __init__(self, func: Callable, s_dependent: bool = True, name: str = "custom"):
        self.func = func
        self.s_dependent = bool(s_dependent)
        self.name = name
        self._norm = lru_cache(maxsize=1024)(self._normalizer)

    def _checked(self, s, eps):
        val = np.asarray(self.func(s, eps), dtype=float)
        if np.any(val < 0):
            raise NonAdmissible(f"custom density negative at s={s}")
        return val

    def _normalizer(self, s):
        z = integrate(lambda e: float(self._checked(s, np.float64(e))), 0.0, 1.0)
        if z <= 0:
            raise ZeroDenominator(f"custom density integrates to {z} at s={s}")
        return z

    def _pdf(self, s, eps):
        return self._checked(s, eps) / self._norm(float(s))

    def __repr__(self):
        return f"CustomDensity({self.name})"


class InducedMeasure(RedistributionMeasure):
    """nu(s, a) proportional to mu(a s) mu((1-a) s), or mu(a s, (1-a) s) for 2-d mu.

    This is the redistribution law under which the (product) measure mu is
    invariant for the energy model.
    """

    family = "induced"

    def __init__(self, mu: Density1D | Density2D):
        self.mu = mu
        self.s_dependent = not (isinstance(mu, Density1D)
                                and mu.kind in ("gamma", "exponential"))
        self._norm = lru_cache(maxsize=1024)(self._normalizer)

    def support(self, s):
        if isinstance(self.mu, Density1D) and self.mu.lower > 0:
            lo = self.mu.lower / s
            if not lo < 0.5:
                raise DegenerateSupport(
                    f"induced support [{lo}, {1 - lo}] is empty at s={s}")
            return lo, 1.0 - lo
        return 0.0, 1.0

    def _shift(self, s):
        # log mu at the midpoint; keeps the unnormalised integrand O(1) for large s
        if isinstance(self.mu, Density1D):
            shift = 2.0 * float(self.mu.logpdf(0.5 * s))
            return shift if np.isfinite(shift) else 0.0
        return 0.0

    def _raw(self, s, a):
        if isinstance(self.mu, Density1D):
            return np.exp(self.mu.logpdf(a * s) + self.mu.logpdf((1.0 - a) * s) - self._shift(s))
        return np.asarray(self.mu.pdf(a * s, (1.0 - a) * s), dtype=float)

    def _normalizer(self, s):
        lo, hi = self.support(s)
        z = integrate(lambda a: float(self._raw(s, np.float64(a))), lo, hi)
        if not z > 0:
            raise ZeroDenominator(f"integral of mu(as)mu((1-a)s) vanishes at s={s}")
        return z

    def _pdf(self, s, eps):
        return self._raw(s, eps) / self._norm(float(s))

    def sampler(self, s=1.0):
        return super().sampler(1.0 if not self.s_dependent else s)

    def __repr__(self):
        return f"InducedMeasure({self.mu.kind if isinstance(self.mu, Density1D) else self.mu.name})"


def induce_from_density(mu: Density1D | Density2D) -> InducedMeasure:
    """Redistribution measure under which ``mu`` is an invariant product measure."""
    return InducedMeasure(mu)


# ---------------------------------------------------------------------------
# validating module-level API


def _check_eps(eps):
    e = np.asarray(eps, dtype=float)
    if np.any((e < 0) | (e > 1)):
        raise ValueError("eps must lie in [0, 1]")


def density(measure: RedistributionMeasure, s: float, eps):
    """nu(s, eps).  Scalar in, float out; arrays are evaluated elementwise."""
    _check_eps(eps)
    val = measure.pdf(s, eps)
    return float(val) if np.ndim(val) == 0 else val


def sample(measure: RedistributionMeasure, s: float, rng: np.random.Generator, size=None):
    return measure.sample(rng, s, size)


def moment_nm(measure: RedistributionMeasure, n: int, m: int, s: float = 1.0) -> float:
    """Mixed moment nu_nm(s) = int eps^n (1-eps)^m nu(s, d eps)."""
    if n < 0 or m < 0:
        raise ValueError("moment orders must be nonnegative")
    if n == 0 and m == 0:
        measure.support(s)
        return 1.0
    return measure.moment(int(n), int(m), s)


def from_config(block: dict) -> RedistributionMeasure:
    """Build a measure from the ``[measure]`` table of an experiment config."""
    family = block.get("family", "uniform")
    if family == "uniform":
        return Uniform()
    if family == "beta":
        return Beta(block["a"], block.get("b", block["a"]))
    if family == "pareto":
        return ParetoType(block["alpha"])
    if family == "induced":
        params = dict(block.get("mu_params", {}))
        kind = block["mu"]
        if kind == "gamma":
            mu = Density1D.gamma(params.get("shape", 1.0), params.get("rate", 1.0))
        elif kind == "exponential":
            mu = Density1D.exponential(params.get("rate", 1.0))
        elif kind == "pareto1":
            mu = Density1D.pareto1(params["alpha"])
        else:
            raise ValueError(f"unknown mu kind {kind!r}")
        return induce_from_density(mu)
    raise ValueError(f"unknown measure family {family!r}")
