"""Estimators shared by the verification suites.

Sample moments are accumulated exactly (integer arithmetic on the binary
mantissas) so that summaries of parallel batches merge into precisely the
estimate computed on the concatenated sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .errors import DegenerateVariance

KS_CRIT_99 = 1.63


def ks_threshold(n: int) -> float:
    """Asymptotic 99% critical value of the one-sample KS statistic."""
    return KS_CRIT_99 / math.sqrt(n)


class ExactSum:
    """Exact running sum of float64 values."""

    __slots__ = ("num", "exp")

    def __init__(self):
        self.num = 0
        self.exp = 0

    def add(self, values) -> "ExactSum":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            return self
        if not np.all(np.isfinite(v)):
            raise ValueError("cannot sum non-finite values")
        frac, e = np.frexp(v)
        mant = (frac * 2.0**53).astype(np.int64)
        e = e.astype(np.int64) - 53
        order = np.argsort(e, kind="stable")
        e, mant = e[order], mant[order]
        starts = np.flatnonzero(np.r_[True, e[1:] != e[:-1]])
        hi = np.add.reduceat(mant >> 27, starts)
        lo = np.add.reduceat(mant & ((1 << 27) - 1), starts)
        for ex, h, l in zip(e[starts].tolist(), hi.tolist(), lo.tolist()):
            self._add_int((h << 27) + l, ex)
        return self

    def _add_int(self, num: int, exp: int) -> None:
        if exp < self.exp:
            self.num = (self.num << (self.exp - exp)) + num
            self.exp = exp
        else:
            self.num += num << (exp - self.exp)

    def merge(self, other: "ExactSum") -> "ExactSum":
        self._add_int(other.num, other.exp)
        return self

    def fraction(self) -> Fraction:
        return Fraction(self.num) * Fraction(2) ** self.exp

    def __float__(self) -> float:
        return float(self.fraction())


@dataclass
class MomentAccumulator:
    """Mergeable power sums for the moments of given orders."""

    orders: tuple
    n: int = 0
    sums: dict = field(default_factory=dict)
    sq_sums: dict = field(default_factory=dict)

    def __post_init__(self):
        self.orders = tuple(self.orders)
        for k in self.orders:
            self.sums.setdefault(k, ExactSum())
            self.sq_sums.setdefault(k, ExactSum())

    def add(self, samples) -> "MomentAccumulator":
        x = np.asarray(samples, dtype=float).ravel()
        self.n += x.size
        for k in self.orders:
            pk = x**k
            self.sums[k].add(pk)
            self.sq_sums[k].add(pk * pk)
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.orders != self.orders:
            raise ValueError("cannot merge accumulators with different orders")
        self.n += other.n
        for k in self.orders:
            self.sums[k].merge(other.sums[k])
            self.sq_sums[k].merge(other.sq_sums[k])
        return self

    def result(self) -> dict:
        out = {}
        n = self.n
        for k in self.orders:
            s1 = self.sums[k].fraction()
            s2 = self.sq_sums[k].fraction()
            mean = s1 / n
            if n > 1:
                var = (s2 - s1 * s1 / n) / (n - 1)
                se = math.sqrt(max(float(var), 0.0) / n)
            else:
                se = math.nan
            out[k] = (float(mean), se)
        return out


def empirical_moments(samples, orders: Iterable[int] = (1, 2)) -> dict:
    """Map order k -> (mean of samples**k, standard error)."""
    return MomentAccumulator(tuple(orders)).add(samples).result()


def mean_stderr(values) -> tuple[float, float]:
    """Sample mean and its standard error (sd / sqrt(n))."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 2:
        return float(v.mean()), math.nan
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n))


def ecdf(samples) -> np.ndarray:
    return np.sort(np.asarray(samples, dtype=float).ravel())


def ks_statistic(samples, reference_cdf: Callable) -> float:
    """Two-sided sup |F_n - F| of the samples against a continuous CDF."""
    x = ecdf(samples)
    n = x.size
    f = np.asarray(reference_cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    a = ecdf(a)
    b = ecdf(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def beta_from_moments(m: float, v: float) -> tuple[float, float]:
    if not (0.0 < v < m * (1.0 - m)):
        raise DegenerateVariance(f"need 0 < v < m(1-m); got m={m}, v={v}")
    c = m * (1.0 - m) / v - 1.0
    return m * c, (1.0 - m) * c


def fit_beta_by_moments(samples) -> tuple[float, float]:
    """Method-of-moments Beta(a, b) fit from sample mean and variance."""
    x = np.asarray(samples, dtype=float)
    return beta_from_moments(float(x.mean()), float(x.var(ddof=1)) if x.size > 1 else 0.0)


class Histogram(NamedTuple):
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int


def histogram(samples, bins: int = 50, range: tuple[float, float] = (0.0, 1.0)) -> Histogram:
    x = np.asarray(samples, dtype=float).ravel()
    lo, hi = range
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    return Histogram(edges, counts, int(np.sum(x < lo)), int(np.sum(x > hi)))


@dataclass
class EmpiricalSummary:
    n: int
    moments: dict
    ecdf: np.ndarray
    ks_vs: tuple | None = None


def summarize(samples, orders=(1, 2, 3), reference: tuple[str, Callable] | None = None):
    x = ecdf(samples)
    ks = None
    if reference is not None:
        name, cdf = reference
        ks = (name, ks_statistic(x, cdf))
    return EmpiricalSummary(x.size, empirical_moments(x, orders), x, ks)
