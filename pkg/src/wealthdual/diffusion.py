"""Two-site wealth diffusions in the (r, s) coordinates.

With s = x + y conserved, the fraction r = x / s follows

    dr = b(r) dt + sqrt(2 r (1 - r)) dW,

i.e. the generator ``r(1-r) d^2/dr^2 + b(r) d/dr`` with ``b = a(rs, (1-r)s) / s``.
Its stationary density is

    psi(r) = C / (r (1 - r)) * exp( int^r b(u) / (u (1 - u)) du ),

and conversely the drift whose stationary law is nu(s, .) is
``b(r) = r (1 - r) d/dr log(r (1 - r) nu(s, r))``.  The linear drift
``a(x, y) = -alpha (x - y)`` gives b = alpha (1 - 2r) and psi = Beta(alpha, alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import (
    BoundaryUndefined,
    NonIntegrable,
    NonpositiveDensity,
    QuadratureFailure,
    StepTooLarge,
)
from .measures import Beta, RedistributionMeasure, Uniform, integrate
from .stats import ks_statistic
from .trials import as_seed, run_blocks

MAX_DT = 1e-2
BOUNDARY_EPS = 1e-9
FD_STEP = 1e-6


@dataclass(frozen=True)
class DriftSpec:
    """Drift of the r-diffusion divided by s.

    Build with :meth:`linear`, :meth:`zero` or :meth:`from_measure`.
    """

    kind: str
    alpha: float = 0.0
    measure: RedistributionMeasure | None = None

    @classmethod
    def linear(cls, alpha: float) -> "DriftSpec":
        if not alpha > 0:
            raise ValueError("linear drift needs alpha > 0")
        return cls("linear", float(alpha))

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls("zero")

    @classmethod
    def from_measure(cls, measure: RedistributionMeasure) -> "DriftSpec":
        return cls("from_measure", measure=measure)

    def affine(self, s: float = 1.0) -> tuple[float, float] | None:
        """(c0, c1) with b(r) = c0 + c1 r, when the drift is affine in r."""
        if self.kind == "linear":
            return self.alpha, -2.0 * self.alpha
        if self.kind == "zero":
            return 0.0, 0.0
        m = self.measure
        if isinstance(m, Uniform):
            return 1.0, -2.0
        if isinstance(m, Beta):
            return m.a, -(m.a + m.b)
        return None

    def evaluate(self, r, s: float = 1.0):
        coeffs = self.affine(s)
        if coeffs is not None:
            c0, c1 = coeffs
            return c0 + c1 * np.asarray(r, dtype=float)
        return drift_from_measure(self.measure, s, r)

    def inward(self, s: float = 1.0) -> bool:
        """True when the drift pushes into (0, 1) at both ends."""
        coeffs = self.affine(s)
        if coeffs is not None:
            c0, c1 = coeffs
            return c0 > 0 and c0 + c1 < 0
        lo, hi = 1e-4, 1 - 1e-4
        return bool(self.evaluate(lo, s) > 0 and self.evaluate(hi, s) < 0)


def drift_from_measure(measure: RedistributionMeasure, s: float, r, numeric: bool = False):
    """b(r) = r (1 - r) d/dr log(r (1 - r) nu(s, r)).

    Closed form for Uniform and Beta, central differences (step 1e-6, less
    next to the boundary) otherwise or when ``numeric`` is set.
    """
    r = np.asarray(r, dtype=float)
    if np.any((r <= 0) | (r >= 1)):
        raise BoundaryUndefined("drift is undefined at r = 0 and r = 1")
    if not numeric:
        if isinstance(measure, Uniform):
            return 1.0 - 2.0 * r
        if isinstance(measure, Beta):
            return measure.a * (1.0 - r) - measure.b * r
    # shrink the step near the ends so both stencil points stay interior
    h = np.minimum(FD_STEP, 0.5 * np.minimum(r, 1.0 - r))
    up, dn = r + h, r - h
    f_up = up * (1.0 - up) * measure.pdf(s, up)
    f_dn = dn * (1.0 - dn) * measure.pdf(s, dn)
    if np.any(f_up <= 0) or np.any(f_dn <= 0) or np.any(measure.pdf(s, r) <= 0):
        raise NonpositiveDensity("nu must be positive around r")
    return r * (1.0 - r) * (np.log(f_up) - np.log(f_dn)) / (2.0 * h)


def _log_psi_unnormalized(drift: DriftSpec, s: float, r: float) -> float:
    coeffs = drift.affine(s)
    if coeffs is not None:
        c0, c1 = coeffs
        # int (c0 + c1 u) / (u (1 - u)) du = c0 log u - (c0 + c1) log(1 - u)
        return (c0 - 1.0) * math.log(r) - (c0 + c1 + 1.0) * math.log1p(-r)
    inner = integrate(lambda u: float(drift.evaluate(u, s)) / (u * (1.0 - u)), 0.5, r) \
        if r >= 0.5 else -integrate(lambda u: float(drift.evaluate(u, s)) / (u * (1.0 - u)), r, 0.5)
    return inner - math.log(r) - math.log1p(-r)


class _Stationary:
    def __init__(self, drift, s, method):
        self.drift = drift
        self.s = s
        if method == "quad":
            self.drift = _NonAffine(drift)
        if drift.affine(s) is not None:
            c0, c1 = drift.affine(s)
            if not (c0 > 0 and c0 + c1 < 0):
                raise NonIntegrable(f"psi is not integrable for drift {c0} + {c1} r")
        try:
            z = integrate(lambda u: math.exp(_log_psi_unnormalized(self.drift, s, u)), 0.0, 1.0)
        except (QuadratureFailure, OverflowError, ValueError) as exc:
            raise NonIntegrable(f"stationary density does not normalise: {exc}") from exc
        if not np.isfinite(z) or z <= 0:
            raise NonIntegrable("stationary density does not normalise")
        self.log_z = math.log(z)

    def __call__(self, r):
        return math.exp(_log_psi_unnormalized(self.drift, self.s, r) - self.log_z)


class _NonAffine:
    """Hides the affine fast path so the quadrature route is exercised."""

    def __init__(self, drift):
        self._drift = drift

    def affine(self, s=1.0):
        return None

    def evaluate(self, r, s=1.0):
        return self._drift.evaluate(r, s)


def stationary_density(drift: DriftSpec, s: float, r, method: str = "auto"):
    """Normalised stationary density psi(r) of the r-diffusion.

    ``method="quad"`` forces numerical integration of b / (r (1 - r)) even
    for affine drifts.
    """
    psi = _Stationary(drift, s, method)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.array([psi(v) if 0 < v < 1 else 0.0 for v in r_arr])
    return float(out[0]) if np.ndim(r) == 0 else out


# ---------------------------------------------------------------------------
# simulation


def _check_dt(dt):
    if not 0 < dt <= MAX_DT:
        raise StepTooLarge(f"dt must lie in (0, {MAX_DT}], got {dt}")


def _boundary_mode(drift, s, boundary):
    if boundary == "auto":
        return drift.inward(s)
    if boundary not in ("reflect", "absorb"):
        raise ValueError("boundary must be 'auto', 'reflect' or 'absorb'")
    return boundary == "reflect"


def _step(r, b, dt, z, reflect):
    new = r + b * dt + np.sqrt(2.0 * r * (1.0 - r) * dt) * z
    if reflect:
        new = np.where(new < 0.0, -new, np.where(new > 1.0, 2.0 - new, new))
        return np.clip(new, 0.0, 1.0), None
    lo = new <= BOUNDARY_EPS
    hi = ~lo & (new >= 1.0 - BOUNDARY_EPS)
    new = np.where(lo, 0.0, np.where(hi, 1.0, new))
    return new, lo | hi


def simulate_r_diffusion(drift: DriftSpec, s: float, r0: float, t_end: float, dt: float,
                         rng: np.random.Generator, boundary: str = "auto"):
    """One Euler-Maruyama path; returns ``(times, r)`` arrays.

    Near the boundary a step can overshoot [0, 1].  With ``boundary="auto"``
    overshoots are reflected when the drift points inward at both ends (the
    boundary is then inaccessible for the exact diffusion) and absorbed
    otherwise.
    """
    _check_dt(dt)
    if not 0 < r0 < 1:
        raise ValueError("r0 must be interior")
    reflect = _boundary_mode(drift, s, boundary)
    n = int(round(t_end / dt))
    r = np.empty(n + 1)
    r[0] = r0
    dead = False
    for k in range(n):
        z = rng.standard_normal()
        if dead:
            r[k + 1] = r[k]
            continue
        new, hit = _step(np.float64(r[k]), drift.evaluate(r[k], s), dt, z, reflect)
        r[k + 1] = new
        dead = bool(hit) if hit is not None else False
    return np.arange(n + 1) * dt, r


class DiffusionRun(NamedTuple):
    r: np.ndarray
    boundary_hits: np.ndarray
    reflect: bool

    @property
    def absorbed(self) -> int:
        if self.reflect:
            return 0
        return int(np.sum((self.r == 0.0) | (self.r == 1.0)))

    def pairs(self, s: float):
        """Two-site configuration (r s, s - r s); the total is s by construction."""
        x = self.r * s
        return x, s - x


def r_diffusion_endpoints(drift: DriftSpec, s: float, r0, t_end: float, dt: float, paths: int,
                          seed=0, threads: int = 1, boundary: str = "auto",
                          stream: int = 0) -> DiffusionRun:
    """Endpoints at ``t_end`` of many independent paths.

    Affine drifts run in the compiled kernel; other drifts step a vectorised
    numpy loop.
    """
    _check_dt(dt)
    reflect = _boundary_mode(drift, s, boundary)
    n_steps = int(round(t_end / dt))
    r0 = np.ascontiguousarray(np.broadcast_to(np.asarray(r0, dtype=float), (paths,)))
    coeffs = drift.affine(s)

    def block(lo, hi, rng):
        if coeffs is not None:
            return kernels.em_affine(r0[lo:hi], coeffs[0], coeffs[1], dt, n_steps,
                                     reflect, BOUNDARY_EPS, rng)
        return _em_generic(drift, s, r0[lo:hi], dt, n_steps, reflect, rng)

    r, hits = run_blocks(paths, as_seed(seed), block, stream=stream, threads=threads)
    return DiffusionRun(r, hits, reflect)


def _em_generic(drift, s, r0, dt, n_steps, reflect, rng):
    r = r0.copy()
    hits = np.zeros(len(r), dtype=np.int64)
    dead = np.zeros(len(r), dtype=bool)
    for _ in range(n_steps):
        z = rng.standard_normal(len(r))
        live = ~dead
        x = r[live]
        b = drift.evaluate(np.clip(x, 1e-12, 1 - 1e-12), s)
        new, hit = _step(x, b, dt, z[live], reflect)
        if hit is None:
            old = x + b * dt + np.sqrt(2.0 * x * (1.0 - x) * dt) * z[live]
            hits[live] += (old < 0) | (old > 1)
        else:
            hits[live] += hit
            dead[np.flatnonzero(live)[hit]] = True
        r[live] = new
    return r, hits


def coupled_strong_error(drift: DriftSpec, s: float, r0: float, t_end: float, dts, paths: int,
                         seed=0, refine: int = 4) -> dict:
    """Mean |r_T(dt) - r_T(fine)| for each dt, all driven by one Brownian path.

    The reference uses step ``min(dts) / refine``; each coarse increment is
    the sum of the fine increments it spans.
    """
    reflect = _boundary_mode(drift, s, "auto")
    rng = np.random.default_rng(as_seed(seed))
    fine = min(dts) / refine
    n_fine = int(round(t_end / fine))
    ratios = {dt: int(round(dt / fine)) for dt in dts}
    states = {dt: np.full(paths, float(r0)) for dt in dts}
    ref = np.full(paths, float(r0))
    acc = {dt: np.zeros(paths) for dt in dts}
    for k in range(n_fine):
        z = rng.standard_normal(paths)
        ref = _step(ref, drift.evaluate(np.clip(ref, 1e-12, 1 - 1e-12), s), fine, z, reflect)[0]
        for dt, q in ratios.items():
            acc[dt] += z
            if (k + 1) % q == 0:
                x = states[dt]
                b = drift.evaluate(np.clip(x, 1e-12, 1 - 1e-12), s)
                states[dt] = _step(x, b, dt, acc[dt] / math.sqrt(q), reflect)[0]
                acc[dt][:] = 0.0
    return {dt: float(np.mean(np.abs(states[dt] - ref))) for dt in dts}


def thermalization_check(measure: RedistributionMeasure, s: float, t_long: float, paths: int,
                         dt: float, r0: float = 0.5, seed=0, threads: int = 1) -> float:
    """KS distance between r_{t_long} under the drift built from nu and nu(s, .) itself."""
    if t_long == 0:
        samples = np.full(paths, float(r0))
    else:
        run = r_diffusion_endpoints(DriftSpec.from_measure(measure), s, r0, t_long, dt,
                                    paths, seed=seed, threads=threads)
        samples = run.r
    return ks_statistic(samples, lambda v: measure.cdf(s, v))
