"""Runners behind the ``wealthdual run`` command.

Each runner takes a validated :class:`ExperimentConfig` and returns an
:class:`Outcome`: a list of checks (estimate, reference, threshold, verdict)
plus optional histogram data and per-sample columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats as sps

from . import diffusion, duality, nagent, stationary
from .config import ExperimentConfig
from .exchange import ModelParams, simulate_endpoints
from .measures import Beta, Density1D, Uniform, from_config
from .stats import (Histogram, fit_beta_by_moments, histogram, ks_statistic, ks_threshold,
                    mean_stderr)
from .trials import block_rng


class Check(NamedTuple):
    check: str
    key: str
    estimate: float
    reference: float
    stderr: float
    threshold: float
    passed: bool


@dataclass
class Outcome:
    checks: list = field(default_factory=list)
    histogram: Histogram | None = None
    samples: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _equal(check, key, est, ref, se, sigma):
    diff = abs(est - ref)
    return Check(check, key, est, ref, se, sigma * se, bool(diff == 0.0 or diff < sigma * se))


def _below(check, key, est, threshold, ref=0.0):
    return Check(check, key, est, ref, math.nan, threshold, bool(est < threshold))


def _measure(cfg):
    return from_config(cfg.measure)


def _mu_density(kind, params):
    if kind == "exponential":
        return Density1D.exponential(params.get("rate", 1.0))
    if kind == "gamma":
        return Density1D.gamma(params.get("shape", 2.0), params.get("rate", 1.0))
    return Density1D.pareto1(params.get("alpha", 1.5))


def run_canonical(cfg: ExperimentConfig) -> Outcome:
    p, tol = cfg.params, cfg.tolerance
    nu = _measure(cfg)
    n = cfg.trials
    rng = block_rng(cfg.seed, 0, 0)
    out = Outcome()
    ks_max = tol["ks_max"] if tol["ks_max"] is not None else ks_threshold(n)
    if p["s_law"] == "point":
        s = p["s"]
        x, y = stationary.sample_canonical_energy(s, nu, rng, n)
        r = x / s
        out.checks.append(_below("ks_fraction", f"s={s!r}", ks_statistic(r, lambda v: nu.cdf(s, v)),
                                 ks_max))
        if isinstance(nu, Uniform) or (isinstance(nu, Beta) and nu.a == nu.b):
            out.checks.extend(_harmonic_checks(nu, x, y, p["max_level"], tol["harmonic_sigma"]))
    else:
        law = stationary.GammaLaw(p["s_shape"], p["s_rate"])
        x, y = stationary.sample_grand_canonical(stationary.GrandCanonicalSpec(law), 0.0, nu,
                                                 rng=rng, size=n)
        r = x / (x + y)
        k = None
        if isinstance(nu, Uniform):
            k = 1.0
        elif isinstance(nu, Beta) and nu.a == nu.b:
            k = nu.a
        if k is not None and math.isclose(2 * k, p["s_shape"]):
            ref = sps.gamma(k, scale=1.0 / p["s_rate"]).cdf
            out.checks.append(_below("ks_marginal", "x", ks_statistic(x, ref), ks_max))
            out.checks.append(_below("ks_marginal", "y", ks_statistic(y, ref), ks_max))
            prod = (x - x.mean()) * (y - y.mean())
            cov, se = mean_stderr(prod)
            out.checks.append(_equal("covariance", "x,y", cov, 0.0, se, tol["sigma"]))
        elif not nu.s_dependent:
            out.checks.append(_below("ks_fraction", "grand", ks_statistic(r, lambda v: nu.cdf(1.0, v)),
                                     ks_max))
    out.histogram = histogram(r, p["bins"])
    return out


def _harmonic_checks(nu, x, y, max_level, sigma):
    # x^n y^m / c_nm has the same mean on every (n, m) of a level; each entry
    # is compared with (level, 0) through paired differences
    ctable = duality.reference_table(nu, max_level)
    checks = []
    for level in range(1, max_level + 1):
        base = x**level / ctable.c[(level, 0)]
        for n in range(level - 1, -1, -1):
            m = level - n
            diff, se = mean_stderr(x**n * y**m / ctable.c[(n, m)] - base)
            checks.append(_equal("harmonic_profile", f"n={n},m={m}", diff, 0.0, se, sigma))
    return checks


def run_wealth_stationary(cfg: ExperimentConfig) -> Outcome:
    p, sigma = cfg.params, cfg.tolerance["sigma"]
    nu = _measure(cfg)
    lam, s = p["lambda"], p["s"]
    rng = block_rng(cfg.seed, 0, 0)
    x0, y0 = stationary.sample_stationary_wealth(s, lam, nu, rng=rng, size=cfg.trials)
    x, y, _ = simulate_endpoints(x0, y0, ModelParams(lam), nu, p["t_end"], seed=cfg.seed,
                                 threads=cfg.threads, stream=1)
    alpha = stationary.alpha_moments(lam, nu, p["max_order"])
    out = Outcome()
    for order in range(1, p["max_order"] + 1):
        for i in range(order, -1, -1):
            j = order - i
            est, se = mean_stderr(x**i * y**j)
            ref = s**order * stationary.alpha_joint(lam, nu, i, j, alpha)
            out.checks.append(_equal("joint_moment", f"i={i},j={j}", est, ref, se, sigma))
    out.histogram = histogram(x / s, p["bins"])
    return out


def run_product_check(cfg: ExperimentConfig) -> Outcome:
    p = cfg.params
    mu = _mu_density(p["mu"], p["mu_params"])
    sup = stationary.verify_product_invariance(mu, _measure(cfg))
    return Outcome([_below("product_sup", p["mu"], sup, cfg.tolerance["sup_max"])])


def _run_duality(cfg: ExperimentConfig, model: str) -> Outcome:
    p = cfg.params
    res = duality.duality_sweep(model, p["x"], p["y"], p["max_order"], p["times"], cfg.trials,
                                measure=_measure(cfg), lam=p.get("lambda", 0.0), seed=cfg.seed,
                                threads=cfg.threads, sigma=cfg.tolerance["sigma"])
    checks = []
    if model == "energy" and isinstance(_measure(cfg), Uniform):
        ctable = duality.reference_table(Uniform(), 6)
        for level in range(1, 7):
            table = duality.energy_dual_rates(Uniform(), ctable, level)
            dev = max(abs(q - 1.0 / (level + 1)) for q in table.rates.values())
            checks.append(_below("kmp_rates", f"level={level}", dev, 1e-12))
    for r in res:
        thr = r.sigma * (r.stderr_lhs + r.stderr_rhs)
        checks.append(Check("duality", f"n={r.n},m={r.m},t={r.t!r}", r.lhs, r.rhs,
                            r.stderr_lhs + r.stderr_rhs, thr, r.passed))
    return Outcome(checks)


def run_duality_energy(cfg):
    return _run_duality(cfg, "energy")


def run_duality_wealth(cfg):
    return _run_duality(cfg, "wealth")


def run_diffusion(cfg: ExperimentConfig) -> Outcome:
    p = cfg.params
    s = p["s"]
    paths = p["paths"] or cfg.trials
    grid = np.linspace(0.0, 1.0, 101)[1:-1]
    if p["drift"] == "linear":
        drift = diffusion.DriftSpec.linear(p["alpha"])
        target = sps.beta(p["alpha"], p["alpha"])
        ref_cdf, ref_pdf = target.cdf, target.pdf
    else:
        nu = _measure(cfg)
        drift = diffusion.DriftSpec.from_measure(nu)
        ref_cdf = lambda v: nu.cdf(s, v)
        ref_pdf = lambda v: nu.pdf(s, v)
    run = diffusion.r_diffusion_endpoints(drift, s, p["r0"], p["t_end"], p["dt"], paths,
                                          seed=cfg.seed, threads=cfg.threads)
    out = Outcome()
    out.checks.append(_below("ks_stationary", f"t={p['t_end']!r}", ks_statistic(run.r, ref_cdf),
                             cfg.tolerance["ks_max"]))
    psi = diffusion.stationary_density(drift, s, grid, method="quad")
    out.checks.append(_below("density_roundtrip", "sup", float(np.max(np.abs(psi - ref_pdf(grid)))),
                             1e-6))
    out.histogram = histogram(run.r, p["bins"])
    out.samples = {"r": run.r, "boundary_hits": run.boundary_hits}
    return out


def _kernel(p):
    if p["topology"] == "ring":
        return nagent.ring(p["n"])
    if p["topology"] == "complete":
        return nagent.complete(p["n"])
    return nagent.build_walk(p["matrix"])


def run_nagent(cfg: ExperimentConfig) -> Outcome:
    p = cfg.params
    kernel = _kernel(p)
    n = kernel.size
    if p["x0"] == "unit":
        x0 = np.zeros(n)
        x0[0] = 1.0
    elif p["x0"] == "uniform":
        x0 = np.ones(n)
    else:
        x0 = np.asarray(p["x0"], dtype=float)
    trials = p["trials"] or cfg.trials
    out = Outcome()
    lam = p["lambda"]
    for t in p["t_end"]:
        # the profile depends on (lam, t) only through (1 - lam) t
        dev = float(np.max(np.abs(nagent.mean_profile(x0, lam, kernel, t)
                                  - nagent.mean_profile(x0, 0.0, kernel, (1.0 - lam) * t))))
        out.checks.append(_below("time_change", f"t={t!r}", dev, 1e-12))
    for ti, t in enumerate(p["t_end"]):
        rows = nagent.expected_wealth_check(x0, p["lambda"], kernel, t, trials, _measure(cfg),
                                            seed=cfg.seed, threads=cfg.threads,
                                            sigma=cfg.tolerance["sigma"], stream=ti)
        for r in rows:
            out.checks.append(Check("mean_wealth", f"agent={r.agent},t={t!r}", r.mc_mean,
                                    r.analytic, r.stderr, cfg.tolerance["sigma"] * r.stderr,
                                    r.passed))
    return out


def run_eps_infinity(cfg: ExperimentConfig) -> Outcome:
    p, tol = cfg.params, cfg.tolerance
    nu = _measure(cfg)
    lam, lam2 = p["lambda"], p["lambda2"]
    rng = block_rng(cfg.seed, 0, 0)
    if lam2 is None:
        eps = stationary.sample_eps_infinity(lam, nu, rng=rng, size=cfg.trials)
    else:
        eps, _ = stationary.sample_two_prop(1.0, lam, lam2, nu, rng=rng, size=cfg.trials)
    alpha = stationary.alpha_moments(lam, nu, p["n_max"], lam2)
    out = Outcome()
    for k in range(1, p["n_max"] + 1):
        est, se = mean_stderr(eps**k)
        out.checks.append(_equal("alpha_moment", f"n={k}", est, float(alpha[k]), se, tol["sigma"]))
    if p["separation"]:
        a, b = fit_beta_by_moments(eps)
        ks = ks_statistic(eps, sps.beta(a, b).cdf)
        thr = max(tol["ks_min"], tol["null_factor"] * ks_threshold(cfg.trials))
        out.checks.append(Check("beta_separation", f"a={a:.6g},b={b:.6g}", ks, 0.0, math.nan,
                                thr, bool(ks > thr)))
    out.histogram = histogram(eps, p["bins"])
    return out


RUNNERS = {
    "canonical": run_canonical,
    "wealth_stationary": run_wealth_stationary,
    "product_check": run_product_check,
    "duality_energy": run_duality_energy,
    "duality_wealth": run_duality_wealth,
    "diffusion": run_diffusion,
    "nagent": run_nagent,
    "eps_infinity": run_eps_infinity,
}


def run(cfg: ExperimentConfig) -> Outcome:
    return RUNNERS[cfg.experiment](cfg)
