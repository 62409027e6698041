"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Random draws are taken in the same order and every floating-point
expression is evaluated in the same order, so outputs match the compiled
kernels bit for bit.  Event-driven loops are scalar Python and slow; the
step-major kernels (Euler-Maruyama, eps-infinity) are vectorised.
"""

import bisect
import math

import numpy as np

from .measures import KIND_BETA, KIND_UNIFORM, invert_table, invert_table_scalar

BACKEND = "python"


def _scalar_drawer(sampler, rng):
    if sampler.kind == KIND_UNIFORM:
        return rng.random
    if sampler.kind == KIND_BETA:
        a, b = sampler.a, sampler.b
        return lambda: rng.beta(a, b)
    cdf = [float(v) for v in sampler.cdf]
    grid = [float(v) for v in sampler.grid]
    return lambda: invert_table_scalar(cdf, grid, rng.random())


def _vector_draw(sampler, rng, n):
    if sampler.kind == KIND_UNIFORM:
        return rng.random(n)
    if sampler.kind == KIND_BETA:
        return rng.beta(sampler.a, sampler.b, n)
    return invert_table(sampler.cdf, sampler.grid, rng.random(n))


def _clip(v, lo, hi):
    return lo if v < lo else (hi if v > hi else v)


def pair_endpoints(x0, s0, lam1, lam2, two_prop, rate, t_end, sampler, rng):
    draw = _scalar_drawer(sampler, rng)
    uniform = rng.random
    log1p = math.log1p
    n = len(x0)
    x_out = np.empty(n)
    ev_out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        x = float(x0[i])
        s = float(s0[i])
        t = 0.0
        k = 0
        while True:
            t += -log1p(-uniform()) / rate
            if t > t_end:
                break
            eps = draw()
            if two_prop:
                pool = (1.0 - lam1) * x + (1.0 - lam2) * (s - x)
                x = lam1 * x + eps * pool
            else:
                x = lam1 * x + (1.0 - lam1) * eps * s
            x = _clip(x, 0.0, s)
            k += 1
        x_out[i] = x
        ev_out[i] = k
    return x_out, ev_out


def nagent_endpoints(x0, pi, pj, cum, total_rate, lam, t_end, sampler, rng):
    draw = _scalar_drawer(sampler, rng)
    uniform = rng.random
    log1p = math.log1p
    cum = [float(c) for c in cum]
    pi = [int(v) for v in pi]
    pj = [int(v) for v in pj]
    npairs = len(pi)
    x_out = np.array(x0, dtype=float, copy=True)
    ev_out = np.zeros(x_out.shape[0], dtype=np.int64)
    for trial in range(x_out.shape[0]):
        x = [float(v) for v in x_out[trial]]
        t = 0.0
        k = 0
        while True:
            t += -log1p(-uniform()) / total_rate
            if t > t_end:
                break
            if npairs > 1:
                q = min(bisect.bisect_right(cum, uniform()), npairs - 1)
            else:
                q = 0
            eps = draw()
            i, j = pi[q], pj[q]
            s = x[i] + x[j]
            xi = _clip(lam * x[i] + (1.0 - lam) * eps * s, 0.0, s)
            x[i] = xi
            x[j] = s - xi
            k += 1
        x_out[trial] = x
        ev_out[trial] = k
    return x_out, ev_out


def ctmc_endpoints(states0, exit_rate, cum, t_end, rng):
    uniform = rng.random
    log1p = math.log1p
    rates = [float(q) for q in exit_rate]
    rows = [[float(c) for c in row] for row in cum]
    nstates = len(rates)
    out = np.array(states0, dtype=np.int64, copy=True)
    ev_out = np.zeros(len(out), dtype=np.int64)
    for trial in range(len(out)):
        cur = int(out[trial])
        t = 0.0
        k = 0
        while True:
            q = rates[cur]
            if q <= 0.0:
                break
            t += -log1p(-uniform()) / q
            if t > t_end:
                break
            cur = min(bisect.bisect_right(rows[cur], uniform()), nstates - 1)
            k += 1
        out[trial] = cur
        ev_out[trial] = k
    return out, ev_out


def em_affine(r0, c0, c1, dt, n_steps, reflect, eb, rng):
    r = np.array(r0, dtype=float, copy=True)
    n = len(r)
    hits = np.zeros(n, dtype=np.int64)
    dead = np.zeros(n, dtype=bool)
    for _ in range(int(n_steps)):
        z = rng.standard_normal(n)
        live = ~dead
        x = r[live]
        new = x + (c0 + c1 * x) * dt + np.sqrt(2.0 * x * (1.0 - x) * dt) * z[live]
        if reflect:
            lo = new < 0.0
            hi = new > 1.0
            new[lo] = -new[lo]
            new[hi] = 2.0 - new[hi]
            np.clip(new, 0.0, 1.0, out=new)
            hits[live] += lo | hi
        else:
            lo = new <= eb
            hi = ~lo & (new >= 1.0 - eb)
            new[lo] = 0.0
            new[hi] = 1.0
            idx = np.flatnonzero(live)
            dead[idx[lo | hi]] = True
            hits[live] += lo | hi
        r[live] = new
    return r, hits


def eps_infinity(lam1, lam2, depth, n, sampler, rng):
    r = _vector_draw(sampler, rng, n)
    for _ in range(int(depth)):
        e = _vector_draw(sampler, rng, n)
        r = (1.0 - lam2) * e + (lam1 + (lam2 - lam1) * e) * r
    return r
