# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Each kernel consumes the generator's bit stream in exactly the order used by
the pure-Python twin in ``_kernels_py``; results are bit-identical.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log1p, sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_beta,
    random_standard_normal,
    random_standard_uniform,
)

import numpy as np

BACKEND = "compiled"


cdef inline bitgen_t* _bitgen(rng) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline Py_ssize_t _bisect_right(const double[::1] a, Py_ssize_t n, double u) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if u < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef inline double _invert(const double[::1] cdf, const double[::1] grid, double u) noexcept nogil:
    cdef Py_ssize_t m = cdf.shape[0]
    cdef Py_ssize_t last = m - 2
    cdef Py_ssize_t j = _bisect_right(cdf, m, u) - 1
    cdef double w, out
    if j < 0:
        j = 0
    elif j > last:
        j = last
    w = (u - cdf[j]) / (cdf[j + 1] - cdf[j])
    out = grid[j] + w * (grid[j + 1] - grid[j])
    return out if out < grid[m - 1] else grid[m - 1]


cdef inline double _draw_eps(bitgen_t* bg, int kind, double a, double b,
                             const double[::1] cdf, const double[::1] grid) noexcept nogil:
    if kind == 0:
        return random_standard_uniform(bg)
    if kind == 1:
        return random_beta(bg, a, b)
    return _invert(cdf, grid, random_standard_uniform(bg))


cdef inline double _clip(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def pair_endpoints(const double[::1] x0, const double[::1] s0, double lam1, double lam2,
                   bint two_prop, double rate, double t_end, sampler, rng):
    """Endpoints at ``t_end`` of independent two-agent runs, state (x, s)."""
    cdef Py_ssize_t n = x0.shape[0], i
    cdef int kind = sampler.kind
    cdef double a = sampler.a, b = sampler.b
    cdef const double[::1] cdf = np.ascontiguousarray(sampler.cdf, dtype=float)
    cdef const double[::1] grid = np.ascontiguousarray(sampler.grid, dtype=float)
    x_out = np.empty(n)
    ev_out = np.zeros(n, dtype=np.int64)
    cdef double[::1] xo = x_out
    cdef long long[::1] evo = ev_out
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double x, s, t, eps, pool
    cdef long long k
    with rng.bit_generator.lock, nogil:
        for i in range(n):
            x = x0[i]
            s = s0[i]
            t = 0.0
            k = 0
            while True:
                t += -log1p(-random_standard_uniform(bg)) / rate
                if t > t_end:
                    break
                eps = _draw_eps(bg, kind, a, b, cdf, grid)
                if two_prop:
                    pool = (1.0 - lam1) * x + (1.0 - lam2) * (s - x)
                    x = lam1 * x + eps * pool
                else:
                    x = lam1 * x + (1.0 - lam1) * eps * s
                x = _clip(x, 0.0, s)
                k += 1
            xo[i] = x
            evo[i] = k
    return x_out, ev_out


def nagent_endpoints(const double[:, ::1] x0, const long long[::1] pi, const long long[::1] pj,
                     const double[::1] cum, double total_rate, double lam, double t_end,
                     sampler, rng):
    """Endpoints of N-agent runs; one global clock, categorical pair choice."""
    cdef Py_ssize_t n = x0.shape[0], npairs = pi.shape[0], trial, q
    cdef int kind = sampler.kind
    cdef double a = sampler.a, b = sampler.b
    cdef const double[::1] cdf = np.ascontiguousarray(sampler.cdf, dtype=float)
    cdef const double[::1] grid = np.ascontiguousarray(sampler.grid, dtype=float)
    x_out = np.array(x0, dtype=float, copy=True)
    ev_out = np.zeros(n, dtype=np.int64)
    cdef double[:, ::1] x = x_out
    cdef long long[::1] evo = ev_out
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double t, eps, s, xi
    cdef long long i, j, k
    with rng.bit_generator.lock, nogil:
        for trial in range(n):
            t = 0.0
            k = 0
            while True:
                t += -log1p(-random_standard_uniform(bg)) / total_rate
                if t > t_end:
                    break
                if npairs > 1:
                    q = _bisect_right(cum, npairs, random_standard_uniform(bg))
                    if q > npairs - 1:
                        q = npairs - 1
                else:
                    q = 0
                eps = _draw_eps(bg, kind, a, b, cdf, grid)
                i = pi[q]
                j = pj[q]
                s = x[trial, i] + x[trial, j]
                xi = _clip(lam * x[trial, i] + (1.0 - lam) * eps * s, 0.0, s)
                x[trial, i] = xi
                x[trial, j] = s - xi
                k += 1
            evo[trial] = k
    return x_out, ev_out


def ctmc_endpoints(const long long[::1] states0, const double[::1] exit_rate,
                   const double[:, ::1] cum, double t_end, rng):
    """Finite-state jump chain; ``cum`` holds row-wise cumulative jump probabilities."""
    cdef Py_ssize_t n = states0.shape[0], nstates = exit_rate.shape[0], trial
    out = np.array(states0, dtype=np.int64, copy=True)
    ev_out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] st = out
    cdef long long[::1] evo = ev_out
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double t, q
    cdef long long cur, k, nxt
    with rng.bit_generator.lock, nogil:
        for trial in range(n):
            cur = st[trial]
            t = 0.0
            k = 0
            while True:
                q = exit_rate[cur]
                if q <= 0.0:
                    break
                t += -log1p(-random_standard_uniform(bg)) / q
                if t > t_end:
                    break
                nxt = _bisect_right(cum[cur], nstates, random_standard_uniform(bg))
                if nxt > nstates - 1:
                    nxt = nstates - 1
                cur = nxt
                k += 1
            st[trial] = cur
            evo[trial] = k
    return out, ev_out


def em_affine(const double[::1] r0, double c0, double c1, double dt, long long n_steps,
              bint reflect, double eb, rng):
    """Euler-Maruyama for dr = (c0 + c1 r) dt + sqrt(2 r (1 - r)) dW on [0, 1].

    Step-major: every step draws one normal per path, absorbed or not.
    Returns endpoints and per-path boundary event counts.
    """
    cdef Py_ssize_t n = r0.shape[0], p
    out = np.array(r0, dtype=float, copy=True)
    hits = np.zeros(n, dtype=np.int64)
    dead = np.zeros(n, dtype=np.uint8)
    cdef double[::1] r = out
    cdef long long[::1] h = hits
    cdef unsigned char[::1] d = dead
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double z, x, new
    cdef long long step
    with rng.bit_generator.lock, nogil:
        for step in range(n_steps):
            for p in range(n):
                z = random_standard_normal(bg)
                if d[p]:
                    continue
                x = r[p]
                new = x + (c0 + c1 * x) * dt + sqrt(2.0 * x * (1.0 - x) * dt) * z
                if reflect:
                    if new < 0.0:
                        new = -new
                        h[p] += 1
                    elif new > 1.0:
                        new = 2.0 - new
                        h[p] += 1
                    new = _clip(new, 0.0, 1.0)
                else:
                    if new <= eb:
                        new = 0.0
                        d[p] = 1
                        h[p] += 1
                    elif new >= 1.0 - eb:
                        new = 1.0
                        d[p] = 1
                        h[p] += 1
                r[p] = new
    return out, hits


def eps_infinity(double lam1, double lam2, long long depth, Py_ssize_t n, sampler, rng):
    """Truncated limit of r <- r (lam1 + (lam2 - lam1) eps) + (1 - lam2) eps.

    Horner evaluation from the deepest term, started at an independent eps
    draw so the result stays in [0, 1].  Draws are step-major.
    """
    cdef int kind = sampler.kind
    cdef double a = sampler.a, b = sampler.b
    cdef const double[::1] cdf = np.ascontiguousarray(sampler.cdf, dtype=float)
    cdef const double[::1] grid = np.ascontiguousarray(sampler.grid, dtype=float)
    out = np.empty(n)
    cdef double[::1] r = out
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t p
    cdef long long k
    cdef double e
    with rng.bit_generator.lock, nogil:
        for p in range(n):
            r[p] = _draw_eps(bg, kind, a, b, cdf, grid)
        for k in range(depth):
            for p in range(n):
                e = _draw_eps(bg, kind, a, b, cdf, grid)
                r[p] = (1.0 - lam2) * e + (lam1 + (lam2 - lam1) * e) * r[p]
    return out
