"""Two-agent redistribution maps and the event-driven exchange process.

State is a :class:`WealthPair` ``(x, y)``.  At the events of a Poisson clock
with rate ``jump_rate`` a fraction ``eps ~ nu(x + y, .)`` is drawn and the
pair is replaced by

* ``T_eps(x, y) = (eps s, (1 - eps) s)`` (energy model, lambda = 0),
* ``T^lam_eps = lam (x, y) + (1 - lam) T_eps(x, y)`` (wealth model), or
* the two-propensity map where agent i keeps ``lam_i`` of its own wealth.

All maps compute the first coordinate and set the second to ``s - x'`` so
that the total is conserved to the last bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ZeroTotal
from .measures import RedistributionMeasure
from .trials import as_seed, run_blocks


class WealthPair(NamedTuple):
    x: float
    y: float

    @property
    def s(self) -> float:
        return self.x + self.y

    @property
    def r(self) -> float:
        return to_rs(self)[0]


@dataclass(frozen=True)
class ModelParams:
    lam: float = 0.0
    lam2: float | None = None
    jump_rate: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValueError(f"lambda must lie in [0, 1), got {self.lam}")
        if self.lam2 is not None and not 0.0 <= self.lam2 < 1.0:
            raise ValueError(f"lambda2 must lie in [0, 1), got {self.lam2}")
        if not self.jump_rate > 0:
            raise ValueError("jump_rate must be positive")

    @property
    def two_prop(self) -> bool:
        return self.lam2 is not None


def _pair(x_new: float, s: float) -> WealthPair:
    x_new = min(max(x_new, 0.0), s)
    return WealthPair(x_new, s - x_new)


def apply_T(eps: float, p: WealthPair) -> WealthPair:
    s = p[0] + p[1]
    return _pair(eps * s, s)


def apply_T_lambda(lam: float, eps: float, p: WealthPair) -> WealthPair:
    x, y = p
    s = x + y
    return _pair(lam * x + (1.0 - lam) * eps * s, s)


def apply_T_two_prop(l1: float, l2: float, eps: float, p: WealthPair) -> WealthPair:
    x, y = p
    s = x + y
    pool = (1.0 - l1) * x + (1.0 - l2) * (s - x)
    return _pair(l1 * x + eps * pool, s)


def _apply(params: ModelParams, eps: float, p: WealthPair) -> WealthPair:
    if params.two_prop:
        return apply_T_two_prop(params.lam, params.lam2, eps, p)
    if params.lam == 0.0:
        return apply_T(eps, p)
    return apply_T_lambda(params.lam, eps, p)


def jump(state: WealthPair, params: ModelParams, measure: RedistributionMeasure,
         rng: np.random.Generator) -> WealthPair:
    """One redistribution event; eps is drawn from nu at the (conserved) total."""
    state = WealthPair(*state)
    eps = float(measure.sample(rng, state.s))
    return _apply(params, eps, state)


def simulate(initial: WealthPair, params: ModelParams, measure: RedistributionMeasure,
             t_end: float, rng: np.random.Generator, eps_log: list | None = None):
    """Event-driven trajectory on ``[0, t_end]``.

    Returns a list of ``(time, WealthPair)``: the initial state, one entry per
    event, and the (unchanged) state at ``t_end``.  Waiting times are drawn by
    inversion.  If ``eps_log`` is given, the eps of every event is appended.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    state = WealthPair(*map(float, initial))
    traj = [(0.0, state)]
    t = 0.0
    while True:
        t += -math.log1p(-rng.random()) / params.jump_rate
        if t > t_end:
            break
        eps = float(measure.sample(rng, state.s))
        if eps_log is not None:
            eps_log.append(eps)
        state = _apply(params, eps, state)
        traj.append((t, state))
    if traj[-1][0] != t_end:
        traj.append((float(t_end), state))
    return traj


def simulate_endpoints(x0, y0, params: ModelParams, measure: RedistributionMeasure,
                       t_end: float, trials: int | None = None, seed=0, threads: int = 1,
                       stream: int = 0):
    """States at ``t_end`` of many independent runs.

    ``x0``, ``y0`` are scalars (broadcast to ``trials`` runs) or arrays of
    initial states, one per run.  Returns ``(x, y, n_events)`` arrays.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if trials is None:
        trials = int(np.broadcast(x0, y0).size)
    x0 = np.ascontiguousarray(np.broadcast_to(x0, (trials,)))
    s0 = np.ascontiguousarray(x0 + np.broadcast_to(y0, (trials,)))
    seed = as_seed(seed)

    if measure.s_dependent and not np.all(s0 == s0[0]):
        return _endpoints_slow(x0, s0, params, measure, t_end, seed, threads, stream)

    sampler = measure.sampler(float(s0[0]))
    l1 = params.lam
    l2 = params.lam2 if params.two_prop else params.lam

    def block(lo, hi, rng):
        return kernels.pair_endpoints(x0[lo:hi], s0[lo:hi], l1, l2, params.two_prop,
                                      params.jump_rate, float(t_end), sampler, rng)

    x, events = run_blocks(trials, seed, block, stream=stream, threads=threads)
    return x, s0 - x, events


def _endpoints_slow(x0, s0, params, measure, t_end, seed, threads, stream):
    def block(lo, hi, rng):
        xs = np.empty(hi - lo)
        ev = np.empty(hi - lo, dtype=np.int64)
        for k in range(lo, hi):
            log = []
            traj = simulate(WealthPair(x0[k], s0[k] - x0[k]), params, measure, t_end, rng, log)
            xs[k - lo] = traj[-1][1].x
            ev[k - lo] = len(log)
        return xs, ev

    x, events = run_blocks(len(x0), seed, block, stream=stream, threads=threads)
    return x, s0 - x, events


def to_rs(p: WealthPair) -> tuple[float, float]:
    x, y = p
    s = x + y
    if s == 0:
        raise ZeroTotal("r = x / s is undefined for s = 0")
    return x / s, s


def from_rs(r: float, s: float) -> WealthPair:
    x = r * s
    return WealthPair(x, s - x)
