"""Deterministic seeding and parallel execution of Monte Carlo trial batches.

Trials are cut into fixed-size blocks by trial index.  Block ``b`` of stream
``k`` under master seed ``seed`` always gets the generator
``PCG64(SeedSequence(seed, spawn_key=(k, b)))``, so results depend only on
(seed, stream, trial count), never on the number of workers or on the order
in which blocks finish.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

BLOCK_SIZE = 8192


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def as_seed(seed_or_rng) -> int:
    """Accept an int seed or a Generator (from which a seed is drawn)."""
    if isinstance(seed_or_rng, np.random.Generator):
        return int(seed_or_rng.integers(0, 2**63 - 1))
    if seed_or_rng is None:
        return int(np.random.SeedSequence().entropy % (2**63))
    return int(seed_or_rng)


def run_blocks(n_trials: int, seed: int, fn: Callable, *, stream: int = 0,
               threads: int = 1, block_size: int = BLOCK_SIZE):
    """Run ``fn(start, stop, rng)`` over consecutive trial blocks.

    ``fn`` returns an array or a tuple of arrays with leading dimension
    ``stop - start``; the per-block results are concatenated in trial order.
    Compiled kernels release the GIL, so threads give real parallelism.
    """
    if n_trials <= 0:
        raise ValueError("n_trials must be positive")
    bounds = [(b, lo, min(lo + block_size, n_trials))
              for b, lo in enumerate(range(0, n_trials, block_size))]

    def one(item):
        b, lo, hi = item
        return fn(lo, hi, block_rng(seed, stream, b))

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, bounds))
    else:
        parts = [one(item) for item in bounds]

    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)
