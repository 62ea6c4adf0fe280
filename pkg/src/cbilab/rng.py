"""Reproducible per-path random streams and deterministic parallel fan-out.

Every path owns a counter-based Philox generator keyed by ``(seed, stream)``
through ``numpy.random.SeedSequence``, so a path never depends on which
worker produced it or on how many workers there were.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStreamSpec:
    """Identifies one random stream: a 64-bit seed and a path index."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.seed) & 0xFFFFFFFFFFFFFFFF, int(self.stream)])
        return np.random.Generator(np.random.Philox(ss))


def worker_count(workers=None):
    """Requested worker count, capped by ``CBILAB_THREADS`` when set."""
    env = os.environ.get("CBILAB_THREADS")
    cap = int(env) if env else None
    if workers is None:
        workers = cap if cap is not None else 1
    elif cap is not None:
        workers = min(workers, cap)
    return max(1, int(workers))


def _run_chunk(fn, seed, streams, kwargs):
    return [fn(rng=RngStreamSpec(seed, s), **kwargs) for s in streams]


def map_streams(fn, n, seed, workers=None, chunk=None, **kwargs):
    """``[fn(rng=RngStreamSpec(seed, i), **kwargs) for i in range(n)]``, possibly in parallel.

    Results are always returned in stream order.
    """
    workers = worker_count(workers)
    if workers == 1 or n < 2:
        return _run_chunk(fn, seed, range(n), kwargs)
    if chunk is None:
        chunk = max(1, -(-n // (4 * workers)))
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(_run_chunk, fn, seed, range(a, b), kwargs) for a, b in bounds]
        for f in futs:
            out.extend(f.result())
    return out
