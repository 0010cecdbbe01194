"""Deterministic block-parallel Monte Carlo.

Replicates are grouped into fixed-size blocks.  Block ``i`` of an experiment
tagged ``tag`` draws from a Philox stream keyed by ``(seed, tag, i)``, so the
sample produced by a block does not depend on which process runs it.  Blocks
are reduced in index order, which makes every result independent of the
worker count.
"""

from __future__ import annotations

import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

BLOCK = 1 << 14

_WORKERS = 1


def set_workers(n):
    """Set the process count used when callers pass ``workers=None``."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def get_workers(workers=None):
    return _WORKERS if workers is None else max(1, int(workers))


def tag_of(name):
    """Stable integer tag for a named experiment."""
    return zlib.crc32(name.encode())


def block_rng(seed, tag, block):
    """Generator for one block; a pure function of its three keys."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(reps, block=BLOCK):
    """Split ``reps`` replicates into ``(index, size)`` pairs."""
    n = math.ceil(reps / block)
    return [(i, min(block, reps - i * block)) for i in range(n)]


_POOLS = {}


def _pool(workers):
    pool = _POOLS.get(workers)
    if pool is None:
        pool = ProcessPoolExecutor(max_workers=workers)
        _POOLS[workers] = pool
    return pool


def shutdown():
    for p in _POOLS.values():
        p.shutdown(cancel_futures=True)
    _POOLS.clear()


def map_blocks(fn, jobs, workers=None, **kwargs):
    """Yield ``fn(index, size, **kwargs)`` for each job, in job order.

    ``fn`` must be a module-level function so it can be sent to worker
    processes.
    """
    workers = get_workers(workers)
    call = partial(_call, fn, kwargs)
    if workers == 1 or len(jobs) <= 1:
        for job in jobs:
            yield call(job)
        return
    chunk = max(1, len(jobs) // (4 * workers))
    yield from _pool(workers).map(call, jobs, chunksize=chunk)


def _call(fn, kwargs, job):
    index, size = job
    return fn(index, size, **kwargs)


def cpu_count():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
