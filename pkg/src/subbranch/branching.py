"""Exact simulation of the discrete chain and its extinction time.

Offspring sums over many parents are drawn in one shot from the law of the
sum (Poisson, negative binomial or multinomial cell counts), which is exact
and keeps the cost per generation independent of the population size.
Family emigration removes whole families before they are summed, so the
emigration branch reduces to the offspring sum of the remaining parents.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _jit
from .errors import InsufficientSurvivors
from .model import (
    ExplicitPMF,
    FiniteMean,
    FinitePMF,
    Fixed,
    Geometric,
    HeavyTail,
    PointMass,
    PoissonCount,
    PoissonUnit,
    TwoPoint,
    sample_discrete,
    sample_offspring,
)
from .parallel import block_rng, block_sizes, map_blocks, tag_of

DEFAULT_CAP = 10**6
_EMPTY = np.zeros(1)


# --------------------------------------------------------------------------
# packing laws for compiled kernels
# --------------------------------------------------------------------------


def _pack_discrete(law):
    if isinstance(law, PointMass):
        return (_jit.CONST, float(law.k), _EMPTY)
    if isinstance(law, PoissonCount):
        return (_jit.POIS, float(law.mean), _EMPTY)
    p = np.ascontiguousarray(law.pmf(), dtype=np.float64)
    return (_jit.PMF, 0.0, p)


def pack_offspring(law):
    if isinstance(law, PoissonUnit):
        return (_jit.OFF_POIS, 1.0, _EMPTY)
    if isinstance(law, Geometric):
        return (_jit.OFF_GEOM, float(law.success), _EMPTY)
    return (_jit.OFF_PMF, 0.0, np.ascontiguousarray(law.pmf(), dtype=np.float64))


def pack_model(model):
    m = model.migration
    return (
        pack_offspring(model.offspring),
        float(m.p),
        float(m.p + m.q),
        _pack_discrete(m.fam_emigration),
        _pack_discrete(m.ind_emigration),
        _pack_discrete(m.immigration),
    )


def pack_initial(init):
    if isinstance(init, Fixed):
        return (_jit.CONST, float(init.k), _EMPTY, 0.0, 0.0)
    if isinstance(init, HeavyTail):
        return (_jit.HEAVY, 0.0, _EMPTY, float(init.gamma), float(init.c))
    kind, val, pmf = _pack_discrete(init.law)
    return (kind, val, pmf, 0.0, 0.0)


def pack_start(z0):
    return (_jit.CONST, float(z0), _EMPTY, 0.0, 0.0)


# --------------------------------------------------------------------------
# reference (literal) single-generation operations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationState:
    n: int
    z: int


@dataclass(frozen=True)
class ExtinctionRecord:
    """``T`` is the first generation with ``Z_n = 0``; ``censored`` if the cap was hit."""

    T: int
    z0: int
    censored: bool = False


def sample_migration(migration, family_sums, rng, offspring=None):
    """Draw the migration term for one generation from explicit family sums.

    Parameters
    ----------
    migration : MigrationLaw
    family_sums : sequence of int
        Offspring totals of this generation's families, in order.
    rng : numpy.random.Generator
    offspring : OffspringLaw, optional
        Needed only to draw fresh families when more families must emigrate
        than exist.

    Returns
    -------
    (int, int)
        Signed migration count and number of families cancelled.
    """
    u = rng.random()
    if u < migration.p:
        k = int(sample_discrete(migration.fam_emigration, rng))
        e = int(sample_discrete(migration.ind_emigration, rng))
        sums = list(family_sums)
        cancelled = min(k, len(sums))
        m = -sum(sums[:cancelled]) - e
        if k > len(sums) and offspring is not None:
            m -= int(np.sum(sample_offspring(offspring, rng, k - len(sums))))
        return m, cancelled
    if u < migration.p + migration.q:
        return 0, 0
    return int(sample_discrete(migration.immigration, rng)), 0


def step(state, model, rng):
    """One generation, drawing every family's offspring individually."""
    if state.z <= 0:
        return GenerationState(state.n + 1, 0)
    sums = sample_offspring(model.offspring, rng, int(state.z))
    m, _ = sample_migration(model.migration, sums, rng, model.offspring)
    return GenerationState(state.n + 1, max(0, int(np.sum(sums)) + m))


# --------------------------------------------------------------------------
# compiled path kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _extinction_time(rng, model, z, cap):
    n = 0
    while z > 0 and n < cap:
        z = _jit.step(rng, z, model)
        n += 1
    return n, z


@njit(cache=True)
def _chain_paths(rng, model, init, n_paths, cap, record_n):
    """Extinction times (``-1`` when alive at ``cap``) and ``Z_record_n``."""
    T = np.empty(n_paths, np.int64)
    zrec = np.zeros(n_paths, np.int64)
    for i in range(n_paths):
        z = _jit.draw_initial(rng, init)
        if record_n == 0:
            zrec[i] = z
        n = 0
        while z > 0 and n < cap:
            z = _jit.step(rng, z, model)
            n += 1
            if n == record_n:
                zrec[i] = z
        T[i] = n if z == 0 else -1
    return T, zrec


@njit(cache=True)
def _steps_at(rng, model, z, n_trials):
    out = np.empty(n_trials, np.int64)
    for i in range(n_trials):
        out[i] = _jit.step(rng, z, model) - z
    return out


def simulate_T(model, z0, cap=DEFAULT_CAP, rng=None):
    """Simulate one path from ``z0`` until absorption or ``cap`` generations."""
    if z0 < 1 or cap < 1:
        raise ValueError("z0 and cap must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    n, z = _extinction_time(rng, pack_model(model), np.int64(z0), np.int64(cap))
    return ExtinctionRecord(int(n), int(z0), censored=bool(z > 0))


def one_step_increments(model, z, n_trials, rng):
    """``Z_1 - z`` for ``n_trials`` independent steps from state ``z``."""
    return _steps_at(rng, pack_model(model), np.int64(z), int(n_trials))


# --------------------------------------------------------------------------
# Monte Carlo drivers
# --------------------------------------------------------------------------


def _survival_block(index, size, seed, tag, model, init, grid, cap):
    rng = block_rng(seed, tag, index)
    T, _ = _chain_paths(rng, model, init, size, cap, -1)
    alive = T < 0
    counts = np.array([np.count_nonzero(alive | (T > n)) for n in grid], dtype=np.int64)
    done = T[~alive]
    return counts, int(done.sum()), int(done.size), int(alive.sum())


@dataclass(frozen=True)
class GenerationSurvival:
    """Counts of paths with ``Z_n > 0`` on a grid of generations."""

    grid: np.ndarray
    survivors: np.ndarray
    reps: int

    @property
    def estimate(self):
        return self.survivors / self.reps


def generation_survival(model, grid, reps, seed=0, workers=None, name="generation_survival"):
    """Estimate ``P(Z_n > 0)`` on an ascending grid of generations."""
    grid = np.asarray(grid, dtype=np.int64)
    cap = int(grid.max())
    counts = np.zeros(grid.size, np.int64)
    for c, *_ in map_blocks(
        _survival_block,
        block_sizes(reps),
        workers,
        seed=seed,
        tag=tag_of(name),
        model=pack_model(model),
        init=pack_initial(model.initial),
        grid=grid,
        cap=cap,
    ):
        counts += c
    return GenerationSurvival(grid, counts, reps)


@dataclass(frozen=True)
class MeanExtinction:
    mean: float
    stderr: float
    used: int
    censored: int


def _T_block(index, size, seed, tag, model, init, cap):
    rng = block_rng(seed, tag, index)
    T, _ = _chain_paths(rng, model, init, size, cap, -1)
    done = T[T >= 0].astype(float)
    return done.sum(), (done**2).sum(), done.size, int(np.count_nonzero(T < 0))


def expected_T(model, reps=10**6, seed=0, cap=DEFAULT_CAP, workers=None, name="expected_T"):
    """Monte Carlo mean of the extinction time.

    Censored paths are dropped, which biases the mean down; a warning is
    issued whenever any path reaches the cap.
    """
    s = s2 = 0.0
    n = cens = 0
    for a, b, c, d in map_blocks(
        _T_block,
        block_sizes(reps),
        workers,
        seed=seed,
        tag=tag_of(name),
        model=pack_model(model),
        init=pack_initial(model.initial),
        cap=cap,
    ):
        s, s2, n, cens = s + a, s2 + b, n + c, cens + d
    if cens:
        warnings.warn(f"{cens} of {reps} paths censored at {cap} generations; E[T] biased low", stacklevel=2)
    mean = s / n
    var = max(s2 / n - mean**2, 0.0)
    return MeanExtinction(mean, math.sqrt(var / n), n, cens)


@dataclass(frozen=True)
class ConditionalSample:
    """Normalized values of surviving paths."""

    values: np.ndarray
    survivors: int
    reps: int
    scale: float


def _cond_block(index, size, seed, tag, model, init, n):
    rng = block_rng(seed, tag, index)
    _, z = _chain_paths(rng, model, init, size, n, n)
    return z[z > 0]


def conditional_normalized_generation(
    model,
    n,
    reps,
    seed=0,
    workers=None,
    min_survivors=1,
    target_survivors=None,
    max_reps=None,
    name="conditional_generation",
):
    """Sample ``Z_n / (b n)`` on ``{Z_n > 0}``.

    With ``target_survivors`` set, blocks are added in fixed rounds of
    ``reps`` replicates until the target is met or ``max_reps`` is reached.
    """
    kw = dict(seed=seed, tag=tag_of(name), model=pack_model(model), init=pack_initial(model.initial), n=int(n))
    parts, done = _rounds(_cond_block, kw, reps, target_survivors, max_reps, workers)
    z = np.concatenate(parts) if parts else np.zeros(0)
    if z.size < min_survivors:
        raise InsufficientSurvivors(z.size, min_survivors)
    scale = model.b * n
    return ConditionalSample(z / scale, int(z.size), done, scale)


def _rounds(fn, kw, reps, target, max_reps, workers, count=len):
    """Run rounds of ``reps`` replicates; block indices continue across rounds.

    ``count(part)`` gives the number of survivors in a block result.
    """
    jobs_per_round = block_sizes(reps)
    parts, total, done, r = [], 0, 0, 0
    while True:
        offset = r * len(jobs_per_round)
        jobs = [(offset + i, s) for i, s in jobs_per_round]
        for part in map_blocks(fn, jobs, workers, **kw):
            parts.append(part)
            total += count(part)
        done += reps
        r += 1
        if target is None or total >= target:
            break
        if max_reps is not None and done + reps > max_reps:
            break
    return parts, done
