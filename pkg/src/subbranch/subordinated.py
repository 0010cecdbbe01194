"""The chain evaluated at renewal times, ``Y(t) = Z_N(t)``.

Bulk kernels draw waiting times lazily and stop a path at absorption, so a
path costs ``min(T, N(t))`` generations.  All horizons of an ascending grid
are read off the same path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats

from . import _jit
from .analysis import predict
from .branching import _rounds, pack_initial, pack_model
from .errors import DomainError, InsufficientSurvivors
from .parallel import block_rng, block_sizes, map_blocks, tag_of
from .renewal import _count, pack_wait

# --------------------------------------------------------------------------
# single paths
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SubordinatedSample:
    """``y = Z_n`` at ``n = N(t)``; ``extinct_by`` is ``T`` when ``T <= N(t)``."""

    t: float
    y: int
    n_at_t: int
    extinct_by: int | None = None


@njit(cache=True)
def _evolve(rng, model, z, n, early_exit):
    T = -1
    for k in range(n):
        if z == 0 and early_exit:
            break
        z = _jit.step(rng, z, model)
        if z == 0 and T < 0:
            T = k + 1
    return z, T


@njit(cache=True)
def _start(rng, init):
    return _jit.draw_initial(rng, init)


def simulate_Y_at(model, interarrival, t, rng, early_exit=True):
    """One draw of ``Y(t)``.

    Draws ``Z_0``, then ``N(t)``, then runs the chain ``N(t)`` generations.
    Zero is absorbing and a step from zero consumes no randomness, so
    ``early_exit`` changes the cost but never the value.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    z0 = _start(rng, pack_initial(model.initial))
    n, _ = _count(rng, pack_wait(interarrival), float(t))
    z, T = _evolve(rng, pack_model(model), z0, n, early_exit)
    if z0 == 0:
        T = 0
    return SubordinatedSample(float(t), int(z), int(n), None if T < 0 else int(T))


# --------------------------------------------------------------------------
# bulk kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _grid_alive(rng, model, init, wait, grid, n_paths):
    """Number of paths with ``Y(t_k) > 0`` for each horizon of ``grid``."""
    G = grid.size
    alive = np.zeros(G, np.int64)
    for _ in range(n_paths):
        z = _jit.draw_initial(rng, init)
        if z == 0:
            continue
        k = 0
        s = 0.0
        while True:
            s_next = s + _jit.draw_wait(rng, wait)
            # horizons before the next epoch see the current state
            while k < G and grid[k] < s_next:
                alive[k] += 1
                k += 1
            if k == G:
                break
            z = _jit.step(rng, z, model)
            s = s_next
            if z == 0:
                break
    return alive


@njit(cache=True)
def _values_at(rng, model, init, wait, t, n_paths):
    """``Y(t)`` and ``N(t)`` of surviving paths; dead paths are dropped."""
    ys = np.empty(n_paths, np.int64)
    ns = np.empty(n_paths, np.int64)
    m = 0
    for _ in range(n_paths):
        z = _jit.draw_initial(rng, init)
        if z == 0:
            continue
        s = 0.0
        n = 0
        while True:
            s_next = s + _jit.draw_wait(rng, wait)
            if s_next > t:
                ys[m] = z
                ns[m] = n
                m += 1
                break
            z = _jit.step(rng, z, model)
            s = s_next
            n += 1
            if z == 0:
                break
    return ys[:m], ns[:m]


# --------------------------------------------------------------------------
# survival curves
# --------------------------------------------------------------------------


def wilson_interval(k, n, level=0.95):
    """Two-sided Wilson score interval for a binomial proportion."""
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return ci.low, ci.high


@dataclass(frozen=True)
class SurvivalCurve:
    t: np.ndarray
    survivors: np.ndarray
    reps: int
    lo: np.ndarray
    hi: np.ndarray

    @property
    def estimate(self):
        return self.survivors / self.reps


def _alive_block(index, size, seed, tag, model, init, wait, grid):
    return _grid_alive(block_rng(seed, tag, index), model, init, wait, grid, size)


def survival_curve(model, interarrival, t_grid, reps, seed=0, workers=None, name="survival_curve"):
    """Estimate ``P(Y(t) > 0)`` with 95% Wilson intervals on an ascending grid."""
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise DomainError("horizon grid must be strictly ascending")
    counts = np.zeros(grid.size, np.int64)
    for c in map_blocks(
        _alive_block,
        block_sizes(reps),
        workers,
        seed=seed,
        tag=tag_of(name),
        model=pack_model(model),
        init=pack_initial(model.initial),
        wait=pack_wait(interarrival),
        grid=grid,
    ):
        counts += c
    ci = np.array([wilson_interval(k, reps) for k in counts]).reshape(-1, 2)
    return SurvivalCurve(grid, counts, reps, ci[:, 0], ci[:, 1])


# --------------------------------------------------------------------------
# conditional samples
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalY:
    """``Y(t) / A(t)`` on ``{Y(t) > 0}`` with the matching ``N(t)``."""

    values: np.ndarray
    n_at_t: np.ndarray
    survivors: int
    reps: int
    scale: float


def _values_block(index, size, seed, tag, model, init, wait, t):
    return _values_at(block_rng(seed, tag, index), model, init, wait, t, size)


def surviving_values(model, interarrival, t, reps, seed=0, workers=None, target=None, max_reps=None, name="surviving_values"):
    """Raw ``(Y(t), N(t))`` of surviving paths and the replicate count used."""
    kw = dict(
        seed=seed,
        tag=tag_of(name),
        model=pack_model(model),
        init=pack_initial(model.initial),
        wait=pack_wait(interarrival),
        t=float(t),
    )
    parts, done = _rounds(_values_block, kw, reps, target, max_reps, workers, count=_first_len)
    if parts:
        y = np.concatenate([p[0] for p in parts])
        n = np.concatenate([p[1] for p in parts])
    else:
        y = n = np.zeros(0, np.int64)
    return y, n, done


def _first_len(part):
    return len(part[0])


def conditional_normalized_sample(
    model,
    interarrival,
    t,
    reps,
    seed=0,
    workers=None,
    scale=None,
    min_survivors=1,
    target_survivors=None,
    max_reps=None,
    name="conditional_Y",
):
    """Sample ``Y(t) / A(t)`` given ``Y(t) > 0`` by discarding extinct paths.

    ``A(t)`` defaults to the normalization of :func:`analysis.predict`.
    """
    if scale is None:
        scale = float(predict(model, interarrival).normalization(t))
    y, n, done = surviving_values(model, interarrival, t, reps, seed, workers, target_survivors, max_reps, name)
    if y.size < min_survivors:
        raise InsufficientSurvivors(int(y.size), min_survivors)
    return ConditionalY(y / scale, n, int(y.size), done, float(scale))


# --------------------------------------------------------------------------
# mixture identity
# --------------------------------------------------------------------------


@njit(cache=True)
def _chain_hist(rng, model, init, n_max, xs, n_paths):
    """Per generation ``n <= n_max``: paths alive and paths with ``0 < Z_n <= x``."""
    alive = np.zeros(n_max + 1, np.int64)
    below = np.zeros((n_max + 1, xs.size), np.int64)
    for _ in range(n_paths):
        z = _jit.draw_initial(rng, init)
        for n in range(n_max + 1):
            if n > 0:
                z = _jit.step(rng, z, model)
            if z == 0:
                break
            alive[n] += 1
            for j in range(xs.size):
                if z <= xs[j]:
                    below[n, j] += 1
    return alive, below


@njit(cache=True)
def _count_hist(rng, wait, t, n_max, n_paths):
    h = np.zeros(n_max + 2, np.int64)
    for _ in range(n_paths):
        n = 0
        s = 0.0
        while True:
            s += _jit.draw_wait(rng, wait)
            if s > t:
                break
            n += 1
        h[min(n, n_max + 1)] += 1
    return h


def _chain_block(index, size, seed, tag, model, init, n_max, xs):
    return _chain_hist(block_rng(seed, tag, index), model, init, n_max, xs, size)


def _count_block(index, size, seed, tag, wait, t, n_max):
    return _count_hist(block_rng(seed, tag, index), wait, t, n_max, size)


@dataclass(frozen=True)
class MixtureCheck:
    x: np.ndarray
    direct: np.ndarray
    mixture: np.ndarray
    joint_se: np.ndarray
    discrepancy: float
    se_at_max: float
    max_z: float

    @property
    def passed(self):
        return self.discrepancy <= 4.0 * self.se_at_max


def _mixture(alive, below, hist):
    w = hist[: alive.size].astype(float)
    num = (w[:, None] * below).sum(axis=0)
    den = float(w @ alive)
    return num / den


def mixture_identity_check(model, interarrival, t, x_grid, reps, seed=0, workers=None, n_max=None):
    """Compare ``P(Y(t) <= x | Y(t) > 0)`` with the mixture over ``N(t)``.

    The direct estimate comes from subordinated paths.  The mixture
    ``sum_n P(0 < Z_n <= x) P(N(t) = n) / sum_n P(Z_n > 0) P(N(t) = n)`` is
    assembled from an independent run of the chain (all generations from
    each path) and an independent run of the counting process.  Standard
    errors of the mixture come from batch means over block pairs.
    """
    xs = np.asarray(x_grid, dtype=float)
    if n_max is None:
        n_max = int(math.ceil(8 * t + 50))
    y, _, _ = surviving_values(model, interarrival, t, reps, seed, workers, name="mixture:direct")
    s = y.size
    if s < 2:
        raise InsufficientSurvivors(int(s), 2)
    direct = np.array([(y <= x).mean() for x in xs])
    se_d = np.sqrt(np.maximum(direct * (1 - direct), 1.0 / s) / s)

    jobs = block_sizes(reps)
    chain = list(
        map_blocks(
            _chain_block,
            jobs,
            workers,
            seed=seed,
            tag=tag_of("mixture:chain"),
            model=pack_model(model),
            init=pack_initial(model.initial),
            n_max=n_max,
            xs=xs,
        )
    )
    counts = list(map_blocks(_count_block, jobs, workers, seed=seed, tag=tag_of("mixture:counts"), wait=pack_wait(interarrival), t=float(t), n_max=n_max))
    alive = sum(c[0] for c in chain)
    below = sum(c[1] for c in chain)
    hist = sum(counts)
    if hist[-1] > 0:
        raise DomainError(f"N(t) exceeded n_max={n_max}; raise n_max")
    mix = _mixture(alive, below, hist)
    nb = len(jobs)
    if nb >= 2:
        per = np.array([_mixture(a, bl, h) for (a, bl), h in zip(chain, counts)])
        se_m = per.std(axis=0, ddof=1) / math.sqrt(nb)
    else:
        se_m = np.zeros_like(mix)
    joint = np.sqrt(se_d**2 + se_m**2)
    diff = np.abs(direct - mix)
    i = int(np.argmax(diff))
    return MixtureCheck(xs, direct, mix, joint, float(diff[i]), float(joint[i]), float(np.max(diff / joint)))
