"""Compiled primitives shared by the simulators.

Laws reach the compiled code as small tuples of scalars and arrays built by
``pack_*`` helpers in the Python modules:

* discrete law: ``(kind, value, pmf)`` with kind 0 constant, 1 pmf, 2 Poisson
* offspring: ``(kind, param, pmf)`` with kind 0 pmf, 1 geometric, 2 Poisson
* model: ``(offspring, p, p + q, fam, ind, imm)``
* initial: ``(kind, value, pmf, gamma, c)`` with kind 3 heavy tail
* waiting time: ``(kind, a, b)`` with kind 0 exponential(mean a),
  1 deterministic(a), 2 Pareto(rho a, scale b), 3 Mittag-Leffler(rho a, scale b)
"""

import math

import numpy as np
from numba import njit

CONST, PMF, POIS = 0, 1, 2
OFF_PMF, OFF_GEOM, OFF_POIS = 0, 1, 2
HEAVY = 3
EXPO, DET, PARETO, MLW = 0, 1, 2, 3
Z_CLAMP = 9007199254740992.0


@njit(cache=True)
def draw_pmf(rng, pmf):
    u = rng.random()
    acc = 0.0
    n = pmf.size
    for k in range(n - 1):
        acc += pmf[k]
        if u < acc:
            return k
    return n - 1


@njit(cache=True)
def draw_discrete(rng, law):
    kind, val, pmf = law
    if kind == CONST:
        return np.int64(val)
    if kind == POIS:
        return np.int64(rng.poisson(val))
    return np.int64(draw_pmf(rng, pmf))


@njit(cache=True)
def offspring_sum(rng, off, m):
    """Total offspring of ``m`` independent parents, drawn in O(1) or O(K)."""
    if m <= 0:
        return np.int64(0)
    kind, param, pmf = off
    if kind == OFF_POIS:
        return np.int64(rng.poisson(float(m)))
    if kind == OFF_GEOM:
        return np.int64(rng.negative_binomial(m, param))
    # multinomial cell counts by sequential binomials
    rem = m
    tail = 1.0
    s = np.int64(0)
    last = pmf.size - 1
    for k in range(pmf.size):
        if rem == 0:
            break
        pk = pmf[k]
        if k == last or pk >= tail:
            nk = rem
        elif pk <= 0.0:
            nk = 0
        else:
            nk = rng.binomial(rem, pk / tail)
        s += k * nk
        rem -= nk
        tail -= pk
    return s


@njit(cache=True)
def step(rng, z, model):
    """One generation of the chain; zero is absorbing and consumes no draws."""
    if z <= 0:
        return np.int64(0)
    off, p, pq, fam, ind, imm = model
    u = rng.random()
    if u < p:
        k = draw_discrete(rng, fam)
        e = draw_discrete(rng, ind)
        if k >= z:
            return np.int64(0)
        s = offspring_sum(rng, off, z - k) - e
    elif u < pq:
        s = offspring_sum(rng, off, z)
    else:
        s = offspring_sum(rng, off, z) + draw_discrete(rng, imm)
    return s if s > 0 else np.int64(0)


@njit(cache=True)
def draw_initial(rng, init):
    kind, val, pmf, gamma, c = init
    if kind == CONST:
        return np.int64(val)
    if kind == POIS:
        return np.int64(rng.poisson(val))
    if kind == PMF:
        return np.int64(draw_pmf(rng, pmf))
    u = rng.random()
    if u == 0.0:
        return np.int64(Z_CLAMP)
    y = math.ceil((c / u) ** (1.0 / gamma) - 1.0)
    if y < 0.0:
        y = 0.0
    if y > Z_CLAMP:
        y = Z_CLAMP
    return np.int64(y)


@njit(cache=True)
def stable(rng, rho):
    """Kanter's representation of the one-sided stable law ``E exp(-lS) = exp(-l^rho)``."""
    if rho >= 1.0:
        return 1.0
    u = math.pi * rng.random()
    while u == 0.0:
        u = math.pi * rng.random()
    e = rng.standard_exponential()
    a = math.sin(rho * u) / math.sin(u) ** (1.0 / rho)
    b = (math.sin((1.0 - rho) * u) / e) ** ((1.0 - rho) / rho)
    return a * b


@njit(cache=True)
def mittag_leffler(rng, rho):
    """Draw with Laplace transform ``1 / (1 + l^rho)``."""
    if rho >= 1.0:
        return rng.standard_exponential()
    return rng.standard_exponential() ** (1.0 / rho) * stable(rng, rho)


@njit(cache=True)
def draw_wait(rng, law):
    kind, a, b = law
    if kind == EXPO:
        return a * rng.standard_exponential()
    if kind == DET:
        return a
    if kind == PARETO:
        return b * (1.0 - rng.random()) ** (-1.0 / a)
    return b * mittag_leffler(rng, a)
