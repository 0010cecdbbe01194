"""Interarrival laws and the renewal counting process.

Heavy-tailed laws are parameterized so their tails are exact power laws
(Pareto) or exact Mittag-Leffler tails (fractional waiting times).  The
slowly varying part of ``P(J > x) = x^-rho L_rho / Gamma(1 - rho)`` is then
the constant ``L_rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numba import njit

from . import _jit
from .errors import ConfigError, DomainError
from .parallel import block_rng, block_sizes, map_blocks, tag_of


@dataclass(frozen=True)
class Exponential:
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigError("exponential mean must be positive")


@dataclass(frozen=True)
class Deterministic:
    d: float = 1.0

    def __post_init__(self):
        if not self.d > 0:
            raise ConfigError("deterministic waiting time must be positive")


@dataclass(frozen=True)
class ParetoTail:
    """``P(J > x) = (x_m / x)^rho`` for ``x >= x_m``."""

    rho: float
    x_m: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ConfigError(f"Pareto exponent rho = {self.rho!r} must lie in (0, 1)")
        if not self.x_m > 0:
            raise ConfigError("Pareto scale must be positive")


@dataclass(frozen=True)
class FractionalWaiting:
    """``J = scale * tau`` with ``tau`` Mittag-Leffler, ``E exp(-l tau) = 1 / (1 + l^rho)``."""

    rho: float
    scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ConfigError(f"fractional exponent rho = {self.rho!r} must lie in (0, 1)")
        if not self.scale > 0:
            raise ConfigError("fractional scale must be positive")


InterarrivalLaw = Union[Exponential, Deterministic, ParetoTail, FractionalWaiting]


def mu_finite(law):
    return isinstance(law, (Exponential, Deterministic))


def mean_of(law):
    if isinstance(law, Exponential):
        return law.mu
    if isinstance(law, Deterministic):
        return law.d
    return math.inf


def tail_exponent(law):
    """``rho`` for heavy-tailed laws, ``None`` when the mean is finite."""
    return None if mu_finite(law) else law.rho


def tail_constant(law):
    """``c_J`` with ``P(J > x) ~ c_J x^-rho``."""
    if isinstance(law, ParetoTail):
        return law.x_m**law.rho
    if isinstance(law, FractionalWaiting):
        return law.scale**law.rho / math.gamma(1 - law.rho)
    raise DomainError("finite-mean law has no power tail")


def L_rho(law):
    """Slowly varying constant ``L_rho = c_J * Gamma(1 - rho)``."""
    return tail_constant(law) * math.gamma(1 - law.rho)


def tail_prob(law, x):
    """Exact ``P(J > x)``."""
    x = np.asarray(x, dtype=float)
    if isinstance(law, Exponential):
        return np.exp(-x / law.mu)
    if isinstance(law, Deterministic):
        return (x < law.d).astype(float)
    if isinstance(law, ParetoTail):
        return np.where(x < law.x_m, 1.0, (law.x_m / np.maximum(x, law.x_m)) ** law.rho)
    from .speciallaws import ml_cdf

    return 1.0 - ml_cdf(law.rho, x / law.scale)


def pack_wait(law):
    if isinstance(law, Exponential):
        return (_jit.EXPO, float(law.mu), 0.0)
    if isinstance(law, Deterministic):
        return (_jit.DET, float(law.d), 0.0)
    if isinstance(law, ParetoTail):
        return (_jit.PARETO, float(law.rho), float(law.x_m))
    return (_jit.MLW, float(law.rho), float(law.scale))


def sample_J(law, rng, size=None):
    """Draw interarrival times."""
    if isinstance(law, Exponential):
        return rng.exponential(law.mu, size)
    if isinstance(law, Deterministic):
        return law.d if size is None else np.full(size, law.d)
    if isinstance(law, ParetoTail):
        u = 1.0 - rng.random(size)  # in (0, 1]
        return law.x_m * u ** (-1.0 / law.rho)
    from .speciallaws import sample_ml

    return law.scale * sample_ml(law.rho, rng, size)


@dataclass
class RenewalCursor:
    """Streaming renewal epochs ``S_1 < S_2 < ...``."""

    law: InterarrivalLaw
    rng: np.random.Generator
    n: int = 0
    s_n: float = 0.0

    def __post_init__(self):
        self.next_epoch = self.s_n + float(sample_J(self.law, self.rng))

    def advance_to(self, t):
        """Move past all epochs ``<= t``; returns ``N(t)``."""
        while self.next_epoch <= t:
            self.n += 1
            self.s_n = self.next_epoch
            self.next_epoch = self.s_n + float(sample_J(self.law, self.rng))
        return self.n


@njit(cache=True)
def _count(rng, wait, t):
    n = 0
    s = 0.0
    while True:
        j = _jit.draw_wait(rng, wait)
        if s + j > t:
            return n, t - s
        s += j
        n += 1


@njit(cache=True)
def _counts(rng, wait, t, n_paths):
    out = np.empty(n_paths, np.int64)
    for i in range(n_paths):
        out[i], _ = _count(rng, wait, t)
    return out


def count_renewals(law, t, rng):
    """Return ``(N(t), t - S_N(t))`` for one path."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    n, spent = _count(rng, pack_wait(law), float(t))
    return int(n), float(spent)


def _counts_block(index, size, seed, tag, wait, t):
    return _counts(block_rng(seed, tag, index), wait, t, size)


def renewal_counts(law, t, reps, seed=0, workers=None, name="renewal_counts"):
    """``reps`` independent copies of ``N(t)``."""
    parts = map_blocks(_counts_block, block_sizes(reps), workers, seed=seed, tag=tag_of(name), wait=pack_wait(law), t=float(t))
    return np.concatenate(list(parts))


@dataclass(frozen=True)
class RatioDiagnostic:
    t: np.ndarray
    eps: float
    outside: np.ndarray  # fraction with |N(t) mu / t - 1| > eps
    quantiles: np.ndarray  # 1%, 50%, 99% of N(t) mu / t


def ratio_limit_check(law, t_grid, reps, eps=0.05, seed=0, workers=None):
    """Concentration of ``N(t) / (t / mu)`` around one for finite-mean laws."""
    if not mu_finite(law):
        raise DomainError("ratio check needs a finite mean interarrival law")
    mu = mean_of(law)
    out, q = [], []
    for t in t_grid:
        r = renewal_counts(law, t, reps, seed=seed, workers=workers, name=f"ratio:{t!r}") * mu / t
        out.append(np.mean(np.abs(r - 1.0) > eps))
        q.append(np.quantile(r, [0.01, 0.5, 0.99]))
    return RatioDiagnostic(np.asarray(t_grid, float), eps, np.asarray(out), np.asarray(q))


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def parse_interarrival(node):
    kind, body = node.variant({"exponential", "deterministic", "pareto", "fractional"})
    try:
        if kind == "exponential":
            return Exponential(body.number("mean", 1.0))
        if kind == "deterministic":
            return Deterministic(body.number("d", 1.0))
        if kind == "pareto":
            return ParetoTail(body.number("rho"), body.number("x_m", 1.0))
        return FractionalWaiting(body.number("rho"), body.number("scale", 1.0))
    except ConfigError as exc:
        if exc.line is not None:
            raise
        raise ConfigError(str(exc), field=body.path, line=body.line) from None


def wait_to_dict(law):
    if isinstance(law, Exponential):
        return {"exponential": {"mean": law.mu}}
    if isinstance(law, Deterministic):
        return {"deterministic": {"d": law.d}}
    if isinstance(law, ParetoTail):
        return {"pareto": {"rho": law.rho, "x_m": law.x_m}}
    return {"fractional": {"rho": law.rho, "scale": law.scale}}
