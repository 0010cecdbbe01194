"""Alternating regenerative branching: down periods at zero, up periods of
fresh subordinated populations running until extinction.

An up period is simulated event by event from one stream, so its length is
the extinction epoch of the very population that is evaluated.  When the
horizon falls inside an up period the live state is returned and the rest
of the period is never drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numba import njit

from . import _jit
from .analysis import predict
from .branching import _rounds, expected_T, pack_initial, pack_model
from .errors import ConfigError, CycleOverflow, DomainError, InsufficientSurvivors, UnsupportedRegime
from .model import HeavyTail, initial_mean_finite
from .parallel import block_rng, tag_of
from .renewal import Deterministic, Exponential, L_rho, mean_of, mu_finite, pack_wait, tail_constant
from .subordinated import wilson_interval

DEFAULT_MAX_CYCLES = 10**6


# --------------------------------------------------------------------------
# sojourn laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteMeanSojourn:
    """Down period with finite mean, drawn from an exponential or fixed law."""

    law: Union[Exponential, Deterministic]

    def __post_init__(self):
        if not isinstance(self.law, (Exponential, Deterministic)):
            raise ConfigError("finite-mean sojourn needs an exponential or deterministic law")


@dataclass(frozen=True)
class ParetoSojourn:
    """``P(tau_d > x) = (x_m / x)^alpha`` for ``x >= x_m``, ``1/2 < alpha < 1``."""

    alpha: float
    x_m: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.alpha < 1:
            raise ConfigError(f"sojourn exponent alpha = {self.alpha!r} must lie in (1/2, 1)")
        if not self.x_m > 0:
            raise ConfigError("sojourn scale must be positive")


SojournLaw = Union[FiniteMeanSojourn, ParetoSojourn]


def sojourn_exponent(s):
    """Tail exponent ``alpha``; infinite for finite-mean sojourns."""
    return s.alpha if isinstance(s, ParetoSojourn) else math.inf


def sojourn_constant(s):
    """``c_d`` with ``P(tau_d > x) = c_d x^-alpha``."""
    if isinstance(s, ParetoSojourn):
        return s.x_m**s.alpha
    raise DomainError("finite-mean sojourn has no power tail")


def pack_sojourn(s):
    if isinstance(s, ParetoSojourn):
        return (_jit.PARETO, float(s.alpha), float(s.x_m))
    return pack_wait(s.law)


@dataclass(frozen=True)
class ARBConfig:
    model: object
    interarrival: object
    sojourn: SojournLaw


# --------------------------------------------------------------------------
# up-period tails and the tail ratio
# --------------------------------------------------------------------------


def heavy_start_constant(model, printed=False):
    """``K`` in ``P(Z_n > 0) ~ K n^-gamma`` for a heavy-tailed start.

    ``K = c b^-gamma Gamma(1-theta-gamma) / Gamma(1-theta)``.  With
    ``printed=True`` the printed constant ``c b^-gamma / ((1-theta-gamma)
    B(1-theta, 1-gamma))`` is returned instead; it is smaller by
    ``Gamma(1-gamma)``.
    """
    init = model.initial
    if not isinstance(init, HeavyTail):
        raise DomainError("constant defined for heavy-tailed starts only")
    g, th, b, c = init.gamma, model.theta, model.b, init.c
    if printed:
        return c * b**-g / ((1 - th - g) * math.exp(math.lgamma(1 - th) + math.lgamma(1 - g) - math.lgamma(2 - th - g)))
    return c * b**-g * math.exp(math.lgamma(1 - th - g) - math.lgamma(1 - th))


_ET_CACHE = {}


def extinction_mean(model, reps=10**6, seed=0, workers=None):
    """Monte Carlo ``E[T]`` (cached per model)."""
    key = (model, reps, seed)
    if key not in _ET_CACHE:
        _ET_CACHE[key] = expected_T(model, reps=reps, seed=seed, workers=workers)
    return _ET_CACHE[key]


@dataclass(frozen=True)
class UpTail:
    """``P(tau_u > t) ~ constant t^-exponent``."""

    exponent: float
    constant: float | None
    source: str


def up_tail(model, interarrival, estimate_T=True, printed_constants=False, reps=10**6, seed=0, workers=None):
    """Tail of the up-period length, i.e. of ``P(Y(t) > 0)``."""
    heavy = not initial_mean_finite(model.initial)
    if mu_finite(interarrival):
        mu = mean_of(interarrival)
        if heavy:
            g = model.initial.gamma
            return UpTail(g, heavy_start_constant(model, printed_constants) * mu**g, "K mu^gamma")
        return UpTail(1.0 + abs(model.theta), None, "finite start: slowly varying constant not available")
    rho = interarrival.rho
    if heavy:
        g = model.initial.gamma
        if printed_constants:
            c = model.initial.c
            const = (1 - rho) ** g * math.gamma(1 - rho) ** (1 + g) / math.gamma(1 - rho * g) * L_rho(interarrival) * c
            return UpTail(rho * g, const, "printed L_{rho,gamma}")
        K = heavy_start_constant(model)
        const = K * L_rho(interarrival) ** g * math.gamma(1 - g) / math.gamma(1 - rho * g)
        return UpTail(rho * g, const, "K L_rho^gamma Gamma(1-gamma)/Gamma(1-rho gamma)")
    if not estimate_T:
        return UpTail(rho, None, "needs E[T] by simulation")
    ET = extinction_mean(model, reps, seed, workers).mean
    if printed_constants:
        return UpTail(rho, (ET - 1.0) * L_rho(interarrival), "E[T-1] L_rho")
    return UpTail(rho, ET * tail_constant(interarrival), "E[T] c_J")


def theoretical_delta(model, interarrival, sojourn, estimate_T=True, printed_constants=False, reps=10**6, seed=0, workers=None):
    """Limit of ``P(tau_d > t) / P(tau_u > t)``.

    Raises
    ------
    UnsupportedRegime
        Exponents are equal and a constant would need ``E[T]`` while
        ``estimate_T`` is off.
    """
    alpha = sojourn_exponent(sojourn)
    up = up_tail(model, interarrival, estimate_T=False, printed_constants=printed_constants)
    if not math.isclose(alpha, up.exponent, rel_tol=0, abs_tol=1e-12):
        return 0.0 if alpha > up.exponent else math.inf
    if up.constant is None:
        if not estimate_T:
            raise UnsupportedRegime("equal exponents: the tail ratio needs E[T], and estimation is disabled")
        up = up_tail(model, interarrival, True, printed_constants, reps, seed, workers)
    if up.constant is None:
        raise UnsupportedRegime("equal exponents but the up-period tail constant is unknown")
    return sojourn_constant(sojourn) / up.constant


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------


@njit(cache=True)
def _U_at(rng, model, init, wait, soj, t, max_cycles):
    """``(u, in_down, cycle, sigma)``; ``cycle = -1`` on overflow."""
    s = 0.0
    for k in range(max_cycles):
        up = s + _jit.draw_wait(rng, soj)
        if up > t:
            return np.int64(0), True, k, up - t
        z = _jit.draw_initial(rng, init)
        e = up
        while z > 0:
            j = _jit.draw_wait(rng, wait)
            if e + j > t:
                return z, False, k, t - up
            e += j
            z = _jit.step(rng, z, model)
        s = e  # extinction epoch closes the up period
    return np.int64(0), False, -1, 0.0


@njit(cache=True)
def _U_paths(rng, model, init, wait, soj, t, max_cycles, n_paths):
    u = np.empty(n_paths, np.int64)
    down = np.empty(n_paths, np.bool_)
    over = 0
    for i in range(n_paths):
        v, d, k, _ = _U_at(rng, model, init, wait, soj, t, max_cycles)
        if k < 0:
            over += 1
        u[i] = v
        down[i] = d
    return u, down, over


@njit(cache=True)
def _cycles(rng, model, init, wait, soj, n_cycles, t_cap):
    """Down lengths, up lengths and extinction times of whole cycles."""
    d = np.empty(n_cycles)
    up = np.empty(n_cycles)
    T = np.empty(n_cycles, np.int64)
    for k in range(n_cycles):
        d[k] = _jit.draw_wait(rng, soj)
        z = _jit.draw_initial(rng, init)
        e = 0.0
        n = 0
        while z > 0 and e <= t_cap:
            e += _jit.draw_wait(rng, wait)
            z = _jit.step(rng, z, model)
            n += 1
        up[k] = e
        T[k] = n if z == 0 else -1
    return d, up, T


@dataclass(frozen=True)
class UState:
    u: int
    in_down: bool
    cycle_index: int
    elapsed: float  # time since the current up period began (or until the next, if down)


def _packed(config):
    m = config.model
    return pack_model(m), pack_initial(m.initial), pack_wait(config.interarrival), pack_sojourn(config.sojourn)


def simulate_U_at(config, t, rng, max_cycles=DEFAULT_MAX_CYCLES):
    """Value of the alternating process at time ``t``.

    Raises
    ------
    CycleOverflow
        More than ``max_cycles`` cycles end before ``t``.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    u, down, k, el = _U_at(rng, *_packed(config), float(t), int(max_cycles))
    if k < 0:
        raise CycleOverflow(f"more than {max_cycles} cycles before t={t}")
    return UState(int(u), bool(down), int(k), float(el))


def simulate_cycles(config, n_cycles, rng, t_cap=math.inf):
    """Whole cycles: down lengths, up lengths and generations to extinction.

    Up periods longer than ``t_cap`` are cut and their ``T`` is ``-1``.
    """
    return _cycles(rng, *_packed(config), int(n_cycles), float(t_cap))


def _U_block(index, size, seed, tag, model, init, wait, soj, t, max_cycles):
    u, down, over = _U_paths(block_rng(seed, tag, index), model, init, wait, soj, t, max_cycles, size)
    if over:
        raise CycleOverflow(f"{over} paths exceeded {max_cycles} cycles before t={t}")
    return u


@dataclass(frozen=True)
class ARBResult:
    """Atom at zero and the normalized positive part at one horizon."""

    t: float
    zeros: int
    reps: int
    atom: float
    ci: tuple
    values: np.ndarray
    scale: float
    prediction: object

    @property
    def survivors(self):
        return int(self.values.size)


def _positives(u):
    return int(np.count_nonzero(u))


def atom_and_conditional(
    config,
    t,
    reps,
    seed=0,
    workers=None,
    prediction=None,
    scale=None,
    min_survivors=1,
    target_survivors=None,
    max_reps=None,
    max_cycles=DEFAULT_MAX_CYCLES,
    name="arb",
):
    """Estimate ``P(U(t) = 0)`` and sample ``U(t) / A(t)`` given ``U(t) > 0``."""
    if prediction is None and scale is None:
        prediction = predict(config.model, config.interarrival, config.sojourn)
    if scale is None:
        scale = float(prediction.normalization(t))
    kw = dict(seed=seed, tag=tag_of(name), **dict(zip(("model", "init", "wait", "soj"), _packed(config))), t=float(t), max_cycles=int(max_cycles))
    parts, done = _rounds(_U_block, kw, reps, target_survivors, max_reps, workers, count=_positives)
    u = np.concatenate(parts)
    pos = u[u > 0]
    if pos.size < min_survivors:
        raise InsufficientSurvivors(int(pos.size), min_survivors)
    zeros = int(u.size - pos.size)
    return ARBResult(float(t), zeros, int(u.size), zeros / u.size, wilson_interval(zeros, u.size), pos / scale, float(scale), prediction)


def normalization_of(config):
    """``A(t)`` used for the alternating process."""
    p = predict(config.model, config.interarrival, config.sojourn, delta=0.0, strict_windows=False)
    return p.normalization


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def parse_sojourn(node):
    kind, body = node.variant({"pareto", "exponential", "deterministic"})
    try:
        if kind == "pareto":
            return ParetoSojourn(body.number("alpha"), body.number("x_m", 1.0))
        if kind == "exponential":
            return FiniteMeanSojourn(Exponential(body.number("mean", 1.0)))
        return FiniteMeanSojourn(Deterministic(body.number("d", 1.0)))
    except ConfigError as exc:
        if exc.line is not None:
            raise
        raise ConfigError(str(exc), field=body.path, line=body.line) from None


def sojourn_to_dict(s):
    if isinstance(s, ParetoSojourn):
        return {"pareto": {"alpha": s.alpha, "x_m": s.x_m}}
    if isinstance(s.law, Exponential):
        return {"exponential": {"mean": s.law.mu}}
    return {"deterministic": {"d": s.law.d}}

