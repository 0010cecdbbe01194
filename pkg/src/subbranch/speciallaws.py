"""Special functions and limit laws.

Numerical routes used here:

* incomplete Beta by its continued fraction (modified Lentz), valid for
  complex arguments so that the eta transform can be continued off the
  real axis;
* eta CDF by Euler-summation Laplace inversion of ``phi(s) / s``, with the
  error estimated from two summation orders;
* Mittag-Leffler functions on the negative axis by the power series in
  double precision near zero, an mpmath series with guard digits in the
  middle range, and the optimally truncated algebraic expansion far out;
* power-biased Mittag-Leffler laws by panel quadrature of the weighted
  density with the singular head integrated term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator
from scipy.optimize import isotonic_regression

from .errors import DivergentWeight, DomainError, InversionFailure

# --------------------------------------------------------------------------
# incomplete Beta
# --------------------------------------------------------------------------


def _betacf(x, a, b, maxit=500, eps=4e-16):
    """Continued fraction of ``B_x(a, b)`` (modified Lentz), elementwise.

    Elements leave the iteration as soon as their own update is below ``eps``.
    """
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    x = np.asarray(x)
    d = 1.0 - qab * x / qap
    d = 1.0 / np.where(np.abs(d) < tiny, tiny, d)
    h = d.copy()
    c = np.ones_like(h)
    idx = np.arange(h.size)
    xf, hf, cf, df = x.ravel(), h.ravel(), c.ravel(), d.ravel()
    xa, ha, ca, da = xf, hf.copy(), cf, df
    for m in range(1, maxit + 1):
        m2 = 2 * m
        for aa in (m * (b - m) * xa / ((qam + m2) * (a + m2)), -(a + m) * (qab + m) * xa / ((a + m2) * (qap + m2))):
            da = 1.0 + aa * da
            da = 1.0 / np.where(np.abs(da) < tiny, tiny, da)
            ca = 1.0 + aa / ca
            ca = np.where(np.abs(ca) < tiny, tiny, ca)
            delta = da * ca
            ha = ha * delta
        live = ~(np.abs(delta - 1.0) < eps)
        hf[idx] = ha
        if not live.any():
            break
        idx, xa, ha, ca, da = idx[live], xa[live], ha[live], ca[live], da[live]
    return hf.reshape(h.shape)


def _lower_beta(x, a, b):
    """``B_x(a, b)`` for real ``x`` in [0, 1] or complex ``x`` with ``Re x, Re(1-x) > 0``."""
    x = np.asarray(x)
    cplx = np.iscomplexobj(x)
    x = x.astype(complex if cplx else float)
    full = math.exp(special.betaln(a, b))
    out = np.empty_like(x)
    flip = np.real(x) > (a + 1.0) / (a + b + 2.0)
    for sel, (xx, aa, bb) in ((~flip, (x, a, b)), (flip, (1.0 - x, b, a))):
        if not np.any(sel):
            continue
        xs = xx[sel]
        with np.errstate(divide="ignore", invalid="ignore"):
            front = np.exp(aa * np.log(xs) + bb * np.log1p(-xs)) / aa
        val = np.where(xs == 0, 0.0, front * _betacf(xs, aa, bb))
        out[sel] = full - val if sel is flip else val
    return out


def inc_beta(x, a, b):
    """Lower incomplete Beta ``B_x(a, b) = int_0^x u^(a-1) (1-u)^(b-1) du``.

    Not regularized.  Vectorized over ``x``.
    """
    if not (a > 0 and b > 0):
        raise DomainError(f"inc_beta needs a, b > 0, got a={a!r}, b={b!r}")
    xa = np.asarray(x, dtype=float)
    if np.any(~((xa >= 0) & (xa <= 1))):
        raise DomainError("inc_beta needs 0 <= x <= 1")
    out = _lower_beta(xa, float(a), float(b)).real
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# eta: Laplace transform and distribution function
# --------------------------------------------------------------------------


def _check_eta(theta, gamma):
    if not theta < 0:
        raise DomainError(f"eta needs theta < 0, got {theta!r}")
    if not 0 < gamma < 1:
        raise DomainError(f"eta needs 0 < gamma < 1, got {gamma!r}")


def _phi(theta, gamma, s):
    """``1 + theta s^g (1+s)^(-theta-g) B_{1/(1+s)}(-theta, 1-g)`` for ``Re s >= 0``."""
    s = np.asarray(s)
    x = 1.0 / (1.0 + s)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = theta * s**gamma * (1.0 + s) ** (-theta - gamma) * _lower_beta(x, -theta, 1.0 - gamma)
    return np.where(s == 0, 1.0, 1.0 + corr)


def eta_laplace(theta, gamma, lam):
    """Laplace transform ``E exp(-lam eta)`` of the heavy-start Yaglom limit."""
    _check_eta(theta, gamma)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("lambda must be nonnegative")
    out = _phi(theta, gamma, lam).real
    return float(out) if out.ndim == 0 else out


def eta_tail_constant(theta, gamma):
    """``C`` in ``P(eta > x) ~ C x^-gamma``."""
    return -theta * math.exp(special.betaln(-theta, 1.0 - gamma)) / math.gamma(1.0 - gamma)


@lru_cache(maxsize=None)
def _euler_weights(M):
    k = np.arange(2 * M + 1)
    beta = M * math.log(10.0) / 3.0 + 1j * math.pi * k
    xi = np.ones(2 * M + 1)
    xi[0] = 0.5
    xi[2 * M] = 2.0**-M
    for j in range(1, M):
        xi[2 * M - j] = xi[2 * M - j + 1] + 2.0**-M * math.comb(M, j)
    eta = (-1.0) ** k * xi
    return beta, eta


def euler_invert(transform, t, M=18):
    """Invert a Laplace transform at points ``t > 0`` by Euler summation.

    ``transform`` maps a complex array to transform values.
    """
    t = np.asarray(t, dtype=float)
    beta, eta = _euler_weights(M)
    s = beta[None, :] / t[:, None]
    vals = transform(s)
    return 10.0 ** (M / 3.0) / t * np.real(vals @ eta)


def _geomgrid(lo, hi, n):
    return np.geomspace(lo, hi, n)


def eta_cdf(theta, gamma, x_max=None, tol=1e-6, n=2048, x_min=1e-6):
    """Tabulated distribution function of eta by Laplace inversion.

    Parameters
    ----------
    theta, gamma : float
        ``theta < 0``, ``0 < gamma < 1``.
    x_max : float, optional
        Right end of the table.  Default puts about ``1e-4`` of mass beyond it.
    tol : float
        Maximum accepted pointwise error estimate, at least ``1e-6``.

    Raises
    ------
    InversionFailure
        When two summation orders disagree by more than ``tol``.
    """
    _check_eta(theta, gamma)
    if tol < 1e-6:
        raise DomainError("tol must be at least 1e-6")
    C = eta_tail_constant(theta, gamma)
    if x_max is None:
        x_max = (C / 1e-4) ** (1.0 / gamma)
    return _eta_table(float(theta), float(gamma), float(x_max), float(tol), int(n), float(x_min))


@lru_cache(maxsize=32)
def _eta_table(theta, gamma, x_max, tol, n, x_min):
    x = _geomgrid(x_min, x_max, n)

    def F(s):
        return _phi(theta, gamma, s) / s

    hi = euler_invert(F, x, M=18)
    lo = euler_invert(F, x, M=14)
    err = float(np.max(np.abs(hi - lo)))
    if not err <= tol:
        raise InversionFailure(f"Laplace inversion error estimate {err:.3g} exceeds {tol:.3g}")
    return TabulatedCDF(x, hi, error_budget=max(err, 1e-12), tail_index=gamma, name=f"Eta({theta:g},{gamma:g})")


# --------------------------------------------------------------------------
# Mittag-Leffler functions on the negative axis
# --------------------------------------------------------------------------

_SERIES_Z = 3.0  # float series while y^(1/rho) <= this
_ASYM_Z = 45.0  # algebraic expansion once y^(1/rho) >= this; error ~ exp(-y^(1/rho))


def _ml_series_float(rho, beta, y, skip0=False):
    y = np.asarray(y, dtype=float)
    k = np.arange(0, 160)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        terms = (-y[..., None]) ** k * special.rgamma(rho * k + beta)
    if skip0:
        terms = terms[..., 1:]
    return np.nansum(terms, axis=-1)


def _ml_asym(rho, beta, y, kmax=200):
    """``-sum_k (-y)^-k / Gamma(beta - rho k)`` truncated where its envelope is smallest.

    The envelope ``y^-k Gamma(1 - beta + rho k) / pi`` bounds each term; using
    it instead of the terms themselves avoids stopping at a term that is
    small only because ``beta - rho k`` sits near a pole.  Returns the sum and
    the envelope at the truncation point.
    """
    y = np.asarray(y, dtype=float)
    k = np.arange(1, kmax + 1)
    ly = np.log(y)[..., None]
    env = -k * ly + special.gammaln(1.0 - beta + rho * k) - math.log(math.pi)
    idx = np.argmin(env, axis=-1)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        arg = beta - rho * k
        sgn = np.where(special.rgamma(arg) == 0, 0.0, special.gammasgn(arg))
        terms = -((-1.0) ** k) * sgn * np.exp(-k * ly - special.gammaln(arg))
    keep = k[None, :] <= idx.reshape(-1, 1) if y.ndim else k <= idx
    total = np.where(keep.reshape(terms.shape), terms, 0.0).sum(axis=-1)
    last = np.exp(np.take_along_axis(env, idx[..., None], axis=-1)[..., 0])
    return total, last


def _ml_series_mp(rho, beta, y):
    z = y ** (1.0 / rho)
    guard = int(z / math.log(10.0)) + 20
    with mp.workdps(guard):
        r, b, yy = mp.mpf(rho), mp.mpf(beta), mp.mpf(y)
        s = mp.mpf(0)
        term_pow = mp.mpf(1)
        k = 0
        peak = int(z / rho) + 5
        while True:
            t = term_pow * mp.rgamma(r * k + b)
            s += t
            if k > peak and abs(t) < abs(s) * mp.mpf(10) ** (-18):
                break
            term_pow *= -yy
            k += 1
            if k > 100000:
                break
        return float(s)


def ml_general(rho, beta, y):
    """``E_{rho,beta}(-y)`` for ``y >= 0`` (vectorized)."""
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape)
    flat_y, flat_o = y.ravel(), out.ravel()
    if rho == 1.0 and beta == 1.0:
        return np.exp(-y)
    z = flat_y ** (1.0 / rho)
    small = z <= _SERIES_Z
    if np.any(small):
        flat_o[small] = _ml_series_float(rho, beta, flat_y[small])
    far = z >= _ASYM_Z
    if rho < 1.0 and np.any(far):
        flat_o[far] = _ml_asym(rho, beta, flat_y[far])[0]
    else:
        far[:] = False
    for i in np.nonzero(~(small | far))[0]:
        flat_o[i] = _ml_series_mp(rho, beta, float(flat_y[i]))
    return flat_o.reshape(y.shape)


def ml_func(rho, z):
    """Mittag-Leffler function ``E_rho(z)`` for ``z <= 0``."""
    if not 0 < rho <= 1:
        raise DomainError(f"rho must lie in (0, 1], got {rho!r}")
    z = np.asarray(z, dtype=float)
    if np.any(z > 0):
        raise DomainError("only nonpositive arguments are supported")
    out = np.exp(z) if rho == 1 else ml_general(rho, 1.0, -z)
    return float(out) if np.ndim(out) == 0 else out


def ml_cdf(rho, x):
    """Distribution function ``1 - E_rho(-x^rho)`` of the Mittag-Leffler law."""
    if not 0 < rho <= 1:
        raise DomainError(f"rho must lie in (0, 1], got {rho!r}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    if rho == 1:
        out = -np.expm1(-x)
    else:
        y = x**rho
        out = np.empty(y.shape)
        small = x <= _SERIES_Z
        out[small] = -_ml_series_float(rho, 1.0, y[small], skip0=True)
        out[~small] = 1.0 - ml_general(rho, 1.0, y[~small])
    return float(out) if out.ndim == 0 else out


def ml_density(rho, u):
    """Density ``u^(rho-1) E_{rho,rho}(-u^rho)`` of the Mittag-Leffler law."""
    u = np.asarray(u, dtype=float)
    if rho == 1:
        return np.exp(-u)
    with np.errstate(divide="ignore"):
        return u ** (rho - 1.0) * ml_general(rho, rho, u**rho)


def ml_spectral(rho, x):
    """``E_rho(-x^rho)`` from its spectral integral; an independent check."""
    s, c = math.sin(rho * math.pi), math.cos(rho * math.pi)

    def k(r):
        return math.exp(-r * x) * r ** (rho - 1) * s / (r ** (2 * rho) + 2 * r**rho * c + 1) / math.pi

    val = 0.0
    for a, b in ((0, 1), (1, math.inf)):
        val += integrate.quad(k, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    return val


# --------------------------------------------------------------------------
# stable and Mittag-Leffler sampling
# --------------------------------------------------------------------------


def sample_stable(rho, rng, size=None):
    """One-sided stable draws with ``E exp(-l S) = exp(-l^rho)`` (Kanter's method)."""
    if not 0 < rho < 1:
        raise DomainError(f"rho must lie in (0, 1), got {rho!r}")
    u = math.pi * rng.uniform(np.nextafter(0.0, 1.0), 1.0, size)  # open interval (0, pi)
    e = rng.standard_exponential(size)
    a = np.sin(rho * u) / np.sin(u) ** (1.0 / rho)
    return a * (np.sin((1.0 - rho) * u) / e) ** ((1.0 - rho) / rho)


def sample_ml(rho, rng, size=None):
    """Mittag-Leffler draws ``xi^(1/rho) S`` with Laplace transform ``1/(1+l^rho)``."""
    if not 0 < rho <= 1:
        raise DomainError(f"rho must lie in (0, 1], got {rho!r}")
    xi = rng.standard_exponential(size)
    if rho == 1:
        return xi
    return xi ** (1.0 / rho) * sample_stable(rho, rng, size)


@lru_cache(maxsize=16)
def ml_table(rho, n=2048):
    """Tabulated Mittag-Leffler distribution function."""
    x = _geomgrid(1e-10, 1e12, n)
    return TabulatedCDF(x, ml_cdf(rho, x), error_budget=1e-9, tail_index=rho, name=f"MittagLeffler({rho:g})")


# --------------------------------------------------------------------------
# power-biased Mittag-Leffler law
# --------------------------------------------------------------------------

_HEAD = 0.5


def _check_zeta(rho, gamma):
    if not 0 < rho <= 1:
        raise DomainError(f"rho must lie in (0, 1], got {rho!r}")
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    if gamma >= rho:
        raise DivergentWeight(f"u^-gamma is not integrable against the Mittag-Leffler law when gamma={gamma} >= rho={rho}")


def _zeta_head(rho, gamma, h):
    """``int_0^h u^-gamma f(u) du`` term by term from the density's power series."""
    h = np.asarray(h, dtype=float)
    k = np.arange(0, 120)
    if rho == 1:
        p = k + 1.0 - gamma
        with np.errstate(under="ignore"):
            terms = (-1.0) ** k * h[..., None] ** p / (p * special.gamma(k + 1.0))
    else:
        p = rho * (k + 1.0) - gamma
        with np.errstate(under="ignore"):
            terms = (-1.0) ** k * h[..., None] ** p * special.rgamma(rho * (k + 1.0)) / p
    return np.sum(terms, axis=-1)


def _zeta_integrand(rho, gamma, u):
    u = np.asarray(u, dtype=float)
    return u ** (-gamma) * ml_density(rho, u)


def _panel(rho, gamma, a, b, nodes=10):
    """Gauss-Legendre in ``log u`` over each ``[a_i, b_i]``."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    la, lb = np.log(a), np.log(b)
    half = 0.5 * (lb - la)
    v = 0.5 * (la + lb)[:, None] + half[:, None] * t[None, :]
    u = np.exp(v)
    g = _zeta_integrand(rho, gamma, u.ravel()).reshape(u.shape) * u
    return (g * w[None, :]).sum(axis=1) * half


@lru_cache(maxsize=32)
def zeta_weight(rho, gamma):
    """Total weight ``E[tau^-gamma]`` by quadrature, relative error about 1e-10."""
    _check_zeta(rho, gamma)
    head = float(_zeta_head(rho, gamma, _HEAD))
    f = lambda u: float(_zeta_integrand(rho, gamma, u))  # noqa: E731
    mid = integrate.quad(f, _HEAD, 50.0, epsabs=0, epsrel=1e-11, limit=200)[0]
    tail = integrate.quad(f, 50.0, math.inf, epsabs=0, epsrel=1e-10, limit=200)[0]
    return head + mid + tail


def zeta_weight_closed(rho, gamma):
    """``E[tau^-gamma] = Gamma(1-gamma/rho) Gamma(1+gamma/rho) / Gamma(1+gamma)``."""
    g = gamma / rho
    return math.gamma(1 - g) * math.gamma(1 + g) / math.gamma(1 + gamma)


def zeta_normalizer_discrepancy(rho, gamma):
    """Relative gap between ``1 / E[tau^-gamma]`` and ``Gamma(1-rho gamma) / Gamma(1-gamma)``."""
    inv = 1.0 / zeta_weight(rho, gamma)
    alt = math.gamma(1 - rho * gamma) / math.gamma(1 - gamma)
    return abs(inv - alt) / alt


def zeta_cdf(rho, gamma, x):
    """``P(zeta <= x)`` for ``zeta`` with law ``u^-gamma dF_tau(u) / E[tau^-gamma]``."""
    _check_zeta(rho, gamma)
    N = zeta_weight(float(rho), float(gamma))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise DomainError("x must be nonnegative")
    out = np.empty(xs.shape)
    f = lambda u: float(_zeta_integrand(rho, gamma, u))  # noqa: E731
    for i, xv in enumerate(xs):
        if not np.isfinite(xv):
            out[i] = 1.0
            continue
        if xv > 50.0:
            # complement in log u: one quad over many decades loses accuracy
            g = lambda v: f(math.exp(v)) * math.exp(v)  # noqa: E731
            lo = math.log(xv)
            tail = integrate.quad(g, lo, min(700.0, lo + 80.0 / (rho + gamma)), epsabs=0, epsrel=1e-10, limit=200)[0]
            out[i] = min(1.0, max(0.0, 1.0 - tail / N))
            continue
        head = float(_zeta_head(rho, gamma, min(xv, _HEAD)))
        body = 0.0
        if xv > _HEAD:
            body = integrate.quad(f, _HEAD, xv, epsabs=0, epsrel=1e-10, limit=200)[0]
        out[i] = min(1.0, (head + body) / N)
    return float(out[0]) if np.ndim(x) == 0 else out


@lru_cache(maxsize=16)
def zeta_table(rho, gamma, n=2048):
    """Tabulated ``zeta`` distribution function for sampling and mixing."""
    _check_zeta(rho, gamma)
    x = _geomgrid(1e-8, 1e8, n)
    N = zeta_weight(rho, gamma)
    first = float(_zeta_head(rho, gamma, x[0]))
    inc = _panel(rho, gamma, x[:-1], x[1:])
    cum = first + np.concatenate([[0.0], np.cumsum(inc)])
    return TabulatedCDF(x, cum / N, error_budget=1e-8, tail_index=rho + gamma, name=f"ZetaPower({rho:g},{gamma:g})")


def sample_zeta(rho, gamma, rng, size=None):
    """Inverse-CDF draws from the power-biased Mittag-Leffler law."""
    _check_zeta(rho, gamma)
    if rho == 1:
        return rng.gamma(1.0 - gamma, 1.0, size)
    return zeta_table(float(rho), float(gamma)).sample(rng, size)


# --------------------------------------------------------------------------
# power-biased renewal limit  W = S^-rho
# --------------------------------------------------------------------------
#
# N(t) L_rho / t^rho converges to W = S^-rho with S one-sided stable, the
# law with Laplace transform E_rho(-l).  Biasing W by w^-gamma gives the law
# below; by Kanter's representation S = B(U) E^-(1-rho)/rho its CDF reduces
# to a one-dimensional integral over U of incomplete gamma functions.


def _kanter_A(rho, u):
    return (np.sin(rho * u) / np.sin(u)) ** (1.0 / (1.0 - rho)) * np.sin((1.0 - rho) * u) / np.sin(rho * u)


@lru_cache(maxsize=8)
def _jacobi(n, gamma):
    # weight (1 - t)^-gamma on [-1, 1]; A(u)^g behaves like (pi - u)^-gamma
    return special.roots_jacobi(n, -gamma, 0.0)


def renewal_zeta_cdf(rho, gamma, x, nodes=200):
    """``P(zeta_W <= x)`` with ``zeta_W`` the law of ``W`` biased by ``w^-gamma``.

    ``gamma = 0`` gives the law of ``W`` itself.
    """
    if not 0 < rho < 1:
        raise DomainError(f"rho must lie in (0, 1), got {rho!r}")
    if not 0 <= gamma < 1:
        raise DomainError(f"gamma must lie in [0, 1), got {gamma!r}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    g = gamma * (1.0 - rho)
    t, w = _jacobi(nodes, gamma)
    u = 0.5 * math.pi * (t + 1.0)
    A = _kanter_A(rho, u)
    # (pi - u)^gamma = (pi/2)^gamma (1 - t)^gamma restores the stripped weight
    base = A**g * (0.5 * math.pi * (1.0 - t)) ** gamma * w * (0.5 * math.pi) ** (1.0 - gamma) / math.pi
    arg = A[None, :] * np.maximum(xs, 0.0)[:, None] ** (1.0 / (1.0 - rho))
    val = (base[None, :] * special.gammainc(1.0 - g, arg)).sum(axis=1) * math.gamma(1.0 - g)
    N = math.gamma(1.0 - gamma) / math.gamma(1.0 - rho * gamma)
    out = np.clip(val / N, 0.0, 1.0)
    return float(out[0]) if np.ndim(x) == 0 else out


@lru_cache(maxsize=16)
def renewal_zeta_table(rho, gamma, n=2048):
    x = _geomgrid(1e-8, 1e6, n)
    return TabulatedCDF(
        x, renewal_zeta_cdf(rho, gamma, x), error_budget=1e-8, tail_index=None, name=f"RenewalZeta({rho:g},{gamma:g})"
    )


def sample_renewal_zeta(rho, gamma, rng, size=None):
    return renewal_zeta_table(float(rho), float(gamma)).sample(rng, size)


# --------------------------------------------------------------------------
# tabulated distribution functions
# --------------------------------------------------------------------------


class TabulatedCDF:
    """Monotone tabulation of a distribution function on a positive grid.

    Values are projected onto the nondecreasing sequences in ``[0, 1]``
    (isotonic regression) and interpolated by a monotone cubic in
    ``log x``.  Below the first knot the CDF follows the power law through
    the first two knots; above the last knot it follows ``1 - c x^-k`` when
    a tail index ``k`` is given, and stays flat otherwise.

    Parameters
    ----------
    grid : array_like
        Strictly increasing positive abscissae.
    values : array_like
        CDF values at the grid.
    error_budget : float
        Bound on the pointwise error of ``values``.
    tail_index : float, optional
        Exponent of the upper power tail used for extrapolation.
    name : str
        Identifier of the law, used in reports.
    """

    def __init__(self, grid, values, error_budget=0.0, tail_index=None, name=""):
        x = np.asarray(grid, dtype=float)
        v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0) or x[0] <= 0:
            raise DomainError("grid must be strictly increasing and positive")
        v = isotonic_regression(v).x
        v = np.clip(np.maximum.accumulate(v), 0.0, 1.0)
        self.grid = x
        self.values = v
        self.error_budget = float(error_budget)
        self.tail_index = tail_index
        self.name = name
        self._logx = np.log(x)
        self._interp = PchipInterpolator(self._logx, v, extrapolate=False)
        if v[0] > 0 and v[1] > v[0]:
            self._head = math.log(v[1] / v[0]) / (self._logx[1] - self._logx[0])
        else:
            self._head = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(x)
        lo = x < self.grid[0]
        hi = x > self.grid[-1]
        mid = ~(lo | hi)
        out[mid] = self._interp(lx[mid])
        if np.any(lo):
            if self._head is None:
                out[lo] = np.where(x[lo] > 0, self.values[0], 0.0)
            else:
                out[lo] = self.values[0] * np.exp(self._head * (lx[lo] - self._logx[0]))
        if np.any(hi):
            if self.tail_index:
                sv = 1.0 - self.values[-1]
                out[hi] = 1.0 - sv * np.exp(-self.tail_index * (lx[hi] - self._logx[-1]))
            else:
                out[hi] = self.values[-1]
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    cdf = __call__

    def quantile(self, p):
        """Inverse by log-linear interpolation with power-law ends."""
        p = np.asarray(p, dtype=float)
        v = self.values
        keep = np.concatenate([[True], np.diff(v) > 0])
        vv, lx = v[keep], self._logx[keep]
        out = np.interp(p, vv, lx)
        lo = p < vv[0]
        if np.any(lo) and self._head:
            out[lo] = lx[0] + np.log(np.maximum(p[lo], 1e-300) / vv[0]) / self._head
        hi = p > vv[-1]
        if np.any(hi) and self.tail_index:
            sv = 1.0 - vv[-1]
            out[hi] = lx[-1] - np.log(np.maximum(1.0 - p[hi], 1e-300) / sv) / self.tail_index
        with np.errstate(over="ignore"):
            return np.exp(out)

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size))

    def density(self, x=None):
        """Density estimate from the interpolant's derivative."""
        x = self.grid if x is None else np.asarray(x, dtype=float)
        d = self._interp.derivative()(np.log(x))
        return np.nan_to_num(d / x)


# --------------------------------------------------------------------------
# limit laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Exp1:
    pass


@dataclass(frozen=True)
class Eta:
    theta: float
    gamma: float

    def __post_init__(self):
        _check_eta(self.theta, self.gamma)


@dataclass(frozen=True)
class MittagLeffler:
    rho: float

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise DomainError("MittagLeffler needs 0 < rho <= 1")


@dataclass(frozen=True)
class ZetaPower:
    """Mittag-Leffler law ``1/(1+l^rho)`` reweighted by ``u^-gamma``."""

    rho: float
    gamma: float

    def __post_init__(self):
        if not (0 < self.rho < 1 and 0 < self.gamma < 1):
            raise DomainError("ZetaPower needs rho, gamma in (0, 1)")


@dataclass(frozen=True)
class RenewalZeta:
    """Renewal-count limit ``W = S^-rho`` reweighted by ``w^-gamma``."""

    rho: float
    gamma: float

    def __post_init__(self):
        if not (0 < self.rho < 1 and 0 <= self.gamma < 1):
            raise DomainError("RenewalZeta needs rho in (0, 1), gamma in [0, 1)")


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("Beta needs a, b > 0")


@dataclass(frozen=True)
class Product:
    """Product of independent factors raised to the given exponents."""

    factors: tuple

    def __post_init__(self):
        fs = tuple((f, float(e)) for f, e in self.factors)
        if not fs:
            raise DomainError("empty product")
        object.__setattr__(self, "factors", fs)


def law_id(law):
    if isinstance(law, Exp1):
        return "Exp1"
    if isinstance(law, Product):
        return "Product[" + "*".join(f"{law_id(f)}^{e:g}" for f, e in law.factors) + "]"
    fields = ",".join(f"{v:g}" for v in law.__dict__.values())
    return f"{type(law).__name__}({fields})"


def sample_limit(law, rng, size=None):
    """Draws from a limit law; products multiply independent factor draws."""
    if isinstance(law, Exp1):
        return rng.standard_exponential(size)
    if isinstance(law, Eta):
        return eta_cdf(law.theta, law.gamma).sample(rng, size)
    if isinstance(law, MittagLeffler):
        return sample_ml(law.rho, rng, size)
    if isinstance(law, ZetaPower):
        return sample_zeta(law.rho, law.gamma, rng, size)
    if isinstance(law, RenewalZeta):
        return sample_renewal_zeta(law.rho, law.gamma, rng, size)
    if isinstance(law, Beta):
        return rng.beta(law.a, law.b, size)
    out = 1.0 if size is None else np.ones(size)
    for f, e in law.factors:
        out = out * sample_limit(f, rng, size) ** e
    return out


def _factor_cdf(law):
    """Vectorized CDF callable of a single (non-product) law."""
    if isinstance(law, Exp1):
        return lambda x: -np.expm1(-np.maximum(x, 0.0))
    if isinstance(law, Beta):
        return lambda x: special.betainc(law.a, law.b, np.clip(x, 0.0, 1.0))
    if isinstance(law, Eta):
        return eta_cdf(law.theta, law.gamma)
    if isinstance(law, MittagLeffler):
        if law.rho == 1:
            return _factor_cdf(Exp1())
        return ml_table(law.rho)
    if isinstance(law, ZetaPower):
        return zeta_table(law.rho, law.gamma)
    if isinstance(law, RenewalZeta):
        return renewal_zeta_table(law.rho, law.gamma)
    raise TypeError(law)


def _factor_quantile(law):
    if isinstance(law, Exp1):
        return lambda p: -np.log1p(-p)
    if isinstance(law, Beta):
        return lambda p: special.betaincinv(law.a, law.b, p)
    if isinstance(law, MittagLeffler) and law.rho == 1:
        return _factor_quantile(Exp1())
    return _factor_cdf(law).quantile


@lru_cache(maxsize=4)
def _prob_nodes(depth=14, per=24):
    """Gauss-Legendre nodes on (0, 1) graded geometrically toward both ends."""
    cuts = [10.0**-k for k in range(depth, 0, -1)]
    edges = np.array([0.0] + cuts + [0.5] + [1 - c for c in reversed(cuts)] + [1.0])
    t, w = np.polynomial.legendre.leggauss(per)
    a, b = edges[:-1, None], edges[1:, None]
    p = 0.5 * (a + b) + 0.5 * (b - a) * t[None, :]
    wt = 0.5 * (b - a) * w[None, :]
    return p.ravel(), wt.ravel()


def _powered(cdf, e):
    return lambda x: cdf(np.maximum(x, 0.0) ** (1.0 / e))


def _mix(cdf_x, quant_y, z):
    """``P(X Y <= z) = int_0^1 F_X(z / Q_Y(p)) dp``."""
    p, w = _prob_nodes()
    q = quant_y(p)
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = z[:, None] / q[None, :]
    r = np.where(np.isfinite(r), r, np.inf)
    vals = cdf_x(r.ravel()).reshape(r.shape)
    vals = np.where(np.isinf(r), 1.0, vals)
    return vals @ w


def cdf_limit(law, grid=None):
    """Tabulated CDF of a limit law on ``grid`` (geometric default).

    Products are folded factor by factor through the mixing integral
    ``P(XY <= z) = E F_X(z / Y)``, integrated in probability space on
    nodes graded toward both ends.
    """
    if grid is None:
        grid = np.geomspace(1e-6, 1e6, 2048)
    grid = np.asarray(grid, dtype=float)
    if not isinstance(law, Product):
        if isinstance(law, (Eta, ZetaPower, RenewalZeta, MittagLeffler)):
            t = _factor_cdf(law)
            return TabulatedCDF(grid, t(grid), t.error_budget, getattr(t, "tail_index", None), law_id(law))
        return TabulatedCDF(grid, _factor_cdf(law)(grid), 1e-12, None, law_id(law))
    fs = law.factors
    cdf = _powered(_factor_cdf(fs[0][0]), fs[0][1])
    if len(fs) == 1:
        return TabulatedCDF(grid, cdf(grid), 1e-12, None, law_id(law))
    for i, (f, e) in enumerate(fs[1:], start=1):
        quant = _factor_quantile(f)
        qy = (lambda q, e: lambda p: q(p) ** e)(quant, e)
        last = i == len(fs) - 1
        g = grid if last else np.geomspace(1e-12, 1e12, 4096)
        vals = _mix(cdf, qy, g)
        tab = TabulatedCDF(g, vals, 1e-4, _tail_of(fs[: i + 1]), law_id(law))
        cdf = tab
    return tab


def _tail_of(factors):
    """Smallest tail index among heavy factors, for extrapolation."""
    idx = []
    for f, e in factors:
        if isinstance(f, Eta):
            idx.append(f.gamma / e)
        elif isinstance(f, MittagLeffler) and f.rho < 1:
            idx.append(f.rho / e)
        elif isinstance(f, ZetaPower):
            idx.append((f.rho + f.gamma) / e)
    return min(idx) if idx else None
