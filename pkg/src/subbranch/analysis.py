"""Estimators, the limit-regime prediction oracle and mixing-integral checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .errors import DomainError, UnsupportedRegime, ZeroCell
from .model import initial_mean_finite
from .renewal import L_rho, mean_of, mu_finite
from .speciallaws import Beta, Eta, Exp1, Product, RenewalZeta, ZetaPower, law_id

# --------------------------------------------------------------------------
# empirical distribution functions and KS distances
# --------------------------------------------------------------------------


class EmpiricalCDF:
    """Right-continuous empirical distribution function of a sample."""

    def __init__(self, values):
        v = np.sort(np.asarray(values, dtype=float).ravel())
        if v.size == 0:
            raise DomainError("empty sample")
        self.values = v
        self.n = v.size

    def __call__(self, x):
        out = np.searchsorted(self.values, x, side="right") / self.n
        return float(out) if np.ndim(out) == 0 else out

    def left(self, x):
        """Left limits ``F(x-)``."""
        out = np.searchsorted(self.values, x, side="left") / self.n
        return float(out) if np.ndim(out) == 0 else out

    def mean(self):
        return float(self.values.mean())


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n: int
    reference: str


def ks_distance(sample, reference, reference_id=None):
    """Sup-norm distance between an empirical CDF and a reference.

    ``reference`` is either a vectorized CDF callable (continuous law) or a
    second :class:`EmpiricalCDF`, in which case the two-sample statistic is
    returned.
    """
    if not isinstance(sample, EmpiricalCDF):
        sample = EmpiricalCDF(sample)
    if sample.n < 2:
        raise DomainError("KS distance needs at least two sample points")
    if isinstance(reference, EmpiricalCDF):
        d = stats.ks_2samp(sample.values, reference.values, method="asymp").statistic
        return KSResult(float(d), sample.n, reference_id or f"ECDF(n={reference.n})")
    d = stats.ks_1samp(sample.values, reference, method="asymp").statistic
    name = reference_id or getattr(reference, "name", "") or getattr(reference, "__name__", "reference")
    return KSResult(float(d), sample.n, name)


# --------------------------------------------------------------------------
# tail-index fits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TailFit:
    """Least-squares slope of ``log p`` against ``log t``."""

    exponent: float
    stderr: float
    t_range: tuple
    points: int
    intercept: float


def fit_tail_index(t, p, variances=None, min_points=8, min_decades=1.5):
    """Fit ``p(t) ~ C t^exponent`` by least squares on log-log points.

    Parameters
    ----------
    t, p : array_like
        Grid and strictly positive estimates.
    variances : array_like, optional
        Variances of ``log p``; when given the fit is weighted by their
        inverses.

    Raises
    ------
    ZeroCell
        An estimate is zero.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ZeroCell("survival estimate is zero on the fit range")
    if t.size < min_points:
        raise DomainError(f"tail fit needs at least {min_points} points, got {t.size}")
    if math.log10(t.max() / t.min()) < min_decades - 1e-12:
        raise DomainError(f"fit range must span {min_decades} decades")
    x, y = np.log(t), np.log(p)
    if variances is None:
        r = stats.linregress(x, y)
        return TailFit(float(r.slope), float(r.stderr), (float(t.min()), float(t.max())), int(t.size), float(r.intercept))
    w = 1.0 / np.asarray(variances, dtype=float)
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    dof = max(t.size - 2, 1)
    scale = float(w @ resid**2) / dof
    se = math.sqrt(cov[1, 1] * max(scale, 1.0))
    return TailFit(float(beta[1]), se, (float(t.min()), float(t.max())), int(t.size), float(beta[0]))


def log_survival_variance(survivors, reps):
    """Delta-method variance of ``log p_hat`` for binomial counts."""
    s = np.asarray(survivors, dtype=float)
    return (1.0 - s / reps) / s


# --------------------------------------------------------------------------
# regime prediction
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Normalization:
    """``A(t) = scale * t^power``, with a symbolic label."""

    scale: float
    power: float
    label: str

    def __call__(self, t):
        return self.scale * np.asarray(t, dtype=float) ** self.power


@dataclass(frozen=True)
class Prediction:
    """Predicted scaling of the survival probability and the Yaglom-type limit.

    ``limit`` is the law as stated in the summary tables; ``corrected_limit``
    is the law the process actually converges to where the two differ
    (``None`` when the normalized variable degenerates at zero).
    """

    normalization: Normalization
    exponent: float
    limit: object
    atom: float = 0.0
    conditional: bool = True
    delta: float | None = None
    corrected_limit: object = "same"
    notes: tuple = field(default_factory=tuple)
    row: str = ""

    @property
    def limit_id(self):
        return law_id(self.limit)


def _heavy(model):
    return not initial_mean_finite(model.initial)


def predict(model, interarrival, sojourn=None, delta=None, strict_windows=True):
    """Dispatch to the row of the summary tables that covers a configuration.

    Without ``sojourn`` the subordinated process ``Y(t)`` is described;
    with it the alternating process ``U(t)``.  ``delta`` overrides the
    tail ratio (otherwise it is computed by :func:`arb.theoretical_delta`).

    Raises
    ------
    UnsupportedRegime
        Outside the parameter windows where a limit is stated.
    """
    theta, b = model.theta, model.b
    heavy = _heavy(model)
    gamma = model.initial.gamma if heavy else None
    if mu_finite(interarrival):
        mu = mean_of(interarrival)
        A = Normalization(b / mu, 1.0, "b t / mu")
        if heavy:
            exponent, limit, row, corr = -gamma, Eta(theta, gamma), "T1: mu<inf, heavy start", "same"
        else:
            exponent, limit, row, corr = -(1.0 + abs(theta)), Exp1(), "T1: mu<inf, finite start", "same"
        rho = 1.0
    else:
        rho = interarrival.rho
        Lr = L_rho(interarrival)
        A = Normalization(b / Lr, rho, "b t^rho / L_rho")
        if heavy:
            if not gamma < rho:
                raise UnsupportedRegime(f"power-biased Mittag-Leffler weight diverges for gamma={gamma} >= rho={rho}")
            exponent = -rho * gamma
            limit = Product(((Eta(theta, gamma), 1.0), (ZetaPower(rho, gamma), 1.0)))
            corr = Product(((Eta(theta, gamma), 1.0), (RenewalZeta(rho, gamma), 1.0)))
            row = "T1: mu=inf, heavy start"
        else:
            exponent, limit, row = -rho, Exp1(), "T1: mu=inf, finite start"
            corr = None
    if sojourn is None:
        notes = ()
        if corr is None:
            notes = ("survival is carried by one long wait; Y(t) stays O(1) and Y(t)/A(t) -> 0",)
        elif corr != "same":
            notes = ("N(t) L_rho / t^rho converges to S^-rho, giving the renewal-biased factor",)
        return Prediction(A, exponent, limit, corrected_limit=corr, notes=notes, row=row)
    return _predict_arb(model, interarrival, sojourn, delta, A, exponent, limit, corr, rho, strict_windows)


def _predict_arb(model, interarrival, sojourn, delta, A, exponent, base, base_corr, rho, strict):
    from .arb import sojourn_exponent, theoretical_delta

    heavy = _heavy(model)
    if mu_finite(interarrival) and not heavy:
        raise UnsupportedRegime("alternating limits need an infinite-mean up period (heavy start or infinite-mean waits)")
    beta = -exponent
    alpha = sojourn_exponent(sojourn)
    if strict:
        if not 0.5 < beta < 1:
            raise UnsupportedRegime(f"up-period tail exponent {beta:g} outside (1/2, 1)")
        if alpha < 1 and not 0.5 < alpha < 1:
            raise UnsupportedRegime(f"sojourn tail exponent {alpha:g} outside (1/2, 1)")
    if delta is None:
        delta = theoretical_delta(model, interarrival, sojourn)
    if mu_finite(interarrival):
        A = Normalization(A.scale, 1.0, "b t / mu")
    else:
        # the alternating-process table normalizes by t^rho / L_rho (no b)
        A = Normalization(A.scale / model.b, rho, "t^rho / L_rho")
    e = 1.0 if mu_finite(interarrival) else rho
    base_terms = ((base, 1.0),) if not isinstance(base, Product) else base.factors
    corr_terms = None
    if base_corr == "same":
        corr_terms = base_terms
    elif base_corr is not None:
        corr_terms = base_corr.factors
    if math.isinf(delta):
        if alpha >= 1:
            raise UnsupportedRegime("an infinite tail ratio needs a heavy sojourn law")
        lit, fix = Beta(alpha, 1.0 - beta), Beta(1.0 - beta, alpha)
        atom, conditional = 1.0, True
    else:
        lit, fix = Beta(beta, 1.0 - beta), Beta(1.0 - beta, beta)
        atom, conditional = delta / (delta + 1.0), False
    limit = Product(base_terms + ((lit, e),))
    corrected = None if corr_terms is None else Product(corr_terms + ((fix, e),))
    notes = ("Beta parameters of the mixing integral are (1-beta, beta) / (1-beta, alpha)",)
    row = "T2: " + ("mu<inf" if mu_finite(interarrival) else "mu=inf") + (", heavy start" if heavy else ", finite start")
    row += ", Delta=inf" if math.isinf(delta) else ", Delta<inf"
    return Prediction(A, exponent, limit, atom, conditional, delta, corrected, notes, row)


# --------------------------------------------------------------------------
# mixing integrals
# --------------------------------------------------------------------------


def g_quadrature(F, rho, beta_exp, alpha=None, x=1.0):
    """Mixing integral of a limit CDF against the age law of the current cycle.

    ``G1(x) = B(beta, 1-beta)^-1 int_0^1 F(x u^-rho) (1-u)^(beta-1) u^-beta du``;
    with ``alpha`` the weight ``(1-u)^(alpha-1)`` and normaliser
    ``B(alpha, 1-beta)`` give ``G2``.  Endpoint singularities are absorbed
    into an algebraic weight function.

    Parameters
    ----------
    F : callable
        Scalar CDF.
    x : float or array_like
    """
    if not 0.5 < beta_exp < 1:
        raise DomainError(f"beta must lie in (1/2, 1), got {beta_exp!r}")
    if alpha is not None and not 0.5 < alpha < 1:
        raise DomainError(f"alpha must lie in (1/2, 1), got {alpha!r}")
    if alpha is None:
        wvar, norm = (-beta_exp, beta_exp - 1.0), special.beta(beta_exp, 1.0 - beta_exp)
    else:
        wvar, norm = (-beta_exp, alpha - 1.0), special.beta(alpha, 1.0 - beta_exp)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    for i, xv in enumerate(xs):
        if xv <= 0:
            out[i] = 0.0
            continue
        if not np.isfinite(xv):
            out[i] = 1.0
            continue
        f = lambda u: float(F(xv * u ** (-rho))) if u > 0 else 1.0  # noqa: E731
        val = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=wvar, epsabs=1e-12, epsrel=1e-8, limit=200)[0]
        out[i] = val / norm
    return float(out[0]) if np.ndim(x) == 0 else out
