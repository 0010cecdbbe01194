"""Acceptance suite: eleven desk-scale checks of the limit theorems.

Every check is evaluated at its stated tolerance.  Where the stated target
rests on a constant or law that the simulation contradicts, the pass flag
still follows the stated target and the corrected quantity is reported
under ``diagnostics``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .analysis import EmpiricalCDF, fit_tail_index, g_quadrature, ks_distance, predict
from .arb import atom_and_conditional, extinction_mean, theoretical_delta, up_tail
from .branching import generation_survival
from .errors import CycleOverflow, DomainError, InsufficientSurvivors, InversionFailure, UnsupportedRegime, ZeroCell
from .experiment import load_experiment
from .parallel import block_rng, tag_of
from .renewal import tail_prob
from .speciallaws import Beta, Exp1, Product, cdf_limit, eta_cdf, eta_laplace, eta_tail_constant, ml_cdf, ml_func, ml_table, sample_limit, sample_ml, zeta_normalizer_discrepancy
from .subordinated import conditional_normalized_sample, mixture_identity_check, survival_curve

_EXPECTED_ERRORS = (ZeroCell, DomainError, InsufficientSurvivors, InversionFailure, UnsupportedRegime, CycleOverflow)

DETERMINISM_SCALE = 0.01


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict
    target: str
    diagnostics: dict = field(default_factory=dict)
    note: str = ""

    def line(self):
        m = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:>2}. {self.title}: {m} (target {self.target})"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _n(x, scale, lo=2):
    return max(lo, int(round(x * scale)))


def _cfg(name):
    return load_experiment(f"builtin:{name}")


# --------------------------------------------------------------------------
# individual criteria
# --------------------------------------------------------------------------


def discrete_survival(seed, scale, workers):
    m = _cfg("c2_generations").model
    grid = np.unique(np.round(np.geomspace(16, 512, 16)).astype(np.int64))
    res = generation_survival(m, grid, _n(1e7, scale), seed, workers, name="acc:1")
    fit = fit_tail_index(grid, res.estimate)
    target = -(1.0 + abs(m.theta))
    return CriterionResult(
        1,
        "discrete survival exponent",
        abs(fit.exponent - target) <= 0.15,
        {"slope": fit.exponent, "stderr": fit.stderr, "paths": res.reps},
        f"{target:g} +- 0.15 on n in [16, 512]",
    )


def heavy_survival(seed, scale, workers):
    e = _cfg("c3")
    grid = np.geomspace(16, 512, 16)
    res = survival_curve(e.model, e.interarrival, grid, _n(2**20, scale), seed, workers, name="acc:2")
    fit = fit_tail_index(grid, res.estimate)
    up = up_tail(e.model, e.interarrival)
    return CriterionResult(
        2,
        "heavy-start survival exponent",
        abs(fit.exponent + 0.7) <= 0.1,
        {"slope": fit.exponent, "stderr": fit.stderr, "paths": res.reps},
        "-0.7 +- 0.1",
        {"constant_fit": math.exp(fit.intercept), "constant_K_mu_gamma": up.constant},
    )


def yaglom_exp(seed, scale, workers):
    e = _cfg("c2")
    s = conditional_normalized_sample(
        e.model,
        e.interarrival,
        512.0,
        _n(2**22, scale, 2**14),
        seed,
        workers,
        min_survivors=2,
        target_survivors=_n(2e4, scale),
        max_reps=_n(2**28, scale, 2**14),
        name="acc:3",
    )
    ks = ks_distance(s.values, cdf_limit(Exp1()), "Exp1")
    return CriterionResult(
        3,
        "Yaglom limit Exp(1), finite start",
        ks.statistic <= 0.05 and s.survivors >= 2e4 * scale,
        {"ks": ks.statistic, "survivors": s.survivors, "paths": s.reps},
        "KS <= 0.05 with >= 2e4 survivors at t=512",
    )


def _eta_checks(theta, gamma):
    phi0 = abs(eta_laplace(theta, gamma, 0.0) - 1.0)
    phi_tiny = abs(eta_laplace(theta, gamma, 1e-14) - 1.0)
    lam = np.geomspace(1e-6, 1e4, 200)
    phi = eta_laplace(theta, gamma, lam)
    monotone = bool(np.all(np.diff(phi) < 0))
    small = np.geomspace(1e-9, 1e-6, 20)
    head = np.polyfit(np.log(small), np.log(1.0 - eta_laplace(theta, gamma, small)), 1)[0]
    C = eta_tail_constant(theta, gamma)
    xs = (C / np.geomspace(1e-2, 1e-3, 12)) ** (1.0 / gamma)
    F = eta_cdf(theta, gamma)
    tail = np.polyfit(np.log(xs), np.log(1.0 - F(xs)), 1)[0]
    return {"phi0_err": max(phi0, phi_tiny), "monotone": monotone, "head_slope": float(head), "tail_slope": float(tail)}


def yaglom_eta(seed, scale, workers):
    e = _cfg("c3")
    th, g = e.model.theta, e.model.initial.gamma
    chk = _eta_checks(th, g)
    s = conditional_normalized_sample(e.model, e.interarrival, 512.0, _n(2**20, scale), seed, workers, min_survivors=2, name="acc:4")
    ks = ks_distance(s.values, eta_cdf(th, g), f"Eta({th:g},{g:g})")
    ok_eta = chk["phi0_err"] <= 1e-8 and chk["monotone"] and abs(chk["head_slope"] - g) <= 0.02 and abs(chk["tail_slope"] + g) <= 0.05
    return CriterionResult(
        4,
        "Yaglom limit eta, heavy start",
        ks.statistic <= 0.07 and ok_eta,
        {"ks": ks.statistic, "survivors": s.survivors, **chk},
        f"KS <= 0.07; phi(0) err <= 1e-8, phi monotone, head slope {g:g} +- 0.02, tail slope {-g:g} +- 0.05",
    )


def heavy_waits(seed, scale, workers):
    e = _cfg("c2_pareto")
    t = 1e4
    s = conditional_normalized_sample(e.model, e.interarrival, t, _n(2**21, scale), seed, workers, min_survivors=2, name="acc:5")
    p = s.survivors / s.reps
    ratio = p / tail_prob(e.interarrival, t)
    ET = extinction_mean(e.model, _n(1e6, scale), seed + 1, workers)
    lit = ET.mean - 1.0
    ks = ks_distance(s.values, cdf_limit(Exp1()), "Exp1")
    ok_ratio = abs(ratio / lit - 1.0) <= 0.15
    return CriterionResult(
        5,
        "heavy waits, finite start",
        ok_ratio and ks.statistic <= 0.07,
        {"ratio": ratio, "E_T_minus_1": lit, "ks": ks.statistic, "survivors": s.survivors},
        "ratio within 15% of E[T-1]; KS <= 0.07",
        {"E_T": ET.mean, "ratio_over_E_T": ratio / ET.mean, "median_normalized": float(np.median(s.values))},
        "ratio tends to E[T]; normalized values collapse to 0",
    )


def doubly_heavy(seed, scale, workers):
    e = _cfg("doubly_heavy")
    rho, g = e.interarrival.rho, e.model.initial.gamma
    grid = np.geomspace(100, 1e4, 12)
    res = survival_curve(e.model, e.interarrival, grid, _n(2**20, scale), seed, workers, name="acc:6:survival")
    fit = fit_tail_index(grid, res.estimate)
    pred = predict(e.model, e.interarrival)
    s = conditional_normalized_sample(e.model, e.interarrival, 1e4, _n(2**20, scale), seed, workers, min_survivors=2, name="acc:6:yaglom")
    ks = ks_distance(s.values, cdf_limit(pred.limit), pred.limit_id)
    ks_c = ks_distance(s.values, cdf_limit(pred.corrected_limit))
    return CriterionResult(
        6,
        "doubly heavy regime",
        abs(fit.exponent + rho * g) <= 0.1 and ks.statistic <= 0.08,
        {"slope": fit.exponent, "stderr": fit.stderr, "ks": ks.statistic, "survivors": s.survivors},
        f"slope {-rho * g:g} +- 0.1; KS vs eta*zeta <= 0.08",
        {"ks_renewal_zeta": ks_c.statistic, "zeta_normalizer_discrepancy": zeta_normalizer_discrepancy(rho, g)},
        "N(t) scaled converges to S^-rho, not tau_rho",
    )


def special_laws(seed, scale, workers):
    n = _n(1e6, scale)
    meas, ok = {}, True
    for rho in (0.5, 0.9):
        x = sample_ml(rho, block_rng(seed, tag_of(f"acc:7:ml:{rho}"), 0), n)
        ks = ks_distance(x, ml_table(rho)).statistic
        meas[f"ks_ml_{rho:g}"] = ks
        ok &= ks <= 0.01
        worst = 0.0
        for lam in (0.5, 1.0, 2.0):
            w = np.exp(-lam * x)
            z = abs(w.mean() - 1.0 / (1.0 + lam**rho)) / (w.std(ddof=1) / math.sqrt(n))
            worst = max(worst, z)
        meas[f"laplace_z_{rho:g}"] = worst
        ok &= worst <= 4.0
    e1 = abs(ml_func(0.5, -1.0) - math.e * math.erfc(1.0))
    f1 = abs(ml_cdf(0.5, 1.0) - 0.5724164238)
    meas["E05_err"], meas["F05_err"] = e1, f1
    ok &= e1 <= 1e-8 and f1 <= 1e-8
    return CriterionResult(7, "special laws", bool(ok), meas, "KS <= 0.01; closed forms to 1e-8; Laplace within 4 SE")


def arb_atom(seed, scale, workers):
    e = _cfg("arb_equal")
    reps = _n(2e4, scale)
    d_lit = theoretical_delta(e.model, e.interarrival, e.sojourn, printed_constants=True)
    d_fix = theoretical_delta(e.model, e.interarrival, e.sojourn)
    r = atom_and_conditional(e.arb, 1e4, reps, seed, workers, scale=1.0, name="acc:8:equal")
    a_lit, a_fix = d_lit / (d_lit + 1), d_fix / (d_fix + 1)
    e0 = _cfg("arb_light_sojourn")
    d0 = theoretical_delta(e0.model, e0.interarrival, e0.sojourn)
    r0 = atom_and_conditional(e0.arb, 1e4, reps, seed, workers, scale=1.0, name="acc:8:zero")
    ok = abs(r.atom - a_lit) <= 0.05 and d0 == 0.0 and r0.ci[0] <= 0.05
    return CriterionResult(
        8,
        "alternating process atom",
        bool(ok),
        {"atom": r.atom, "predicted": a_lit, "delta": d_lit, "atom_delta0": r0.atom, "ci_lo_delta0": r0.ci[0], "ci_hi_delta0": r0.ci[1]},
        "atom within 0.05 of Delta/(Delta+1); Delta=0 interval overlaps [0, 0.05]",
        {"delta_corrected": d_fix, "predicted_corrected": a_fix, "passes_corrected": abs(r.atom - a_fix) <= 0.05, "ci_lo": r.ci[0], "ci_hi": r.ci[1]},
        "the printed heavy-start constant is short by Gamma(1-gamma)",
    )


def _beta_quad(a, b):
    return integrate.quad(lambda u: 1.0, 0.0, 1.0, weight="alg", wvar=(a - 1.0, b - 1.0))[0]


def arb_conditional(seed, scale, workers):
    e = _cfg("arb_heavy_sojourn")
    r = atom_and_conditional(e.arb, 1e4, _n(2**16, scale), seed, workers, min_survivors=2, name="acc:9")
    pred = r.prediction
    ks = ks_distance(r.values, cdf_limit(pred.limit), pred.limit_id)
    target = _beta_quad(0.7, 0.9) / _beta_quad(0.6, 0.9)
    mean = float(r.values.mean())
    se = float(r.values.std(ddof=1) / math.sqrt(r.values.size))
    lim_mean = float(np.mean(sample_limit(pred.limit, block_rng(seed, tag_of("acc:9:limit"), 0), _n(1e6, scale))))
    return CriterionResult(
        9,
        "alternating process conditional law",
        ks.statistic <= 0.08 and abs(mean - target) <= 4 * se,
        {"ks": ks.statistic, "mean": mean, "se": se, "target_mean": target, "survivors": r.survivors},
        "KS <= 0.08; mean within 4 SE of B(0.7,0.9)/B(0.6,0.9)",
        {"limit_law_mean": lim_mean, "atom": r.atom},
        "the up-period value stays O(1) so the normalized law collapses to 0",
    )


def mixing(seed, scale, workers):
    rho = beta = 0.9
    F = lambda x: -math.expm1(-x)  # noqa: E731
    probes = np.geomspace(0.02, 20.0, 25)
    G1 = g_quadrature(F, rho, beta, x=probes)
    n = _n(1e6, scale)
    lit = Product(((Exp1(), 1.0), (Beta(beta, 1.0 - beta), rho)))
    fix = Product(((Exp1(), 1.0), (Beta(1.0 - beta, beta), rho)))
    ecdf = EmpiricalCDF(sample_limit(lit, block_rng(seed, tag_of("acc:10:lit"), 0), n))
    ecdf_c = EmpiricalCDF(sample_limit(fix, block_rng(seed, tag_of("acc:10:fix"), 0), n))
    sup = float(np.max(np.abs(G1 - ecdf(probes))))
    sup_c = float(np.max(np.abs(G1 - ecdf_c(probes))))
    e = _cfg("c2")
    mix = mixture_identity_check(e.model, e.interarrival, 32.0, [1, 2, 3, 5, 8, 13, 21, 34], _n(2**20, scale), seed, workers)
    return CriterionResult(
        10,
        "mixing integral and mixture identity",
        sup <= 0.01 and mix.passed,
        {"sup_G1_product": sup, "mixture_discrepancy": mix.discrepancy, "mixture_joint_se": mix.se_at_max},
        "sup <= 0.01 at 25 probes; mixture discrepancy <= 4 joint SE",
        {"sup_G1_swapped_beta": sup_c, "mixture_max_z": mix.max_z},
        "the integrand is the Beta(1-beta, beta) density",
    )


CRITERIA = (
    discrete_survival,
    heavy_survival,
    yaglom_exp,
    yaglom_eta,
    heavy_waits,
    doubly_heavy,
    special_laws,
    arb_atom,
    arb_conditional,
    mixing,
)

TITLES = {i + 1: f.__name__.replace("_", " ") for i, f in enumerate(CRITERIA)}


def _guarded(i, fn, seed, scale, workers):
    try:
        return fn(seed + i, scale, workers)
    except _EXPECTED_ERRORS as exc:
        return CriterionResult(i + 1, TITLES[i + 1], False, {}, "", note=f"{type(exc).__name__}: {exc}")


# --------------------------------------------------------------------------
# suite and summary
# --------------------------------------------------------------------------


def determinism(seed, scale, workers_pair=(1, 8), only=None):
    """Criterion 11: a reduced-scale suite under two worker counts, compared as bytes."""
    s = DETERMINISM_SCALE * scale
    a = render_summary(run_criteria(seed, s, workers_pair[0], only))
    b = render_summary(run_criteria(seed, s, workers_pair[1], only))
    same = a.encode() == b.encode()
    return CriterionResult(
        11,
        "determinism across worker counts",
        same,
        {"identical": same, "bytes": len(a.encode())},
        f"byte-identical summaries with workers {workers_pair[0]} and {workers_pair[1]}",
        {"scale": s},
    )


def run_criteria(seed, scale=1.0, workers=None, only=None, log=None):
    out = []
    for i, fn in enumerate(CRITERIA):
        if only is not None and i + 1 not in only:
            continue
        r = _guarded(i, fn, seed, scale, workers)
        if log is not None:
            log(r.line())
        out.append(r)
    return out


def run_suite(seed=0, scale=1.0, workers=None, only=None, log=None):
    """All criteria; ``scale`` multiplies every Monte Carlo count."""
    res = run_criteria(seed, scale, workers, only, log)
    if only is None or 11 in only:
        r = determinism(seed, scale, only=None if only is None else [k for k in only if k != 11])
        if log is not None:
            log(r.line())
        res.append(r)
    return res


SUMMARY_FIELDS = ("criterion", "title", "passed", "measured", "target", "diagnostics", "note")


def _jsonable(d):
    return {k: v.item() if isinstance(v, np.generic) else v for k, v in d.items()}


def render_summary(results):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for r in results:
        w.writerow([r.number, r.title, int(r.passed), json.dumps(_jsonable(r.measured), sort_keys=True), r.target, json.dumps(_jsonable(r.diagnostics), sort_keys=True), r.note])
    return buf.getvalue()
