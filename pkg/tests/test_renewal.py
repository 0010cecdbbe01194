import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import within
from subbranch.errors import ConfigError, DomainError
from subbranch.renewal import (
    Deterministic,
    Exponential,
    FractionalWaiting,
    ParetoTail,
    RenewalCursor,
    L_rho,
    count_renewals,
    ratio_limit_check,
    renewal_counts,
    sample_J,
    tail_constant,
    tail_prob,
)

LAWS = [Exponential(2.0), Deterministic(0.7), ParetoTail(0.7, 1.0), ParetoTail(0.4, 3.0), FractionalWaiting(0.6, 2.0)]


def test_deterministic_draws(rng):
    assert np.all(sample_J(Deterministic(1.0), rng, 50) == 1.0)


def test_exponential_mean(rng):
    j = sample_J(Exponential(2.0), rng, 10**6)
    within(j.mean(), 2.0, 2.0 / math.sqrt(j.size), 3)


def test_pareto_tail_at_ten(rng):
    j = sample_J(ParetoTail(0.7, 1.0), rng, 10**6)
    p = 10**-0.7
    assert p == pytest.approx(0.1995, abs=1e-4)
    within((j > 10).mean(), p, math.sqrt(p * (1 - p) / j.size), 3)


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_draws_positive(law, rng):
    assert sample_J(law, rng, 10**5).min() > 0


@pytest.mark.parametrize("x", [1.0, 2.0, 10.0, 100.0, 1e4])
def test_pareto_tail_exact_at_every_probe(x, rng):
    law = ParetoTail(0.7, 1.0)
    j = sample_J(law, rng, 10**6)
    p = float(tail_prob(law, x))
    assert p == pytest.approx(x**-0.7)
    within((j > x).mean(), p, math.sqrt(max(p * (1 - p), 1e-12) / j.size), 4)


def test_fractional_tail_matches_constant():
    law = FractionalWaiting(0.6, 2.0)
    x = 1e6
    assert float(tail_prob(law, x)) * x**0.6 == pytest.approx(tail_constant(law), rel=1e-3)


def test_L_rho_constants():
    assert L_rho(ParetoTail(0.7, 1.0)) == pytest.approx(math.gamma(0.3))
    assert L_rho(FractionalWaiting(0.6, 2.0)) == pytest.approx(2.0**0.6)
    with pytest.raises(DomainError):
        L_rho(Exponential(1.0))


@pytest.mark.parametrize("bad", [lambda: ParetoTail(1.2), lambda: ParetoTail(0.5, 0.0), lambda: Exponential(-1.0), lambda: Deterministic(0.0)])
def test_invalid_laws_rejected(bad):
    with pytest.raises(ConfigError):
        bad()


# --------------------------------------------------------------------------
# counting
# --------------------------------------------------------------------------


def test_deterministic_count_and_spent(rng):
    n, spent = count_renewals(Deterministic(1.0), 3.5, rng)
    assert n == 3
    assert spent == pytest.approx(0.5)


def test_count_before_first_arrival(rng):
    assert count_renewals(Deterministic(1.0), 0.5, rng) == (0, 0.5)


def test_count_rejects_negative_time(rng):
    with pytest.raises(DomainError):
        count_renewals(Exponential(), -1.0, rng)


def test_poisson_mean_of_counts():
    n = renewal_counts(Exponential(1.0), 100.0, 2**17, seed=1)
    within(n.mean(), 100.0, 10.0 / math.sqrt(n.size), 3)
    # Poisson dispersion
    assert n.var() == pytest.approx(100.0, rel=0.03)


def test_fractional_poisson_mean():
    # E N(t) = (t / scale)^rho / Gamma(1 + rho) for Mittag-Leffler waits
    law = FractionalWaiting(0.6, 2.0)
    n = renewal_counts(law, 500.0, 2**17, seed=2)
    within(n.mean(), (250.0**0.6) / math.gamma(1.6), n.std() / math.sqrt(n.size), 4)


def test_pareto_count_scaling_stabilizes():
    law = ParetoTail(0.7, 1.0)
    ratios = []
    for t in (1e3, 1e4, 1e5):
        n = renewal_counts(law, t, 2**16, seed=3)
        ratios.append(n.mean() * L_rho(law) / t**0.7)
    assert max(ratios) / min(ratios) <= 1.15
    # the limit mean is E[S^-rho] = 1 / Gamma(1 + rho)
    assert ratios[-1] == pytest.approx(1 / math.gamma(1.7), rel=0.05)


def test_ratio_check_deterministic():
    d = ratio_limit_check(Deterministic(1.0), [10.5, 100.5], 1000)
    assert np.allclose(d.quantiles[:, 1], np.floor([10.5, 100.5]) / [10.5, 100.5])


def test_ratio_check_exponential_concentration():
    d = ratio_limit_check(Exponential(1.0), [1e4], 2**15, eps=0.05, seed=4)
    assert d.outside[0] <= 0.01


def test_ratio_check_rejects_infinite_mean():
    with pytest.raises(DomainError):
        ratio_limit_check(ParetoTail(0.7), [10.0], 10)


# --------------------------------------------------------------------------
# invariants
# --------------------------------------------------------------------------


@given(st.sampled_from(LAWS), st.floats(0.0, 300.0), st.integers(0, 2**32))
def test_cursor_brackets_t(law, t, seed):
    c = RenewalCursor(law, np.random.default_rng(seed))
    last = 0.0
    for s in np.linspace(0.0, t, 5):
        n = c.advance_to(s)
        assert c.s_n <= s < c.next_epoch
        assert c.s_n >= last and c.next_epoch > c.s_n
        assert n == c.n
        last = c.s_n


@given(st.sampled_from(LAWS), st.floats(0.0, 1e4), st.integers(0, 2**32))
def test_spent_time_is_consistent(law, t, seed):
    n, spent = count_renewals(law, t, np.random.default_rng(seed))
    assert n >= 0
    assert 0.0 <= spent <= t
    if n == 0:
        assert spent == t


@pytest.mark.parametrize("law", [Exponential(1.0), ParetoTail(0.7)], ids=repr)
def test_cursor_and_kernel_agree_in_law(law):
    rng = np.random.default_rng(8)
    a = np.array([RenewalCursor(law, rng).advance_to(50.0) for _ in range(20000)])
    b = renewal_counts(law, 50.0, 20000, seed=8)
    se = math.sqrt(a.var() / a.size + b.var() / b.size)
    within(a.mean(), b.mean(), se, 4)


def test_counts_independent_of_workers():
    a = renewal_counts(ParetoTail(0.7), 1e3, 3 * 2**14, seed=5, workers=1)
    b = renewal_counts(ParetoTail(0.7), 1e3, 3 * 2**14, seed=5, workers=3)
    assert np.array_equal(a, b)
