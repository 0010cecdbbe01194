import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import migration, within
from subbranch.errors import ConfigError, NonCritical, NonNegativeMigrationMean
from subbranch.experiment import parse_experiment
from subbranch.model import (
    ExplicitPMF,
    Fixed,
    Geometric,
    HeavyTail,
    MigrationLaw,
    ModelConfig,
    PointMass,
    PoissonUnit,
    TwoPoint,
    derive_params,
    heavy_tail_draw,
    offspring_moments,
    sample_initial,
    sample_offspring,
    validate,
)


def test_theta_geometric_individual_emigration():
    theta, b = derive_params(Geometric(0.5), migration(1.0, 0.0))
    assert theta == pytest.approx(-1.0, abs=1e-12)
    assert b == pytest.approx(1.0, abs=1e-12)


def test_theta_poisson_half_emigration():
    mig = migration(0.5)
    assert mig.mean_M() == pytest.approx(-0.5)
    theta, b = derive_params(PoissonUnit(), mig)
    assert (theta, b) == pytest.approx((-1.0, 0.5), abs=1e-12)


def test_theta_with_immigration_and_family_emigration():
    mig = MigrationLaw(0.3, 0.5, 0.2, PointMass(1), PointMass(0), PointMass(1))
    assert mig.mean_M() == pytest.approx(-0.1, abs=1e-12)
    theta, b = derive_params(PoissonUnit(), mig)
    assert (theta, b) == pytest.approx((-0.2, 0.5), abs=1e-12)


def test_non_critical_offspring_rejected():
    with pytest.raises(NonCritical):
        derive_params(ExplicitPMF((0.2, 0.8)), migration(0.5))


def test_nonnegative_migration_mean_rejected():
    with pytest.raises(NonNegativeMigrationMean):
        derive_params(PoissonUnit(), MigrationLaw(0.0, 0.0, 1.0, immigration=PointMass(1)))


def test_validate_reports_pure_immigration():
    rep = validate(PoissonUnit(), MigrationLaw(0.0, 0.0, 1.0, immigration=PointMass(1)), Fixed(1))
    assert not rep.ok
    assert any("E[M]" in c.name and not c.passed for c in rep.checks)


def test_validate_passes_and_names_regime():
    rep = validate(ModelConfig(Geometric(0.5), migration(1.0, 0.0)))
    assert rep.ok
    assert rep.regime == "exactly -1"


def test_validate_flags_gamma_out_of_range():
    rep = validate(PoissonUnit(), migration(0.5), HeavyTail(1.2))
    assert not rep.ok
    assert any("gamma" in c.detail for c in rep.failures())


def test_fixed_start_is_constant(rng):
    assert np.all(sample_initial(Fixed(5), rng, 100) == 5)


def test_heavy_start_always_positive(rng):
    assert sample_initial(HeavyTail(0.7, 1.0), rng, 10**5).min() >= 1


def test_heavy_start_survival_at_nine(rng):
    z = sample_initial(HeavyTail(0.7, 1.0), rng, 10**6)
    p = 10**-0.7
    within((z > 9).mean(), p, math.sqrt(p * (1 - p) / z.size), 3)


@given(st.floats(1e-12, 1.0, exclude_min=True), st.floats(0.05, 0.95), st.floats(0.1, 3.0), st.integers(0, 10**6))
def test_heavy_start_inversion_is_exact(u, gamma, c, x):
    # Z_0 > x exactly when u < c (1 + x)^-gamma
    z = heavy_tail_draw(u, gamma, c)
    thr = c * (1.0 + x) ** -gamma
    if abs(u - thr) > 1e-9 * thr:
        assert (z > x) == (u < thr)


@given(st.floats(0.01, 1.0), st.integers(1, 5))
def test_derive_params_is_pure(p, k):
    mig = MigrationLaw(p, 1.0 - p, 0.0, PointMass(0), PointMass(k))
    a = derive_params(PoissonUnit(), mig)
    b = derive_params(PoissonUnit(), mig)
    assert a == b


@pytest.mark.parametrize("law", [TwoPoint(0.3, 0.3), Geometric(0.5), PoissonUnit(), ExplicitPMF((0.3, 0.5, 0.1, 0.1))])
def test_offspring_moments_match_monte_carlo(law, rng):
    mean, var = offspring_moments(law)
    x = sample_offspring(law, rng, 10**6).astype(float)
    within(x.mean(), mean, math.sqrt(var / x.size), 4)
    m4 = np.mean((x - mean) ** 4)
    within(x.var(), var, math.sqrt((m4 - var**2) / x.size), 4)


_GOOD = """
offspring:
  family: poisson
migration:
  p: 0.25
  q: 0.75
  ind_emigration: 1
initial:
  heavy_tail: {gamma: 0.7}
"""


def test_parse_round_trip():
    e = parse_experiment(_GOOD)
    assert e.model.theta == pytest.approx(-0.5)
    assert isinstance(e.model.initial, HeavyTail)
    assert e.resolved()["derived"]["b"] == pytest.approx(0.5)


def test_parse_error_carries_line_and_field():
    bad = _GOOD.replace("q: 0.75", "q: 0.5")
    with pytest.raises(ConfigError) as exc:
        parse_experiment(bad)
    assert exc.value.line is not None
    assert "migration" in str(exc.value)


def test_parse_error_for_non_numeric_value():
    bad = _GOOD.replace("gamma: 0.7", "gamma: high")
    with pytest.raises(ConfigError) as exc:
        parse_experiment(bad)
    assert exc.value.line == 9
    assert "initial.heavy_tail.gamma" in str(exc.value)


def test_parse_rejects_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_experiment(_GOOD + "extra: 1\n")
