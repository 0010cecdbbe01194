"""Laws and configuration of the critical branching chain with migration.

The chain evolves as ``Z' = max(0, X_1 + ... + X_Z + M * 1{Z > 0})`` with
mean-one offspring ``X`` and a migration term ``M`` that, per generation,
either removes families and individuals, does nothing, or adds immigrants.
Two derived numbers drive all asymptotics::

    theta = 2 E[M] / Var[X]      b = Var[X] / 2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import yaml

from .errors import ConfigError, NonCritical, NonNegativeMigrationMean

TOL = 1e-12
Z_CLAMP = float(2**53)  # largest integer held exactly in float64


# --------------------------------------------------------------------------
# discrete laws used for migration components and finite-mean starts
# --------------------------------------------------------------------------


def _check_pmf(probs, what):
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ConfigError(f"{what}: probability vector must be a nonempty list")
    if np.any(p < 0):
        raise ConfigError(f"{what}: probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > TOL:
        raise ConfigError(f"{what}: probabilities sum to {p.sum():.15g}, not 1")
    return p


@dataclass(frozen=True)
class PointMass:
    """Degenerate law at a nonnegative integer."""

    k: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ConfigError("point mass must sit at a nonnegative integer")

    @property
    def mean(self):
        return float(self.k)

    @property
    def bounded(self):
        return True

    @property
    def upper(self):
        return int(self.k)

    def pmf(self):
        p = np.zeros(self.k + 1)
        p[-1] = 1.0
        return p


@dataclass(frozen=True)
class FinitePMF:
    """Law on ``0..K`` given by its probability vector."""

    probs: tuple

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(x) for x in self.probs))
        _check_pmf(self.probs, "pmf")

    @property
    def mean(self):
        p = np.asarray(self.probs)
        return float(np.dot(np.arange(p.size), p))

    @property
    def bounded(self):
        return True

    @property
    def upper(self):
        nz = np.nonzero(np.asarray(self.probs))[0]
        return int(nz[-1]) if nz.size else 0

    def pmf(self):
        return np.asarray(self.probs)


@dataclass(frozen=True)
class PoissonCount:
    """Poisson law with the given mean (immigration or finite-mean starts)."""

    mean: float

    def __post_init__(self):
        if not (self.mean >= 0 and math.isfinite(self.mean)):
            raise ConfigError("Poisson mean must be finite and nonnegative")

    @property
    def bounded(self):
        return False

    @property
    def upper(self):
        return math.inf


DiscreteLaw = Union[PointMass, FinitePMF, PoissonCount]


def sample_discrete(law, rng, size=None):
    """Draw from a :data:`DiscreteLaw`."""
    if isinstance(law, PointMass):
        return law.k if size is None else np.full(size, law.k, dtype=np.int64)
    if isinstance(law, PoissonCount):
        return rng.poisson(law.mean, size)
    p = law.pmf()
    return rng.choice(p.size, size=size, p=p)


# --------------------------------------------------------------------------
# offspring laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoPoint:
    """Offspring on ``{0, 2}`` with leftover mass, if any, placed at 1.

    Criticality forces ``p0 == p2``; the variance is then ``2 * p2``.
    """

    p0: float
    p2: float

    def pmf(self):
        return np.array([self.p0, 1.0 - self.p0 - self.p2, self.p2])


@dataclass(frozen=True)
class Geometric:
    """``P(X = k) = s (1 - s)^k``; mean one needs ``s = 1/2``."""

    success: float = 0.5

    def pmf(self, kmax=80):
        k = np.arange(kmax + 1)
        return self.success * (1 - self.success) ** k


@dataclass(frozen=True)
class PoissonUnit:
    """Poisson offspring with mean one."""


@dataclass(frozen=True)
class ExplicitPMF:
    """Offspring law on ``0..K`` given by its probability vector."""

    probs: tuple

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(x) for x in self.probs))

    def pmf(self):
        return np.asarray(self.probs)


OffspringLaw = Union[TwoPoint, Geometric, PoissonUnit, ExplicitPMF]


def offspring_moments(law):
    """Return ``(mean, variance)`` computed analytically."""
    if isinstance(law, PoissonUnit):
        return 1.0, 1.0
    if isinstance(law, Geometric):
        s = law.success
        return (1 - s) / s, (1 - s) / s**2
    p = law.pmf()
    k = np.arange(p.size)
    m = float(np.dot(k, p))
    return m, float(np.dot(k * k, p) - m * m)


def _check_offspring(law):
    if isinstance(law, (TwoPoint, ExplicitPMF)):
        _check_pmf(law.pmf(), "offspring")
    if isinstance(law, Geometric) and not 0 < law.success < 1:
        raise ConfigError("geometric success parameter must lie in (0, 1)")
    mean, var = offspring_moments(law)
    if abs(mean - 1.0) > TOL:
        raise NonCritical(f"offspring mean is {mean!r}, criticality needs 1")
    if not (0 < var < math.inf):
        raise ConfigError(f"offspring variance {var!r} must be positive and finite")
    return mean, var


def sample_offspring(law, rng, size=None):
    """Draw individual offspring counts."""
    if isinstance(law, PoissonUnit):
        return rng.poisson(1.0, size)
    if isinstance(law, Geometric):
        # numpy's geometric counts trials, shift to failures
        return rng.geometric(law.success, size) - 1
    p = law.pmf()
    return rng.choice(p.size, size=size, p=p)


# --------------------------------------------------------------------------
# migration and initial population
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MigrationLaw:
    """Per-generation migration.

    With probability ``p`` the first ``E_fam`` families of the generation are
    removed together with ``E_ind`` further individuals; with probability
    ``q`` nothing happens; with probability ``r`` ``I`` immigrants arrive.
    """

    p: float
    q: float
    r: float
    fam_emigration: DiscreteLaw = field(default_factory=PointMass)
    ind_emigration: DiscreteLaw = field(default_factory=PointMass)
    immigration: DiscreteLaw = field(default_factory=PointMass)

    def mean_M(self, offspring_mean=1.0):
        return self.r * self.immigration.mean - self.p * (
            self.fam_emigration.mean * offspring_mean + self.ind_emigration.mean
        )


def _check_migration(mig):
    w = (mig.p, mig.q, mig.r)
    if any(x < 0 for x in w) or abs(sum(w) - 1.0) > TOL:
        raise ConfigError(f"branch weights p, q, r = {w} must be a probability vector")
    for name in ("fam_emigration", "ind_emigration"):
        if not getattr(mig, name).bounded:
            raise ConfigError(f"{name} must have bounded support", field=f"migration.{name}")


@dataclass(frozen=True)
class Fixed:
    """Deterministic initial population."""

    k: int = 1


@dataclass(frozen=True)
class FiniteMean:
    """Random initial population with finite mean."""

    law: DiscreteLaw


@dataclass(frozen=True)
class HeavyTail:
    """Initial population with ``P(Z_0 > x) = min(1, c (1 + x)^-gamma)``."""

    gamma: float
    c: float = 1.0


InitialLaw = Union[Fixed, FiniteMean, HeavyTail]


def initial_failures(init):
    """List of problems with an initial law (empty when valid)."""
    out = []
    if isinstance(init, Fixed):
        if int(init.k) != init.k or init.k < 1:
            out.append(f"Fixed(k) needs an integer k >= 1, got {init.k!r}")
    elif isinstance(init, HeavyTail):
        if not 0 < init.gamma < 1:
            out.append(f"heavy-tail exponent gamma = {init.gamma!r} outside (0, 1)")
        if not init.c > 0:
            out.append(f"heavy-tail constant c = {init.c!r} must be positive")
    elif isinstance(init, FiniteMean):
        if not math.isfinite(init.law.mean):
            out.append("finite-mean initial law has infinite mean")
    return out


def initial_mean_finite(init):
    return not isinstance(init, HeavyTail)


def heavy_tail_draw(u, gamma, c):
    """Inverse-CDF map from uniforms to the heavy-tailed start.

    ``Z_0 > x`` iff ``u < c (1 + x)^-gamma``, so ``Z_0`` counts the integers
    ``x >= 0`` below ``(c / u)^(1/gamma) - 1``.
    """
    with np.errstate(divide="ignore", over="ignore"):
        y = (c / np.asarray(u, dtype=float)) ** (1.0 / gamma) - 1.0
    return np.minimum(np.maximum(np.ceil(y), 0.0), Z_CLAMP)


def sample_initial(init, rng, size=None):
    """Draw initial population sizes as float64 integers.

    Heavy-tailed draws can exceed the int64 range; values are clamped at
    ``2**53`` where float64 still represents every integer.
    """
    if isinstance(init, Fixed):
        return float(init.k) if size is None else np.full(size, float(init.k))
    if isinstance(init, FiniteMean):
        x = sample_discrete(init.law, rng, size)
        return float(x) if size is None else np.asarray(x, dtype=float)
    u = rng.random(size)
    out = heavy_tail_draw(u, init.gamma, init.c)
    return float(out) if size is None else out


# --------------------------------------------------------------------------
# full configuration
# --------------------------------------------------------------------------


def derive_params(offspring, migration):
    """Return ``(theta, b)`` for a critical offspring law and a migration law.

    Raises
    ------
    NonCritical
        Offspring mean is not one.
    NonNegativeMigrationMean
        ``E[M] >= 0``.
    """
    mean, var = _check_offspring(offspring)
    _check_migration(migration)
    mM = migration.mean_M(mean)
    if not mM < 0:
        raise NonNegativeMigrationMean(f"migration mean E[M] = {mM!r} must be negative")
    return 2.0 * mM / var, var / 2.0


def regime_of(theta):
    if abs(theta + 1.0) <= TOL:
        return "exactly -1"
    return "(-1,0)" if theta > -1.0 else "below -1"


@dataclass(frozen=True)
class ModelConfig:
    """Offspring, migration and initial laws with ``theta`` and ``b`` derived."""

    offspring: OffspringLaw
    migration: MigrationLaw
    initial: InitialLaw = field(default_factory=Fixed)
    theta: float = field(init=False)
    b: float = field(init=False)
    regime: str = field(init=False)

    def __post_init__(self):
        theta, b = derive_params(self.offspring, self.migration)
        bad = initial_failures(self.initial)
        if bad:
            raise ConfigError(bad[0], field="initial")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "regime", regime_of(theta))

    @property
    def variance(self):
        return offspring_moments(self.offspring)[1]

    def replace(self, **kw):
        d = {"offspring": self.offspring, "migration": self.migration, "initial": self.initial}
        d.update(kw)
        return ModelConfig(**d)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    theta: float | None = None
    b: float | None = None
    regime: str | None = None

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]


def validate(offspring, migration=None, initial=None):
    """Check the model assumptions one by one without raising.

    Accepts either a :class:`ModelConfig` or its three parts, so that
    configurations too broken to construct can still be reported on.
    """
    if isinstance(offspring, ModelConfig):
        offspring, migration, initial = offspring.offspring, offspring.migration, offspring.initial
    checks = []

    def run(name, fn):
        try:
            detail = fn() or ""
            checks.append(Check(name, True, detail))
            return True
        except (ConfigError, ValueError) as exc:
            checks.append(Check(name, False, str(exc)))
            return False

    ok_off = run("offspring: mean 1, 0 < Var < inf", lambda: "mean=1, Var=%.12g" % _check_offspring(offspring)[1])
    ok_mig = run("migration: p+q+r=1, bounded emigration", lambda: _check_migration(migration))
    if ok_mig:
        finite = math.isfinite(migration.immigration.mean)
        checks.append(Check("migration: immigration has finite mean", finite))
    theta = b = regime = None
    if ok_off and ok_mig:
        mM = migration.mean_M(1.0)
        if mM < 0:
            theta, b = derive_params(offspring, migration)
            regime = regime_of(theta)
            checks.append(Check("migration: E[M] < 0", True, f"E[M]={mM:.12g}, theta={theta:.12g}"))
        else:
            checks.append(Check("migration: E[M] < 0", False, f"mean_M >= 0 (E[M]={mM:.12g})"))
    if initial is not None:
        bad = initial_failures(initial)
        checks.append(Check("initial law", not bad, "; ".join(bad)))
    # every built-in family is light tailed and PMFs have finite support, so
    # E[X^2 log X] and the migration moments are finite by construction
    checks.append(Check("moment conditions (X^2 log X, migration)", ok_off, "certified analytically" if ok_off else "offspring invalid"))
    return ValidationReport(tuple(checks), theta, b, regime)


# --------------------------------------------------------------------------
# configuration files
# --------------------------------------------------------------------------


class Node:
    """YAML mapping node that remembers where each value came from."""

    def __init__(self, node, path=""):
        self.node = node
        self.path = path

    @property
    def line(self):
        return self.node.start_mark.line + 1

    def error(self, msg, key=None):
        f = f"{self.path}.{key}" if (key and self.path) else (key or self.path or None)
        line = self.line
        if key is not None and isinstance(self.node, yaml.MappingNode):
            for k, v in self.node.value:
                if k.value == key:
                    line = v.start_mark.line + 1
        return ConfigError(msg, field=f, line=line)

    def keys(self):
        if not isinstance(self.node, yaml.MappingNode):
            raise ConfigError("expected a mapping", field=self.path or None, line=self.line)
        return [k.value for k, _ in self.node.value]

    def has(self, key):
        return key in self.keys()

    def child(self, key):
        for k, v in self.node.value if isinstance(self.node, yaml.MappingNode) else []:
            if k.value == key:
                return Node(v, f"{self.path}.{key}" if self.path else key)
        raise self.error("missing required field", key)

    def scalar(self):
        if not isinstance(self.node, yaml.ScalarNode):
            raise ConfigError("expected a scalar value", field=self.path, line=self.line)
        return yaml.safe_load(self.node.value) if self.node.value != "" else None

    def number(self, key=None, default=None, integer=False):
        if key is not None and not self.has(key):
            if default is None:
                raise self.error("missing required field", key)
            return default
        n = self.child(key) if key is not None else self
        v = n.scalar()
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", field=n.path, line=n.line)
        if integer and int(v) != v:
            raise ConfigError(f"expected an integer, got {v!r}", field=n.path, line=n.line)
        return int(v) if integer else float(v)

    def numbers(self, key):
        n = self.child(key)
        if not isinstance(n.node, yaml.SequenceNode):
            raise ConfigError("expected a list of numbers", field=n.path, line=n.line)
        return tuple(Node(x, f"{n.path}[{i}]").number() for i, x in enumerate(n.node.value))

    def variant(self, allowed):
        """Return ``(name, body)`` for a single-key mapping ``{name: body}``."""
        keys = self.keys()
        if len(keys) != 1 or keys[0] not in allowed:
            raise ConfigError(
                f"expected exactly one of {sorted(allowed)}, got {keys}", field=self.path or None, line=self.line
            )
        return keys[0], self.child(keys[0])


def load_node(text):
    """Parse YAML text into a root :class:`Node`."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"not valid YAML ({getattr(exc, 'problem', exc)})", line=mark.line + 1 if mark else None) from None
    if root is None:
        raise ConfigError("empty configuration")
    return Node(root)


def parse_discrete(node):
    """Integer scalar means a point mass; otherwise ``{pmf: [...]}`` or ``{poisson: m}``."""
    if isinstance(node.node, yaml.ScalarNode):
        k = node.number(integer=True)
        try:
            return PointMass(k)
        except ConfigError as exc:
            raise ConfigError(str(exc), field=node.path, line=node.line) from None
    kind, body = node.variant({"pmf", "poisson", "constant"})
    try:
        if kind == "pmf":
            return FinitePMF(node.numbers("pmf"))
        if kind == "constant":
            return PointMass(body.number(integer=True))
        return PoissonCount(body.number())
    except ConfigError as exc:
        raise ConfigError(str(exc), field=body.path, line=body.line) from None


def parse_offspring(node):
    fam = node.child("family").scalar()
    try:
        if fam == "poisson":
            law = PoissonUnit()
        elif fam == "geometric":
            law = Geometric(node.number("success", default=0.5))
        elif fam == "two_point":
            law = TwoPoint(node.number("p0"), node.number("p2"))
        elif fam == "pmf":
            law = ExplicitPMF(node.numbers("probs"))
        else:
            raise node.error(f"unknown family {fam!r} (poisson, geometric, two_point, pmf)", "family")
        _check_offspring(law)
    except ConfigError as exc:
        if exc.line is not None:
            raise
        raise ConfigError(str(exc), field=node.path, line=node.line) from None
    return law


def parse_migration(node):
    kw = {}
    for key in ("fam_emigration", "ind_emigration", "immigration"):
        if node.has(key):
            kw[key] = parse_discrete(node.child(key))
    mig = MigrationLaw(node.number("p", 0.0), node.number("q", 0.0), node.number("r", 0.0), **kw)
    try:
        _check_migration(mig)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], field=exc.field or node.path, line=node.line) from None
    return mig


def parse_initial(node):
    kind, body = node.variant({"fixed", "finite_mean", "heavy_tail"})
    if kind == "fixed":
        init = Fixed(body.number(integer=True))
    elif kind == "finite_mean":
        init = FiniteMean(parse_discrete(body))
    else:
        init = HeavyTail(body.number("gamma"), body.number("c", 1.0))
    bad = initial_failures(init)
    if bad:
        raise ConfigError(bad[0], field=body.path, line=body.line)
    return init


def parse_model(root):
    """Build a :class:`ModelConfig` from the root node of a config file."""
    off = parse_offspring(root.child("offspring"))
    mig = parse_migration(root.child("migration"))
    init = parse_initial(root.child("initial")) if root.has("initial") else Fixed(1)
    try:
        return ModelConfig(off, mig, init)
    except ConfigError as exc:
        n = root.child("migration")
        raise ConfigError(str(exc), field=exc.field or "migration", line=exc.line or n.line) from None


def model_to_dict(m):
    """Plain-data view used for output headers."""

    def law(x):
        if isinstance(x, PointMass):
            return x.k
        if isinstance(x, FinitePMF):
            return {"pmf": list(x.probs)}
        if isinstance(x, PoissonCount):
            return {"poisson": x.mean}
        raise TypeError(x)

    off = m.offspring
    if isinstance(off, PoissonUnit):
        od = {"family": "poisson"}
    elif isinstance(off, Geometric):
        od = {"family": "geometric", "success": off.success}
    elif isinstance(off, TwoPoint):
        od = {"family": "two_point", "p0": off.p0, "p2": off.p2}
    else:
        od = {"family": "pmf", "probs": list(off.probs)}
    mg = m.migration
    init = m.initial
    if isinstance(init, Fixed):
        idict = {"fixed": init.k}
    elif isinstance(init, FiniteMean):
        idict = {"finite_mean": law(init.law)}
    else:
        idict = {"heavy_tail": {"gamma": init.gamma, "c": init.c}}
    return {
        "offspring": od,
        "migration": {
            "p": mg.p,
            "q": mg.q,
            "r": mg.r,
            "fam_emigration": law(mg.fam_emigration),
            "ind_emigration": law(mg.ind_emigration),
            "immigration": law(mg.immigration),
        },
        "initial": idict,
        "derived": {"theta": m.theta, "b": m.b, "regime": m.regime},
    }
