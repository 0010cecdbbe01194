"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a special function or operation."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration.

    Parameters
    ----------
    message : str
        Human readable description.
    field : str, optional
        Dotted path of the offending field.
    line : int, optional
        1-based line number in the source file.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class NonCritical(ConfigError):
    """Offspring mean differs from one."""


class NonNegativeMigrationMean(ConfigError):
    """Migration mean is not strictly negative."""


class InversionFailure(RuntimeError):
    """Numerical Laplace inversion could not meet the requested tolerance."""


class DivergentWeight(ValueError):
    """Power weight is not integrable against the base law."""


class InsufficientSurvivors(RuntimeError):
    """Too few surviving paths to form a conditional sample."""

    def __init__(self, found, required):
        self.found = found
        self.required = required
        super().__init__(f"{found} surviving paths, at least {required} required")


class UnsupportedRegime(ValueError):
    """Parameter combination outside every tabulated limit regime."""


class CycleOverflow(RuntimeError):
    """Alternating process needed more cycles than allowed."""


class ZeroCell(ValueError):
    """A survival estimate used in a log-log fit is zero."""
