"""Exception hierarchy. Each class maps to one CLI exit code."""


class SubsidyMarketError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(SubsidyMarketError, ValueError):
    """Invalid market configuration, policy or config file."""

    exit_code = 2

    def __init__(self, message, *, field=None, line=None):
        self.field = field
        self.line = line
        self.message = message
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class BudgetViolationError(ConfigError):
    """A provider spends more than its cash plus subsidy."""

    def __init__(self, provider, spent, budget):
        self.provider = provider
        self.spent = spent
        self.budget = budget
        super().__init__(
            f"provider {provider} spends {spent:.6g} but its budget is {budget:.6g}"
        )


class NonconvergenceError(SubsidyMarketError, RuntimeError):
    """An iterative solver gave up. ``residual`` holds the best residual seen."""

    exit_code = 3

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class SweepFailureError(NonconvergenceError):
    """No grid point of a government sweep reached an equilibrium."""


class NumericRegimeError(SubsidyMarketError, ArithmeticError):
    """Inputs fall outside the domain where a formula is defined."""

    exit_code = 4


class SingularDomainError(NumericRegimeError):
    """First-order conditions evaluated where a square-root denominator vanishes."""


class ComplexRootError(NumericRegimeError):
    """The depressed cubic has a single real root; trigonometric roots do not apply."""
