"""Exception types shared across the package."""

from __future__ import annotations


class FbhfsError(Exception):
    """Base class for all package errors."""


class PrecisionError(FbhfsError, ValueError):
    """Requested working precision is too low."""


class NotPositiveDefinite(FbhfsError, ArithmeticError):
    """Cholesky pivot ``index`` (1-based) was not positive."""

    def __init__(self, index: int, pivot=None):
        self.index = index
        self.pivot = pivot
        super().__init__(f"matrix is not positive definite at pivot {index}")


class NoConvergence(FbhfsError, ArithmeticError):
    def __init__(self, iterations: int, detail: str = ""):
        self.iterations = iterations
        msg = f"no convergence after {iterations} iterations"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class DomainError(FbhfsError, ValueError):
    """Exponents outside the integrable region."""


class CannotSatisfy(FbhfsError, ValueError):
    """A parameter box cannot produce integrable exponent triples."""


class FormatError(FbhfsError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DimensionMismatch(FbhfsError, ValueError):
    pass


class UnexpectedDegeneracy(FbhfsError, ValueError):
    pass


class ConfigError(FbhfsError, ValueError):
    pass
